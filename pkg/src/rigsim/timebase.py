"""Simulated device clocks and the two-way time synchronization exchange.

Every device on the rig (worker node, LiDAR, camera, ...) carries a
``ClockState`` describing how its local clock deviates from the master
timeline: a fixed epoch offset, a drift rate in parts-per-million and an
optional Gaussian read jitter. A two-way timestamp exchange against the
master clock yields an offset/delay estimate which the servo applies as a
full step correction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

MAX_DRIFT_PPM = 1000.0


class ClockConfigError(ValueError):
    """Clock parameters violate the admissible range."""


class InconsistentExchangeError(ValueError):
    """A sync exchange implies a negative path delay."""


@dataclass(frozen=True)
class ClockState:
    """Affine clock model plus the currently applied servo correction.

    device_time(t) = t + true_epoch_offset + drift_ppm * 1e-6 * t
                       + disciplined_correction
    """

    true_epoch_offset: float = 0.0
    drift_ppm: float = 0.0
    read_jitter_sd: float = 0.0
    disciplined_correction: float = 0.0

    def __post_init__(self) -> None:
        if not abs(self.drift_ppm) <= MAX_DRIFT_PPM:
            raise ClockConfigError(
                f"|drift_ppm| must be <= {MAX_DRIFT_PPM}, got {self.drift_ppm}"
            )
        if self.read_jitter_sd < 0.0:
            raise ClockConfigError("read_jitter_sd must be >= 0")

    def device_time(self, true_time: float) -> float:
        """Jitter-free device reading at master/true time ``true_time``."""
        return (
            true_time
            + self.true_epoch_offset
            + self.drift_ppm * 1e-6 * true_time
            + self.disciplined_correction
        )

    def true_time_of_tick(self, device_time: float) -> float:
        """Invert device_time: the true time at which the clock shows ``device_time``."""
        return (device_time - self.true_epoch_offset - self.disciplined_correction) / (
            1.0 + self.drift_ppm * 1e-6
        )


@dataclass(frozen=True)
class SyncExchange:
    """Timestamps of one two-way exchange, initiated by the master.

    t1: master clock at request send
    t2: responder clock at request receive
    t3: responder clock at reply send
    t4: master clock at reply receive
    """

    t1: float
    t2: float
    t3: float
    t4: float

    def __post_init__(self) -> None:
        if self.t4 < self.t1:
            raise InconsistentExchangeError("t4 must be >= t1")
        if self.t3 < self.t2:
            raise InconsistentExchangeError("t3 must be >= t2")


def read_clock(clock: ClockState, true_time: float, rng_seed: int) -> float:
    """One clock read at ``true_time``: device time plus a seeded jitter draw."""
    if true_time < 0.0:
        raise ValueError("true_time must be >= 0")
    value = clock.device_time(true_time)
    if clock.read_jitter_sd > 0.0:
        value += random.Random(rng_seed).gauss(0.0, clock.read_jitter_sd)
    return value


def estimate_offset_delay(x: SyncExchange) -> tuple[float, float]:
    """Offset of the responder clock relative to the master, and one-way delay.

    offset = ((t2 - t1) + (t3 - t4)) / 2
    delay  = ((t4 - t1) - (t3 - t2)) / 2
    """
    offset = ((x.t2 - x.t1) + (x.t3 - x.t4)) / 2.0
    delay = ((x.t4 - x.t1) - (x.t3 - x.t2)) / 2.0
    if delay < 0.0:
        raise InconsistentExchangeError(f"negative path delay {delay}")
    return offset, delay


def discipline(clock: ClockState, offset: float, gain: float = 1.0) -> ClockState:
    """Apply a servo step: subtract ``gain * offset`` from the correction."""
    return replace(
        clock, disciplined_correction=clock.disciplined_correction - gain * offset
    )


def simulate_exchange(
    master: ClockState,
    responder: ClockState,
    true_send_time: float,
    delay_to_responder: float,
    delay_to_master: float,
) -> SyncExchange:
    """Run one jitter-free two-way exchange over a link with the given delays."""
    if delay_to_responder < 0.0 or delay_to_master < 0.0:
        raise ValueError("link delays must be >= 0")
    t_arrive = true_send_time + delay_to_responder
    return SyncExchange(
        t1=master.device_time(true_send_time),
        t2=responder.device_time(t_arrive),
        t3=responder.device_time(t_arrive),
        t4=master.device_time(t_arrive + delay_to_master),
    )

"""Simulated sensor fleet: triggered cameras, an event camera, disciplined
LiDARs and free-running devices.

Each sensor owns a ClockState and stamps its records with its own (wrong)
clock; recovering the exact trigger times is the job of post-processing.
Payloads are synthetic 64-bit digests, the artifact tests timing and
orchestration rather than rendering.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

from . import nmea
from .timebase import ClockState
from .trigger import NS, RISING, TriggerEvent, seconds_to_ns

TRIGGERED_CAMERA = "triggered_camera"
EVENT_CAMERA = "event_camera"
LIDAR = "lidar"
IMU = "imu"
DEPTH_CAMERA = "depth_camera"
ULTRASOUND = "ultrasound"

KINDS = (TRIGGERED_CAMERA, EVENT_CAMERA, LIDAR, IMU, DEPTH_CAMERA, ULTRASOUND)
TRIGGERED_KINDS = (TRIGGERED_CAMERA, EVENT_CAMERA, ULTRASOUND)

# Connection class per sensor kind; workers budget 3 USB + 1 Ethernet slots.
ETHERNET_KINDS = (LIDAR,)


class SensorConfigError(ValueError):
    """Sensor model violates its invariants."""


class ChannelMismatchError(ValueError):
    """Trigger event delivered to a sensor wired to another channel."""


class KindMismatchError(ValueError):
    """Operation applied to the wrong sensor kind."""


@dataclass
class SensorModel:
    sensor_id: str
    kind: str
    clock: ClockState = field(default_factory=ClockState)
    trigger_channel: int | None = None
    drop_probability: float = 0.0
    report_jitter_sd: float = 0.0
    payload_size_bytes: int = 0
    rate_hz: float = 0.0  # free-running kinds only
    emitted_count: int = 0
    fault_count: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SensorConfigError(f"unknown sensor kind {self.kind!r}")
        if self.kind in TRIGGERED_KINDS and self.trigger_channel is None:
            raise SensorConfigError(f"{self.kind} requires a trigger_channel")
        if not 0.0 <= self.drop_probability < 1.0:
            raise SensorConfigError("drop_probability must be in [0, 1)")
        if self.report_jitter_sd < 0.0:
            raise SensorConfigError("report_jitter_sd must be >= 0")

    @property
    def connection_class(self) -> str:
        return "ethernet" if self.kind in ETHERNET_KINDS else "usb"


@dataclass(frozen=True)
class SensorRecord:
    sensor_id: str
    sequence_index: int
    device_timestamp: float
    payload_digest: int  # 64-bit stand-in for the actual data
    payload_size_bytes: int


@dataclass(frozen=True)
class ExtTriggerEvent:
    """Event-camera stream entry for one trigger edge, 1 us resolution."""

    sensor_id: str
    device_timestamp_us: int
    edge: str


def payload_digest(sensor_id: str, sequence_index: int, time_ns: int) -> int:
    data = f"{sensor_id}:{sequence_index}:{time_ns}".encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def _stream_rng(rng_seed: int, sensor_id: str, index: int) -> random.Random:
    # Per-(sensor, event) substream so results do not depend on the order
    # sensors are advanced in.
    h = hashlib.blake2b(
        f"{rng_seed}:{sensor_id}:{index}".encode(), digest_size=8
    ).digest()
    return random.Random(int.from_bytes(h, "big"))


def fire_triggered_camera(
    model: SensorModel, event: TriggerEvent, rng_seed: int
) -> SensorRecord | None:
    """Deliver one trigger edge to a frame camera; None means a frame drop."""
    if event.channel_id != model.trigger_channel:
        raise ChannelMismatchError(
            f"{model.sensor_id} listens on channel {model.trigger_channel}, "
            f"event is on {event.channel_id}"
        )
    rng = _stream_rng(rng_seed, model.sensor_id, event.sequence_index)
    if model.drop_probability > 0.0 and rng.random() < model.drop_probability:
        return None
    stamp = model.clock.device_time(event.time_s)
    if model.clock.read_jitter_sd > 0.0:
        stamp += rng.gauss(0.0, model.clock.read_jitter_sd)
    if model.report_jitter_sd > 0.0:
        stamp += rng.gauss(0.0, model.report_jitter_sd)
    record = SensorRecord(
        sensor_id=model.sensor_id,
        sequence_index=model.emitted_count,
        device_timestamp=stamp,
        payload_digest=payload_digest(model.sensor_id, model.emitted_count, event.time_ns),
        payload_size_bytes=model.payload_size_bytes,
    )
    model.emitted_count += 1
    return record


def quantize_us(time_s: float) -> int:
    """Round a timestamp to whole microseconds, ties to even.

    Snaps to the nanosecond grid first so a stamp meant to be exactly
    half a microsecond is treated as a tie despite float rounding.
    """
    ns = round(time_s * 1e9)
    q, r = divmod(ns, 1000)
    if r > 500 or (r == 500 and q % 2 == 1):
        return q + 1
    return q


def perceive_ext_trigger(model: SensorModel, event: TriggerEvent) -> ExtTriggerEvent:
    """Record one trigger edge in the event stream; trigger events never drop."""
    if model.kind != EVENT_CAMERA:
        raise KindMismatchError(f"{model.sensor_id} is a {model.kind}, not an event camera")
    if event.channel_id != model.trigger_channel:
        raise ChannelMismatchError(
            f"{model.sensor_id} listens on channel {model.trigger_channel}, "
            f"event is on {event.channel_id}"
        )
    stamp = model.clock.device_time(event.time_s)
    return ExtTriggerEvent(
        sensor_id=model.sensor_id,
        device_timestamp_us=quantize_us(stamp),
        edge=event.edge,
    )


def discipline_lidar(
    model: SensorModel, pps: nmea.PpsPulse, sentence: str
) -> ClockState:
    """Step-set the LiDAR clock from one GPRMC+PPS pair.

    On decode failure or a PPS/sentence second mismatch the clock is left
    unchanged (holdover on the last correction) and the fault counter is
    incremented.
    """
    if model.kind != LIDAR:
        raise KindMismatchError(f"{model.sensor_id} is a {model.kind}, not a lidar")
    try:
        fields = nmea.decode_gprmc(sentence)
    except nmea.NmeaError:
        model.fault_count += 1
        return model.clock
    if fields.utc_second_of_day() != pps.marks_second % 86400:
        model.fault_count += 1
        return model.clock
    uncorrected = model.clock.device_time(pps.true_emit_time) - model.clock.disciplined_correction
    new_clock = ClockState(
        true_epoch_offset=model.clock.true_epoch_offset,
        drift_ppm=model.clock.drift_ppm,
        read_jitter_sd=model.clock.read_jitter_sd,
        disciplined_correction=pps.marks_second - uncorrected,
    )
    model.clock = new_clock
    return new_clock


def free_run(
    model: SensorModel, rate_hz: float, t_start: float, t_end: float
) -> list[SensorRecord]:
    """Records of a free-running sensor over [t_start, t_end) in true time.

    The device samples whenever its own clock crosses a multiple of the
    sample period, so clock drift changes the number of ticks that map
    into a true-time window.
    """
    if rate_hz <= 0.0:
        raise ValueError("rate_hz must be > 0")
    period_dev = 1.0 / rate_hz
    # First device tick k with true emission time >= t_start.
    k = math.ceil(model.clock.device_time(t_start) * rate_hz)
    k = max(k, 0)
    records: list[SensorRecord] = []
    while True:
        device_stamp = k * period_dev
        true_t = model.clock.true_time_of_tick(device_stamp)
        if true_t >= t_end:
            break
        if true_t >= t_start:
            records.append(
                SensorRecord(
                    sensor_id=model.sensor_id,
                    sequence_index=model.emitted_count,
                    device_timestamp=device_stamp,
                    payload_digest=payload_digest(
                        model.sensor_id, model.emitted_count, seconds_to_ns(device_stamp)
                    ),
                    payload_size_bytes=model.payload_size_bytes,
                )
            )
            model.emitted_count += 1
        k += 1
    return records

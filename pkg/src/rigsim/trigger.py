"""Syncboard model: square-wave trigger channels and schedule generation.

All edge times live on an absolute integer-nanosecond grid anchored at
board time 0 plus the channel offset, so a board started mid-run joins the
existing grid and re-runs reproduce identical timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .nmea import LidarChannelConfig

NS = 1_000_000_000
MAX_FREQUENCY_HZ = 1000.0
MAX_CHANNELS = 12
MAX_TOTAL_SENSORS = 130
SPEED_OF_SOUND_M_S = 343.0
ULTRASOUND_MAX_RANGE_M = 8.0

RISING = "rising"
FALLING = "falling"
BOTH = "both"


class ChannelConfigError(ValueError):
    """Trigger channel parameters violate the board's limits."""


class BoardConfigError(ValueError):
    """Board-level limits (channel or sensor counts) violated."""


class SlotTooShortError(ValueError):
    """Ultrasound slot shorter than the acoustic round-trip time."""


def seconds_to_ns(t: float) -> int:
    return round(t * NS)


def ns_to_seconds(t_ns: int) -> float:
    return t_ns / NS


@dataclass(frozen=True)
class TriggerChannelConfig:
    channel_id: int
    frequency_hz: float
    polarity: str = RISING
    offset_s: float = 0.0
    duty_ratio: float = 0.5
    voltage: float = 3.3  # metadata only
    vacancies: int = 6

    def __post_init__(self) -> None:
        if not 0 <= self.channel_id < MAX_CHANNELS:
            raise ChannelConfigError(f"channel_id must be 0..{MAX_CHANNELS - 1}")
        if not 0.0 < self.frequency_hz <= MAX_FREQUENCY_HZ:
            raise ChannelConfigError(
                f"frequency_hz must be in (0, {MAX_FREQUENCY_HZ}], got {self.frequency_hz}"
            )
        if self.polarity not in (RISING, FALLING, BOTH):
            raise ChannelConfigError(f"bad polarity {self.polarity!r}")
        if not 0.0 < self.duty_ratio < 1.0:
            raise ChannelConfigError("duty_ratio must be in (0, 1)")
        if not 0.0 <= self.offset_s < 1.0 / self.frequency_hz:
            raise ChannelConfigError("offset_s must be in [0, period)")
        if self.voltage not in (3.3, 5.0):
            raise ChannelConfigError("voltage must be 3.3 or 5.0")
        if not 6 <= self.vacancies <= 40:
            raise ChannelConfigError("vacancies must be 6..40")

    @property
    def period_ns(self) -> int:
        return round(NS / self.frequency_hz)

    @property
    def offset_ns(self) -> int:
        return seconds_to_ns(self.offset_s)

    @property
    def high_ns(self) -> int:
        return round(self.duty_ratio * self.period_ns)


@dataclass(frozen=True)
class TriggerEvent:
    channel_id: int
    time_ns: int
    edge: str  # rising | falling
    sequence_index: int

    @property
    def time_s(self) -> float:
        return ns_to_seconds(self.time_ns)


def generate_schedule(
    cfg: TriggerChannelConfig, t_start: float, t_end: float
) -> list[TriggerEvent]:
    """All edges of one channel with times in [t_start, t_end).

    Rising edges sit at offset + k/f on the absolute grid; the falling edge
    of cycle k follows duty/f later. Only edges matching the channel
    polarity are emitted; sequence indices are dense over the output.
    """
    if not t_end > t_start or t_start < 0.0:
        raise ValueError("need t_end > t_start >= 0")
    start_ns = seconds_to_ns(t_start)
    end_ns = seconds_to_ns(t_end)
    period = cfg.period_ns
    offset = cfg.offset_ns
    high = cfg.high_ns

    # Earliest cycle whose falling edge can still land in the window.
    k0 = max(0, -(-(start_ns - offset - high) // period))  # ceil division
    events: list[TriggerEvent] = []
    seq = 0
    k = k0
    while offset + k * period < end_ns:
        rise = offset + k * period
        if cfg.polarity in (RISING, BOTH) and start_ns <= rise:
            events.append(TriggerEvent(cfg.channel_id, rise, RISING, seq))
            seq += 1
        fall = rise + high
        if cfg.polarity in (FALLING, BOTH) and start_ns <= fall < end_ns:
            events.append(TriggerEvent(cfg.channel_id, fall, FALLING, seq))
            seq += 1
        k += 1
    return events


@dataclass
class SyncboardState:
    channels: list[TriggerChannelConfig] = field(default_factory=list)
    lidar_channel: LidarChannelConfig = field(default_factory=LidarChannelConfig)
    running: bool = False
    external_master: str = "gnss"  # gnss | ntp | freerun

    def __post_init__(self) -> None:
        if len(self.channels) > MAX_CHANNELS:
            raise BoardConfigError(f"at most {MAX_CHANNELS} trigger channels")
        ids = [c.channel_id for c in self.channels]
        if len(set(ids)) != len(ids):
            raise BoardConfigError("duplicate channel_id")
        total = sum(c.vacancies for c in self.channels)
        if total > MAX_TOTAL_SENSORS:
            raise BoardConfigError(
                f"{total} sensor connections exceed the {MAX_TOTAL_SENSORS} limit"
            )
        if self.external_master not in ("gnss", "ntp", "freerun"):
            raise BoardConfigError(f"bad external_master {self.external_master!r}")

    def channel(self, channel_id: int) -> TriggerChannelConfig:
        for c in self.channels:
            if c.channel_id == channel_id:
                return c
        raise KeyError(f"unknown channel {channel_id}")


def start_stop(board: SyncboardState, command: str) -> SyncboardState:
    """Toggle the board's running flag; idempotent in both directions."""
    if command not in ("start", "stop"):
        raise ValueError(f"command must be 'start' or 'stop', got {command!r}")
    return replace(board, running=(command == "start"))


def board_schedule(
    board: SyncboardState, t_start: float, t_end: float
) -> list[TriggerEvent]:
    """Edges of all channels while running, sorted by (time, channel)."""
    if not board.running:
        return []
    events: list[TriggerEvent] = []
    for cfg in board.channels:
        events.extend(generate_schedule(cfg, t_start, t_end))
    events.sort(key=lambda e: (e.time_ns, e.channel_id, e.sequence_index))
    return events


def min_ultrasound_slot_s(max_range_m: float = ULTRASOUND_MAX_RANGE_M) -> float:
    """Acoustic round-trip time at the configured maximum range."""
    return 2.0 * max_range_m / SPEED_OF_SOUND_M_S


def ultrasound_schedule(
    n_sensors: int,
    slot_s: float,
    t_start: float,
    t_end: float,
    max_range_m: float = ULTRASOUND_MAX_RANGE_M,
) -> list[TriggerEvent]:
    """Interleaved firing plan: sensor i owns slot i of every sweep.

    Sensor i fires at t_start + (k * n_sensors + i) * slot_s; no two
    sensors are ever active within the same slot, which prevents acoustic
    cross-talk.
    """
    if n_sensors < 1:
        raise ValueError("n_sensors must be >= 1")
    bound = min_ultrasound_slot_s(max_range_m)
    if slot_s < bound:
        raise SlotTooShortError(
            f"slot {slot_s} s is below the {bound:.4f} s acoustic round trip"
        )
    start_ns = seconds_to_ns(t_start)
    end_ns = seconds_to_ns(t_end)
    slot_ns = seconds_to_ns(slot_s)
    events: list[TriggerEvent] = []
    seq_per_sensor = [0] * n_sensors
    j = 0
    while True:
        t = start_ns + j * slot_ns
        if t >= end_ns:
            break
        sensor = j % n_sensors
        events.append(TriggerEvent(sensor, t, RISING, seq_per_sensor[sensor]))
        seq_per_sensor[sensor] += 1
        j += 1
    return events

"""Post-processing of recorded data.

Timestamp restoration matches each recorded frame to the trigger edge
that caused it and replaces the sensor's own (wrong) timestamp with the
exact trigger time; trigger edges left unmatched are the frame drops.
Bayer utilities interleave the four per-channel planes back into a mosaic
and demosaic it to a bgr image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sensors import SensorRecord
from .trigger import TriggerEvent

PATTERNS = {
    # pattern -> channel at (row, col) offsets ((0,0), (0,1), (1,0), (1,1))
    "RGGB": ("R", "Gr", "Gb", "B"),
    "BGGR": ("B", "Gb", "Gr", "R"),
    "GRBG": ("Gr", "R", "B", "Gb"),
    "GBRG": ("Gb", "B", "R", "Gr"),
}

DEFAULT_TOLERANCE_FRACTION = 0.4


class MatchingToleranceError(ValueError):
    """Tolerance at or above half the trigger period: matching is ambiguous."""


class PlaneShapeError(ValueError):
    """Bayer planes or mosaic have inconsistent dimensions."""


@dataclass
class RestorationReport:
    sensor_id: str
    matched: int = 0
    dropped_trigger_indices: list[int] = field(default_factory=list)
    max_match_residual_s: float = 0.0
    unmatched_records: int = 0

    def as_dict(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "matched": self.matched,
            "dropped_trigger_indices": list(self.dropped_trigger_indices),
            "max_match_residual_s": self.max_match_residual_s,
            "unmatched_records": self.unmatched_records,
        }


def _min_period(triggers: list[TriggerEvent]) -> float:
    gaps = [
        (b.time_ns - a.time_ns) / 1e9
        for a, b in zip(triggers, triggers[1:])
    ]
    return min(gaps) if gaps else float("inf")


def _greedy_match(
    record_times: list[float], trigger_times: list[float], tolerance_s: float
) -> list[int | None]:
    """Monotone nearest matching: per record, index of its trigger or None.

    Both lists are sorted; matches never cross, so a single forward pass
    suffices: each record takes the nearest still-available trigger within
    tolerance.
    """
    matches: list[int | None] = []
    j = 0
    n = len(trigger_times)
    for t_rec in record_times:
        while j < n - 1 and abs(trigger_times[j + 1] - t_rec) <= abs(
            trigger_times[j] - t_rec
        ):
            j += 1
        if j < n and abs(trigger_times[j] - t_rec) <= tolerance_s:
            matches.append(j)
            j += 1
        else:
            matches.append(None)
    return matches


def restore_timestamps(
    records: list[SensorRecord],
    triggers: list[TriggerEvent],
    tolerance_s: float | None = None,
) -> tuple[list[SensorRecord], RestorationReport]:
    """Replace record timestamps with their matched triggers' true times.

    Records are first debiased by the mean record-minus-trigger residual of
    a provisional match so a constant sensor clock offset does not defeat
    the tolerance window. Returns the restored records (unmatched ones kept
    with their original stamps) and the report.
    """
    triggers = sorted(triggers, key=lambda e: e.time_ns)
    records = sorted(records, key=lambda r: r.device_timestamp)
    period = _min_period(triggers)
    if tolerance_s is None:
        tolerance_s = DEFAULT_TOLERANCE_FRACTION * period
    if tolerance_s >= period / 2.0:
        raise MatchingToleranceError(
            f"tolerance {tolerance_s} s >= half the {period} s trigger period"
        )
    sensor_id = records[0].sensor_id if records else ""
    report = RestorationReport(sensor_id=sensor_id)
    trigger_times = [e.time_s for e in triggers]
    record_times = [r.device_timestamp for r in records]

    # One-pass bias removal: provisional match with a wide window, then
    # subtract the mean residual before the final toleranced match.
    bias = 0.0
    if records and triggers:
        wide = _greedy_match(record_times, trigger_times, period / 2.0)
        residuals = [
            rt - trigger_times[m] for rt, m in zip(record_times, wide) if m is not None
        ]
        if residuals:
            bias = sum(residuals) / len(residuals)
    corrected = [t - bias for t in record_times]
    matches = _greedy_match(corrected, trigger_times, tolerance_s)

    restored: list[SensorRecord] = []
    matched_triggers = set()
    max_residual = 0.0
    for record, t_corr, match in zip(records, corrected, matches):
        if match is None:
            report.unmatched_records += 1
            restored.append(record)
        else:
            matched_triggers.add(match)
            max_residual = max(max_residual, abs(t_corr - trigger_times[match]))
            restored.append(
                SensorRecord(
                    sensor_id=record.sensor_id,
                    sequence_index=record.sequence_index,
                    device_timestamp=triggers[match].time_s,
                    payload_digest=record.payload_digest,
                    payload_size_bytes=record.payload_size_bytes,
                )
            )
    report.matched = len(matched_triggers)
    report.max_match_residual_s = max_residual
    report.dropped_trigger_indices = [
        triggers[i].sequence_index for i in range(len(triggers)) if i not in matched_triggers
    ]
    return restored, report


@dataclass
class BayerPlanes:
    """The four color planes of a Bayer-compressed capture."""

    r: np.ndarray
    gr: np.ndarray
    gb: np.ndarray
    b: np.ndarray
    pattern: str = "RGGB"

    def __post_init__(self) -> None:
        if self.pattern not in PATTERNS:
            raise PlaneShapeError(f"unknown pattern {self.pattern!r}")
        shapes = {p.shape for p in (self.r, self.gr, self.gb, self.b)}
        if len(shapes) != 1 or len(self.r.shape) != 2:
            raise PlaneShapeError(f"planes must share one 2-D shape, got {shapes}")

    def plane(self, name: str) -> np.ndarray:
        return {"R": self.r, "Gr": self.gr, "Gb": self.gb, "B": self.b}[name]


def interleave_bayer(planes: BayerPlanes) -> np.ndarray:
    """Lay the four H x W planes out as one 2H x 2W mosaic."""
    h, w = planes.r.shape
    mosaic = np.empty((2 * h, 2 * w), dtype=planes.r.dtype)
    names = PATTERNS[planes.pattern]
    mosaic[0::2, 0::2] = planes.plane(names[0])
    mosaic[0::2, 1::2] = planes.plane(names[1])
    mosaic[1::2, 0::2] = planes.plane(names[2])
    mosaic[1::2, 1::2] = planes.plane(names[3])
    return mosaic


def deinterleave_bayer(mosaic: np.ndarray, pattern: str = "RGGB") -> BayerPlanes:
    """Inverse of interleave_bayer."""
    if mosaic.ndim != 2 or mosaic.shape[0] % 2 or mosaic.shape[1] % 2:
        raise PlaneShapeError("mosaic must be 2-D with even dimensions")
    quads = {
        name: mosaic[i::2, j::2]
        for name, (i, j) in zip(PATTERNS[pattern], ((0, 0), (0, 1), (1, 0), (1, 1)))
    }
    return BayerPlanes(
        r=quads["R"], gr=quads["Gr"], gb=quads["Gb"], b=quads["B"], pattern=pattern
    )


def _channel_masks(shape: tuple[int, int], pattern: str) -> dict[str, np.ndarray]:
    names = PATTERNS[pattern]
    masks = {"R": np.zeros(shape), "G": np.zeros(shape), "B": np.zeros(shape)}
    for name, (i, j) in zip(names, ((0, 0), (0, 1), (1, 0), (1, 1))):
        channel = "G" if name in ("Gr", "Gb") else name
        masks[channel][i::2, j::2] = 1.0
    return masks


_KERNEL_G = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=float)
_KERNEL_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=float)


def _interp(values: np.ndarray, mask: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Edge-replicated 3x3 weighted average over the samples of one channel.
    vp = np.pad(values * mask, 1, mode="edge")
    mp = np.pad(mask, 1, mode="edge")
    num = np.zeros_like(values, dtype=float)
    den = np.zeros_like(values, dtype=float)
    h, w = values.shape
    for di in range(3):
        for dj in range(3):
            weight = kernel[di, dj]
            if weight == 0.0:
                continue
            num += weight * vp[di : di + h, dj : dj + w]
            den += weight * mp[di : di + h, dj : dj + w]
    return num / den


def demosaic_bilinear(mosaic: np.ndarray, pattern: str = "RGGB") -> np.ndarray:
    """Bilinear demosaic to an H x W x 3 image in blue-green-red order.

    Output is uint8, clamped after averaging with ties rounded away from
    zero.
    """
    if mosaic.ndim != 2 or mosaic.shape[0] % 2 or mosaic.shape[1] % 2:
        raise PlaneShapeError("mosaic must be 2-D with even dimensions")
    values = mosaic.astype(float)
    masks = _channel_masks(mosaic.shape, pattern)
    blue = _interp(values, masks["B"], _KERNEL_RB)
    green = _interp(values, masks["G"], _KERNEL_G)
    red = _interp(values, masks["R"], _KERNEL_RB)
    bgr = np.stack([blue, green, red], axis=-1)
    return np.clip(np.floor(bgr + 0.5), 0, 255).astype(np.uint8)

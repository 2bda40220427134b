"""Interference-evaluation statistics.

Per-beam temporal precision (sample mean/std with N-1 denominators, then
mean/std of the per-beam stds across the fleet), FOV binning for
non-repetitive scanners, total-least-squares plane fitting with
point-to-plane Gaussian accuracy, pixel-wise depth differences, and the
flagging rules that separate interference-affected runs from clean ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_AZ_BIN_DEG = 0.2
DEFAULT_EL_BIN_DEG = 0.2

# Collective-run precision counts as interference when the mean per-beam
# std both doubles and worsens by more than 1 cm in absolute terms.
INTERFERENCE_RATIO = 2.0
INTERFERENCE_ABS_M = 0.01


class InsufficientDataError(ValueError):
    """Not enough samples/points to compute the requested statistic."""


class DegenerateGeometryError(ValueError):
    """Points are collinear or coincident; no unique plane exists."""


@dataclass
class RangeSeries:
    """Distance samples of one beam (or FOV bin) over time."""

    beam_or_bin_id: int
    samples: list[tuple[float, float]] = field(default_factory=list)  # (t, distance)

    def distances(self) -> np.ndarray:
        return np.array([d for _, d in self.samples], dtype=float)


@dataclass(frozen=True)
class BeamStats:
    per_beam_mean: dict[int, float]
    per_beam_std: dict[int, float]
    mean_of_stds: float
    std_of_stds: float
    n_beams: int
    n_samples_total: int
    excluded_beams: int = 0


@dataclass(frozen=True)
class Plane:
    """Plane n . x = offset with unit normal n."""

    normal: tuple[float, float, float]
    offset: float

    def signed_distances(self, points: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal)
        return np.asarray(points, dtype=float) @ n - self.offset


@dataclass(frozen=True)
class PlaneAccuracy:
    plane: Plane
    mean_distance: float
    std_distance: float
    n_points: int


@dataclass(frozen=True)
class PixelDiffStats:
    mean_diff: float
    std_diff: float
    n_valid_pixels: int


def _sample_std(values: np.ndarray) -> float:
    # N-1 denominator.
    mean = float(np.mean(values))
    return math.sqrt(float(np.sum((values - mean) ** 2)) / (len(values) - 1))


def beam_stats(series: list[RangeSeries]) -> BeamStats:
    """Temporal mean/std per beam, then mean/std of the stds across beams.

    Beams with fewer than two samples are excluded (and counted); all
    denominators are the N-1 sample forms.
    """
    per_mean: dict[int, float] = {}
    per_std: dict[int, float] = {}
    excluded = 0
    total = 0
    for s in series:
        d = s.distances()
        if len(d) < 2:
            excluded += 1
            continue
        if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
            raise ValueError(f"beam {s.beam_or_bin_id}: distances must be finite and > 0")
        per_mean[s.beam_or_bin_id] = float(np.mean(d))
        per_std[s.beam_or_bin_id] = _sample_std(d)
        total += len(d)
    if not per_std:
        raise InsufficientDataError("no beam has the 2+ samples needed for a std")
    stds = np.array([per_std[b] for b in sorted(per_std)])
    mean_of_stds = float(np.mean(stds))
    std_of_stds = _sample_std(stds) if len(stds) >= 2 else 0.0
    return BeamStats(
        per_beam_mean=per_mean,
        per_beam_std=per_std,
        mean_of_stds=mean_of_stds,
        std_of_stds=std_of_stds,
        n_beams=len(per_std),
        n_samples_total=total,
        excluded_beams=excluded,
    )


@dataclass
class BinnedFov:
    series: list[RangeSeries]
    out_of_fov: int


def bin_fov(
    points: list[tuple[float, float, float, float]],
    az_bins: int,
    el_bins: int,
    az_range: tuple[float, float] = (-180.0, 180.0),
    el_range: tuple[float, float] = (-90.0, 90.0),
) -> BinnedFov:
    """Bin (azimuth, elevation, distance, t) points into an az x el grid.

    Within one timestamp, each bin keeps its nearest reading. Bin edges
    are half-open [low, high); points outside the FOV are counted, not
    binned. Bin ids are el_index * az_bins + az_index.
    """
    if az_bins < 1 or el_bins < 1:
        raise ValueError("bin counts must be >= 1")
    az_lo, az_hi = az_range
    el_lo, el_hi = el_range
    az_w = (az_hi - az_lo) / az_bins
    el_w = (el_hi - el_lo) / el_bins
    nearest: dict[tuple[float, int], float] = {}
    out_of_fov = 0
    for az, el, dist, t in points:
        if not (az_lo <= az < az_hi and el_lo <= el < el_hi):
            out_of_fov += 1
            continue
        ai = min(int((az - az_lo) / az_w), az_bins - 1)
        ei = min(int((el - el_lo) / el_w), el_bins - 1)
        key = (t, ei * az_bins + ai)
        if key not in nearest or dist < nearest[key]:
            nearest[key] = dist
    by_bin: dict[int, list[tuple[float, float]]] = {}
    for (t, bin_id), dist in sorted(nearest.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        by_bin.setdefault(bin_id, []).append((t, dist))
    series = [RangeSeries(bin_id, samples) for bin_id, samples in sorted(by_bin.items())]
    return BinnedFov(series=series, out_of_fov=out_of_fov)


def fit_plane(points: np.ndarray) -> Plane:
    """Total-least-squares plane: minimizes orthogonal point distances.

    Centroid plus the smallest principal direction of the centered points;
    closed form, no iteration. The residual mean over the input is 0 by
    construction.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise InsufficientDataError("need at least 3 xyz points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if singular[1] <= 1e-12 * max(singular[0], 1.0):
        raise DegenerateGeometryError("points are collinear or coincident")
    normal = vt[2]
    # Deterministic orientation: largest-magnitude component positive.
    lead = int(np.argmax(np.abs(normal)))
    if normal[lead] < 0:
        normal = -normal
    return Plane(normal=tuple(float(v) for v in normal),
                 offset=float(normal @ centroid))


def plane_accuracy(plane: Plane, points: np.ndarray) -> PlaneAccuracy:
    """Gaussian fit (sample mean/std) of signed point-to-plane distances."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise InsufficientDataError("empty point set")
    distances = plane.signed_distances(pts)
    std = _sample_std(distances) if len(distances) >= 2 else 0.0
    return PlaneAccuracy(
        plane=plane,
        mean_distance=float(np.mean(distances)),
        std_distance=std,
        n_points=len(distances),
    )


def pixel_diff(depth_run_a: np.ndarray, depth_run_b: np.ndarray) -> PixelDiffStats:
    """Per-pixel mean distances of two runs, then stats of their difference.

    Runs are (frames, H, W) stacks or already-averaged (H, W) grids.
    Invalid pixels carry distance 0 and are excluded; only pixels valid in
    both runs contribute.
    """
    mean_a, valid_a = _per_pixel_mean(depth_run_a)
    mean_b, valid_b = _per_pixel_mean(depth_run_b)
    if mean_a.shape != mean_b.shape:
        raise ValueError(f"image dimensions differ: {mean_a.shape} vs {mean_b.shape}")
    both = valid_a & valid_b
    if not np.any(both):
        raise InsufficientDataError("no pixel is valid in both runs")
    diff = mean_b[both] - mean_a[both]
    std = _sample_std(diff) if diff.size >= 2 else 0.0
    return PixelDiffStats(
        mean_diff=float(np.mean(diff)), std_diff=std, n_valid_pixels=int(diff.size)
    )


def _per_pixel_mean(run: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(run, dtype=float)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError("depth run must be (frames, H, W) or (H, W)")
    valid = arr > 0.0
    counts = valid.sum(axis=0)
    sums = np.where(valid, arr, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return means, counts > 0


def flag_interference(sole: BeamStats, collective: BeamStats) -> str:
    """'flagged' when the collective mean-of-stds both doubles and worsens
    by more than 1 cm versus the sole run; otherwise 'clear'."""
    worse_ratio = collective.mean_of_stds > INTERFERENCE_RATIO * sole.mean_of_stds
    worse_abs = collective.mean_of_stds - sole.mean_of_stds > INTERFERENCE_ABS_M
    return "flagged" if (worse_ratio and worse_abs) else "clear"


def flag_interference_values(sole_mean_std: float, collective_mean_std: float) -> str:
    """flag_interference on bare mean-of-stds figures (e.g. tabulated ones)."""
    worse_ratio = collective_mean_std > INTERFERENCE_RATIO * sole_mean_std
    worse_abs = collective_mean_std - sole_mean_std > INTERFERENCE_ABS_M
    return "flagged" if (worse_ratio and worse_abs) else "clear"


def flag_accuracy_change(sole: PlaneAccuracy, collective: PlaneAccuracy) -> str:
    """'significant' when the mean point-to-plane distance shifts by more
    than two collective-run standard deviations."""
    shift = abs(collective.mean_distance - sole.mean_distance)
    return "significant" if shift > 2.0 * collective.std_distance else "insignificant"

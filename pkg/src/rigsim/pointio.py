"""File formats consumed by the analysis subcommands.

- Point streams: CSV with header ``t,beam_id,azimuth_deg,elevation_deg,distance_m``.
- Point clouds: ASCII PLY with x y z vertex properties.
- Depth runs: flat binary float32 frames plus a text sidecar naming
  ``width``, ``height`` and ``frames``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .analysis import RangeSeries

CSV_HEADER = ["t", "beam_id", "azimuth_deg", "elevation_deg", "distance_m"]


class FileFormatError(ValueError):
    pass


def read_point_csv(path: str | Path) -> list[tuple[float, int, float, float, float]]:
    """Rows of (t, beam_id, azimuth_deg, elevation_deg, distance_m)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise FileFormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise FileFormatError(f"{path}:{line_no}: expected 5 fields")
            t, beam, az, el, dist = row
            rows.append((float(t), int(beam), float(az), float(el), float(dist)))
    return rows


def write_point_csv(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t, beam, az, el, dist in rows:
            writer.writerow([repr(float(t)), beam, repr(float(az)),
                             repr(float(el)), repr(float(dist))])


def series_from_rows(rows) -> list[RangeSeries]:
    """Group CSV rows into per-beam range series, time-sorted."""
    by_beam: dict[int, list[tuple[float, float]]] = {}
    for t, beam, _az, _el, dist in rows:
        by_beam.setdefault(beam, []).append((t, dist))
    return [
        RangeSeries(beam, sorted(samples))
        for beam, samples in sorted(by_beam.items())
    ]


def read_ply(path: str | Path) -> np.ndarray:
    """Vertices of an ASCII PLY file with x y z leading properties."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise FileFormatError(f"{path}: missing 'ply' magic")
    n_vertices = None
    end = None
    for i, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if tokens[:2] == ["format", "ascii"]:
            continue
        if tokens[:2] == ["element", "vertex"]:
            n_vertices = int(tokens[2])
        if tokens == ["end_header"]:
            end = i
            break
    if n_vertices is None or end is None:
        raise FileFormatError(f"{path}: malformed PLY header")
    data = []
    for line in lines[end + 1 : end + 1 + n_vertices]:
        parts = line.split()
        if len(parts) < 3:
            raise FileFormatError(f"{path}: short vertex line {line!r}")
        data.append([float(parts[0]), float(parts[1]), float(parts[2])])
    if len(data) != n_vertices:
        raise FileFormatError(f"{path}: expected {n_vertices} vertices, got {len(data)}")
    return np.array(data, dtype=float)


def write_ply(path: str | Path, points: np.ndarray) -> None:
    pts = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("end_header\n")
        for x, y, z in pts:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


def read_depth_run(path: str | Path) -> np.ndarray:
    """Depth run as a (frames, H, W) float32 array.

    ``path`` names the binary file; the sidecar sits next to it with a
    ``.meta`` suffix and ``key = value`` lines for width/height/frames.
    """
    path = Path(path)
    sidecar = path.with_suffix(path.suffix + ".meta")
    if not sidecar.exists():
        raise FileFormatError(f"missing sidecar {sidecar}")
    meta = {}
    for line in sidecar.read_text().splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            meta[key.strip()] = int(value.strip())
    for key in ("width", "height", "frames"):
        if key not in meta:
            raise FileFormatError(f"{sidecar}: missing {key}")
    data = np.fromfile(path, dtype="<f4")
    expected = meta["width"] * meta["height"] * meta["frames"]
    if data.size != expected:
        raise FileFormatError(
            f"{path}: {data.size} values, sidecar implies {expected}"
        )
    return data.reshape(meta["frames"], meta["height"], meta["width"]).astype(float)


def write_depth_run(path: str | Path, run: np.ndarray) -> None:
    run = np.asarray(run, dtype="<f4")
    if run.ndim == 2:
        run = run[None, :, :]
    path = Path(path)
    run.tofile(path)
    sidecar = path.with_suffix(path.suffix + ".meta")
    frames, height, width = run.shape
    sidecar.write_text(f"width = {width}\nheight = {height}\nframes = {frames}\n")

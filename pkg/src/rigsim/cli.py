"""Command-line entry point.

Batch subcommands (codec, schedules, post-processing, analysis) run
in-process on files and stdin/stdout. Cluster runs either execute locally
(`run`) or drive a live gateway started with `serve` (`cluster status`,
`cluster collect`).

Exit statuses: 0 ok, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import csv as csv_mod
import dataclasses
import json
import sys
from pathlib import Path

import click

from . import analysis, nmea, pointio, postproc, runner, trigger
from .chunks import iter_chunk_files, read_chunk_file
from .config import ConfigError, load_config, validate_config


@click.group()
def main() -> None:
    """Multi-sensor recording-rig simulator and analysis toolkit."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
def validate(config_path: str) -> None:
    """Check a run config; print diagnostics with locations."""
    diagnostics = validate_config(config_path)
    for diag in diagnostics:
        click.echo(str(diag))
    if any(d.severity == "error" for d in diagnostics):
        sys.exit(2)
    click.echo(f"{config_path}: ok")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--duration", type=float, default=None, help="Override config duration_s.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Override config output_dir.")
def run(config_path: str, duration: float | None, out_dir: str | None) -> None:
    """Execute a full simulated collection run and write all artifacts."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        for diag in exc.diagnostics:
            click.echo(str(diag), err=True)
        sys.exit(2)
    try:
        sim = runner.run_full(config, duration, out_dir)
    except Exception as exc:  # noqa: BLE001 - lifecycle failures map to exit 1
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(1)
    summary = sim.last_summary or {}
    for sensor_id, stats in sorted(summary.get("sensors", {}).items()):
        click.echo(f"{sensor_id}: {stats['records']} records, {stats['bytes']} bytes")
    click.echo(f"artifacts in {sim.out_dir}")


@main.group(name="trigger")
def trigger_group() -> None:
    """Trigger schedule tools."""


@trigger_group.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--from", "t_from", required=True, type=float)
@click.option("--to", "t_to", required=True, type=float)
@click.option("--channel", type=int, default=None, help="Restrict to one channel.")
@click.option("--out", type=click.Path(), default=None, help="CSV file (default stdout).")
def schedule(config_path: str, t_from: float, t_to: float,
             channel: int | None, out: str | None) -> None:
    """Emit the trigger-edge schedule of the configured channels as CSV."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    board = trigger.start_stop(config.syncboard, "start")
    events = trigger.board_schedule(board, t_from, t_to)
    if channel is not None:
        events = [e for e in events if e.channel_id == channel]
    sink = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv_mod.writer(sink)
        writer.writerow(["channel_id", "time_ns", "edge", "seq"])
        for e in events:
            writer.writerow([e.channel_id, e.time_ns, e.edge, e.sequence_index])
    finally:
        if out:
            sink.close()


@main.group(name="nmea")
def nmea_group() -> None:
    """GPRMC codec."""


@nmea_group.command()
def encode() -> None:
    """Read GPRMC fields as JSON from stdin, write the sentence to stdout."""
    try:
        fields = nmea.GprmcFields(**json.load(sys.stdin))
        sys.stdout.write(nmea.encode_gprmc(fields))
    except (TypeError, json.JSONDecodeError, nmea.NmeaError) as exc:
        click.echo(f"encode error: {exc}", err=True)
        sys.exit(2)


@nmea_group.command()
def decode() -> None:
    """Read a GPRMC sentence from stdin, write its fields as JSON to stdout."""
    try:
        fields = nmea.decode_gprmc(sys.stdin.read().strip())
    except nmea.NmeaError as exc:
        click.echo(f"decode error: {exc}", err=True)
        sys.exit(1)
    json.dump(dataclasses.asdict(fields), sys.stdout, indent=2)
    sys.stdout.write("\n")


@main.group(name="postproc")
def postproc_group() -> None:
    """Post-processing of recorded runs."""


def _load_schedule_csv(path: str) -> dict[int, list[trigger.TriggerEvent]]:
    by_channel: dict[int, list[trigger.TriggerEvent]] = {}
    with open(path, newline="") as fh:
        reader = csv_mod.DictReader(fh)
        for row in reader:
            event = trigger.TriggerEvent(
                channel_id=int(row["channel_id"]),
                time_ns=int(row["time_ns"]),
                edge=row["edge"],
                sequence_index=int(row["seq"]),
            )
            by_channel.setdefault(event.channel_id, []).append(event)
    return by_channel


@postproc_group.command()
@click.option("--chunks", "chunks_dir", required=True, type=click.Path(exists=True))
@click.option("--schedule", "schedule_csv", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--tolerance", type=float, default=None,
              help="Match tolerance in seconds (default 40% of trigger period).")
def restore(chunks_dir: str, schedule_csv: str, report_path: str,
            tolerance: float | None) -> None:
    """Restore trigger timestamps onto recorded sensor messages.

    Each sensor is matched against the channel of the schedule that
    explains the most of its records.
    """
    by_channel = _load_schedule_csv(schedule_csv)
    records_by_sensor: dict[str, list] = {}
    for path in iter_chunk_files(Path(chunks_dir)):
        chunk = read_chunk_file(path)
        records_by_sensor.setdefault(chunk.sensor_id, []).extend(chunk.records)
    if not by_channel:
        click.echo("schedule is empty", err=True)
        sys.exit(1)
    reports = []
    for sensor_id in sorted(records_by_sensor):
        records = records_by_sensor[sensor_id]
        best = None
        for channel_id in sorted(by_channel):
            try:
                _, report = postproc.restore_timestamps(
                    records, by_channel[channel_id], tolerance
                )
            except postproc.MatchingToleranceError as exc:
                click.echo(f"{sensor_id}: {exc}", err=True)
                sys.exit(2)
            if best is None or report.matched > best.matched:
                best = report
        best.sensor_id = sensor_id
        reports.append(best)
    runner.write_restoration_report(reports, Path(report_path))
    click.echo(f"wrote {report_path}")


@main.group(name="analysis")
def analysis_group() -> None:
    """Interference statistics."""


@analysis_group.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--az-bins", type=int, default=0, help="Bin the FOV instead of using beam ids.")
@click.option("--el-bins", type=int, default=0)
def beams(in_path: str, out_path: str | None, az_bins: int, el_bins: int) -> None:
    """Per-beam temporal precision statistics from a point-stream CSV."""
    rows = pointio.read_point_csv(in_path)
    if az_bins and el_bins:
        binned = analysis.bin_fov(
            [(az, el, d, t) for t, _b, az, el, d in rows], az_bins, el_bins
        )
        series = binned.series
    else:
        series = pointio.series_from_rows(rows)
    try:
        stats = analysis.beam_stats(series)
    except analysis.InsufficientDataError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    lines = [
        f"n_beams = {stats.n_beams}",
        f"n_samples_total = {stats.n_samples_total}",
        f"excluded_beams = {stats.excluded_beams}",
        f"mean_of_stds_m = {stats.mean_of_stds:.6f}",
        f"std_of_stds_m = {stats.std_of_stds:.6f}",
    ]
    _emit(lines, out_path)


@analysis_group.command()
@click.option("--in", "sole_path", required=True, type=click.Path(exists=True),
              help="Sole-run PLY; the reference plane is fitted to it.")
@click.option("--points", "coll_path", type=click.Path(exists=True), default=None,
              help="Collective-run PLY evaluated against the same plane.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--plot", "plot_path", type=click.Path(), default=None,
              help="Write an SVG histogram of point-to-plane distances.")
def plane(sole_path: str, coll_path: str | None, out_path: str | None,
          plot_path: str | None) -> None:
    """Fit a reference plane and report point-to-plane accuracy."""
    sole_points = pointio.read_ply(sole_path)
    try:
        fitted = analysis.fit_plane(sole_points)
    except analysis.DegenerateGeometryError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    sole_acc = analysis.plane_accuracy(fitted, sole_points)
    lines = [
        f"normal = {fitted.normal[0]:.6f} {fitted.normal[1]:.6f} {fitted.normal[2]:.6f}",
        f"offset_m = {fitted.offset:.6f}",
        f"sole_mean_m = {sole_acc.mean_distance:.4f}",
        f"sole_std_m = {sole_acc.std_distance:.4f}",
    ]
    distances = fitted.signed_distances(sole_points)
    if coll_path:
        coll_points = pointio.read_ply(coll_path)
        coll_acc = analysis.plane_accuracy(fitted, coll_points)
        verdict = analysis.flag_accuracy_change(sole_acc, coll_acc)
        lines += [
            f"collective_mean_m = {coll_acc.mean_distance:.4f}",
            f"collective_std_m = {coll_acc.std_distance:.4f}",
            f"accuracy_change = {verdict}",
        ]
        distances = fitted.signed_distances(coll_points)
    _emit(lines, out_path)
    if plot_path:
        _plot_histogram(distances, plot_path)


@analysis_group.command()
@click.option("--in", "in_paths", required=True, type=click.Path(exists=True), nargs=2,
              help="Two depth-run binaries (with .meta sidecars): sole, collective.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def pixels(in_paths: tuple[str, str], out_path: str | None) -> None:
    """Pixel-wise distance-difference statistics between two depth runs."""
    run_a = pointio.read_depth_run(in_paths[0])
    run_b = pointio.read_depth_run(in_paths[1])
    try:
        stats = analysis.pixel_diff(run_a, run_b)
    except (ValueError, analysis.InsufficientDataError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    _emit(
        [
            f"mean_diff_m = {stats.mean_diff:.4f}",
            f"std_diff_m = {stats.std_diff:.4f}",
            f"n_valid_pixels = {stats.n_valid_pixels}",
        ],
        out_path,
    )


@analysis_group.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="CSV: name,sole_mean_std,collective_mean_std.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def flags(in_path: str, out_path: str | None) -> None:
    """Interference verdict per sensor from tabulated mean-of-stds pairs."""
    lines = []
    with open(in_path, newline="") as fh:
        for row in csv_mod.reader(fh):
            if not row or row[0].startswith("#") or row[0] == "name":
                continue
            name, sole, coll = row[0], float(row[1]), float(row[2])
            lines.append(f"{name} = {analysis.flag_interference_values(sole, coll)}")
    _emit(lines, out_path)


def _emit(lines: list[str], out_path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        sys.stdout.write(text)


def _plot_histogram(distances, plot_path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(distances, bins=50, color="#4878cf")
    ax.set_xlabel("point-to-plane distance (m)")
    ax.set_ylabel("points")
    fig.tight_layout()
    fig.savefig(plot_path, format="svg")
    plt.close(fig)
    click.echo(f"wrote {plot_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--sim-step", type=float, default=1.0,
              help="Simulated seconds advanced per gateway tick while recording.")
@click.option("--real-step", type=float, default=0.2,
              help="Wall seconds between gateway ticks.")
def serve(config_path: str, host: str, port: int, out_dir: str | None,
          sim_step: float, real_step: float) -> None:
    """Start the master's HTTP/WebSocket gateway for the operator console."""
    import uvicorn

    from .service import create_app

    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    app = create_app(config, out_dir, sim_step_s=sim_step, real_step_s=real_step)
    uvicorn.run(app, host=host, port=port)


@main.group(name="cluster")
def cluster_group() -> None:
    """Thin HTTP client against a running gateway."""


@cluster_group.command()
@click.option("--url", default="http://127.0.0.1:8000")
def status(url: str) -> None:
    """Print the gateway's /status as JSON."""
    import httpx

    try:
        response = httpx.get(f"{url}/status", timeout=10.0)
        response.raise_for_status()
    except httpx.HTTPError as exc:
        click.echo(f"status failed: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(response.json(), indent=2, sort_keys=True))


@cluster_group.command()
@click.option("--url", default="http://127.0.0.1:8000")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--node", type=int, default=None)
@click.option("--sensor", default=None)
def collect(url: str, out_dir: str, node: int | None, sensor: str | None) -> None:
    """Fetch the gateway's chunk index and store it as JSON."""
    import httpx

    params = {}
    if node is not None:
        params["node"] = node
    if sensor is not None:
        params["sensor"] = sensor
    try:
        response = httpx.get(f"{url}/chunks", params=params, timeout=30.0)
        response.raise_for_status()
    except httpx.HTTPError as exc:
        click.echo(f"collect failed: {exc}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = out / "chunk_index.json"
    index.write_text(json.dumps(response.json(), indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {index}")


if __name__ == "__main__":
    main()

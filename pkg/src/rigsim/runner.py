"""Full simulated collection run: lifecycle, recording, artifacts.

Outputs under the run directory, all byte-deterministic for a fixed
config and seed:

    node_XX/<sensor>/chunk_NNNNN.swch   sealed record chunks
    schedule.csv                        every trigger edge of the run
    restoration_report.txt              per-sensor timestamp restoration
    sync_report.txt                     per-node clock verification
    run_summary.json                    counts, bytes, drop ledger
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import sensors, trigger
from .cluster import ClusterSim
from .config import RunConfig
from .postproc import RestorationReport, restore_timestamps


def run_full(config: RunConfig, duration_s: float | None = None,
             out_dir: str | Path | None = None) -> ClusterSim:
    """Drive the whole lifecycle and write all artifacts."""
    duration = config.duration_s if duration_s is None else duration_s
    sim = ClusterSim(config, out_dir)
    sim.out_dir.mkdir(parents=True, exist_ok=True)
    sim.bringup()
    sim.time_sync_phase()
    sim.launch_sensors()
    sim.start_recording("run")
    sim.advance(duration)
    summary = sim.stop_recording()
    sim.finish()

    write_schedule_csv(sim, sim.out_dir / "schedule.csv")
    reports = restoration_reports(sim)
    write_restoration_report(reports, sim.out_dir / "restoration_report.txt")
    write_sync_report(sim, sim.out_dir / "sync_report.txt")

    summary = dict(summary)
    summary["restoration"] = {r.sensor_id: r.as_dict() for r in reports}
    summary["seed"] = config.seed
    summary["duration_s"] = duration
    (sim.out_dir / "run_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    return sim


def run_schedule(sim: ClusterSim) -> list[trigger.TriggerEvent]:
    """Board trigger edges over the recorded window."""
    if sim.record_start is None or sim.record_stop is None:
        return []
    board = trigger.start_stop(sim.board, "start")
    return trigger.board_schedule(board, sim.record_start, sim.record_stop)


def ultrasound_run_schedule(sim: ClusterSim) -> list[trigger.TriggerEvent]:
    n = sum(1 for s in sim.config.sensors if s.kind == sensors.ULTRASOUND)
    if n == 0 or sim.record_start is None or sim.record_stop is None:
        return []
    return trigger.ultrasound_schedule(
        n, sim.config.ultrasound_slot_s, sim.record_start, sim.record_stop
    )


def write_schedule_csv(sim: ClusterSim, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel_id", "time_ns", "edge", "seq"])
        for event in run_schedule(sim):
            writer.writerow([event.channel_id, event.time_ns, event.edge,
                             event.sequence_index])


def restoration_reports(sim: ClusterSim) -> list[RestorationReport]:
    """Restore timestamps for every triggered sensor from its sealed chunks."""
    board_events = run_schedule(sim)
    by_channel: dict[int, list[trigger.TriggerEvent]] = {}
    for event in board_events:
        by_channel.setdefault(event.channel_id, []).append(event)
    us_by_index: dict[int, list[trigger.TriggerEvent]] = {}
    for event in ultrasound_run_schedule(sim):
        us_by_index.setdefault(event.channel_id, []).append(event)

    reports = []
    for cfg in sim.config.sensors:
        if cfg.kind not in sensors.TRIGGERED_KINDS:
            continue
        if cfg.kind == sensors.ULTRASOUND:
            triggers = us_by_index.get(cfg.ultrasound_index, [])
        else:
            triggers = by_channel.get(cfg.channel, [])
        records = []
        for chunk in sim.collect_chunks(sensor_id=cfg.sensor_id):
            records.extend(chunk.records)
        if not triggers:
            reports.append(RestorationReport(sensor_id=cfg.sensor_id,
                                             unmatched_records=len(records)))
            continue
        _, report = restore_timestamps(records, triggers)
        report.sensor_id = cfg.sensor_id
        reports.append(report)
    return reports


def write_restoration_report(reports: list[RestorationReport], path: Path) -> None:
    lines = []
    for report in reports:
        lines.append(f"[sensor {report.sensor_id}]")
        lines.append(f"matched = {report.matched}")
        dropped = ",".join(str(i) for i in report.dropped_trigger_indices)
        lines.append(f"dropped_trigger_indices = {dropped}")
        lines.append(f"max_match_residual_s = {report.max_match_residual_s!r}")
        lines.append(f"unmatched_records = {report.unmatched_records}")
        lines.append("")
    path.write_text("\n".join(lines))


def parse_restoration_report(path: Path) -> dict[str, dict]:
    """Inverse of write_restoration_report, for tooling and tests."""
    result: dict[str, dict] = {}
    current: dict | None = None
    for line in path.read_text().splitlines():
        line = line.strip()
        if line.startswith("[sensor ") and line.endswith("]"):
            current = {}
            result[line[len("[sensor ") : -1]] = current
        elif "=" in line and current is not None:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "dropped_trigger_indices":
                current[key] = [int(v) for v in value.split(",") if v]
            elif key == "max_match_residual_s":
                current[key] = float(value)
            else:
                current[key] = int(value)
    return result


def write_sync_report(sim: ClusterSim, path: Path) -> None:
    lines = []
    for report in sim.sync_reports:
        lines.append(f"[node {report.node_id}]")
        lines.append(f"pre_offset_s = {report.pre_offset_s!r}")
        lines.append(f"post_offset_s = {report.post_offset_s!r}")
        lines.append(f"rounds = {report.rounds}")
        lines.append(f"converged = {str(report.converged).lower()}")
        lines.append("")
    path.write_text("\n".join(lines))

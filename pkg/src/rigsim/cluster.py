"""Master/worker recording cluster: lifecycle state machine, config
distribution over the wire protocol, distributed chunk recording and
status aggregation.

The master owns the lifecycle and talks to workers exclusively through
encoded wire frames, mirroring the network-boot model where workers hold
no local configuration. Workers write their own chunk stores; nothing is
shared between workers during a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

from . import nmea, sensors, timebase, trigger, wire
from .chunks import ChunkStore, RecordChunk, read_chunk_file
from .config import NodeConfig, RunConfig, SensorConfig

POWERED_OFF = "PoweredOff"
MASTER_UP = "MasterUp"
CLUSTER_UP = "ClusterUp"
TIME_SYNCED = "TimeSynced"
SENSORS_UP = "SensorsUp"
RECORDING = "Recording"
FINISHED = "Finished"

PHASE_ORDER = [POWERED_OFF, MASTER_UP, CLUSTER_UP, TIME_SYNCED, SENSORS_UP, RECORDING, FINISHED]

# Legal transitions; Recording -> SensorsUp supports repeated runs without
# respawning sensor drivers.
TRANSITIONS = {
    POWERED_OFF: {MASTER_UP},
    MASTER_UP: {CLUSTER_UP},
    CLUSTER_UP: {TIME_SYNCED},
    TIME_SYNCED: {SENSORS_UP},
    SENSORS_UP: {RECORDING, FINISHED},
    RECORDING: {SENSORS_UP},
    FINISHED: set(),
}


class LifecycleError(RuntimeError):
    """Operation not legal in the current lifecycle phase."""


class BringupError(RuntimeError):
    """Cluster bringup failed validation or registration."""


class SyncBlockedError(RuntimeError):
    """One or more nodes failed to converge below the offset bound."""


class StartRejectedError(RuntimeError):
    """A worker NACKed START_REC; the start was rolled back."""


@dataclass
class RunLifecycle:
    phase: str = POWERED_OFF
    transitions: list[tuple[str, float]] = field(default_factory=list)

    def advance(self, phase: str, now: float) -> None:
        if phase not in TRANSITIONS[self.phase]:
            raise LifecycleError(f"cannot go {self.phase} -> {phase}")
        self.phase = phase
        self.transitions.append((phase, now))


@dataclass
class SyncReport:
    """Per-node result of the time-sync phase.

    pre_offset_s is the first two-way measurement; post_offset_s is the
    node's actual residual clock error relative to the master after the
    servo rounds. The two differ when link delays are asymmetric: the
    exchange cannot see the (d1-d2)/2 bias, but the simulation can.
    """

    node_id: int
    pre_offset_s: float
    post_offset_s: float
    rounds: int
    converged: bool


class Worker:
    """One worker node: sensors, chunk stores and a frame handler."""

    def __init__(self, node: NodeConfig, out_root: Path):
        self.node = node
        self.clock = node.clock
        self.out_root = out_root
        self.config_blob: bytes | None = None
        self.sensor_configs: list[SensorConfig] = []
        self.sensors: dict[str, sensors.SensorModel] = {}
        self.stores: dict[str, ChunkStore] = {}
        self.recording = False
        self.degraded = False

    @property
    def node_dir(self) -> Path:
        return self.out_root / f"node_{self.node.node_id:02d}"

    def storage_used(self) -> int:
        return sum(s.total_bytes for s in self.stores.values())

    def handle(self, frame: bytes) -> bytes:
        msg = wire.decode_frame(frame)
        reply = self._dispatch(msg, frame)
        return wire.encode_frame(reply)

    def _dispatch(self, msg: wire.WireMessage, frame: bytes) -> wire.WireMessage:
        nid = self.node.node_id
        if msg.type == wire.HELLO:
            return wire.WireMessage(wire.STATUS, nid, {"hello": nid})
        if msg.type == wire.CONFIG:
            self.config_blob = frame[wire.HEADER.size :]
            return wire.WireMessage(wire.STATUS, nid, {"config_ack": True})
        if msg.type == wire.LAUNCH:
            self._launch()
            return wire.WireMessage(
                wire.STATUS, nid, {"sensors": sorted(self.sensors)}
            )
        if msg.type == wire.START_REC:
            ok = self._start_recording()
            return wire.WireMessage(wire.STATUS, nid, {"ack": ok})
        if msg.type == wire.STOP_REC:
            summary = self._stop_recording()
            return wire.WireMessage(wire.SUMMARY, nid, summary)
        if msg.type == wire.STATUS_REQ:
            return wire.WireMessage(wire.STATUS, nid, self.heartbeat())
        raise wire.FramingError(f"worker cannot handle {msg.type_name}")

    def _launch(self) -> None:
        self.sensors = {}
        for cfg in self.sensor_configs:
            channel = cfg.channel
            if cfg.kind == sensors.ULTRASOUND:
                channel = cfg.ultrasound_index
            self.sensors[cfg.sensor_id] = sensors.SensorModel(
                sensor_id=cfg.sensor_id,
                kind=cfg.kind,
                clock=cfg.clock,
                trigger_channel=channel,
                drop_probability=cfg.drop_probability,
                report_jitter_sd=cfg.report_jitter_sd,
                payload_size_bytes=cfg.payload_size_bytes,
                rate_hz=cfg.rate_hz,
            )

    def _start_recording(self) -> bool:
        if self.storage_used() >= self.node.storage_capacity_bytes:
            return False
        self.stores = {
            sid: ChunkStore(self.node.node_id, sid, self.node_dir / sid)
            for sid in self.sensors
        }
        self.recording = True
        return True

    def _stop_recording(self) -> dict:
        self.recording = False
        per_sensor = {}
        for sid in sorted(self.stores):
            store = self.stores[sid]
            store.seal()
            per_sensor[sid] = {
                "records": store.total_records,
                "bytes": store.total_bytes,
                "chunks": len(store.sealed_paths),
            }
        return {"node_id": self.node.node_id, "sensors": per_sensor}

    def heartbeat(self) -> dict:
        return {
            "node_id": self.node.node_id,
            "storage_used": self.storage_used(),
            "storage_capacity": self.node.storage_capacity_bytes,
            "recording": self.recording,
            "degraded": self.degraded,
            "sensors": {
                sid: {
                    "kind": m.kind,
                    "records": m.emitted_count,
                    "faults": m.fault_count,
                }
                for sid, m in sorted(self.sensors.items())
            },
        }

    def append_record(self, record: sensors.SensorRecord) -> None:
        self.stores[record.sensor_id].append(record)


class ClusterSim:
    """Deterministic simulation of the whole recording cluster."""

    def __init__(self, config: RunConfig, out_dir: str | Path | None = None):
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output_dir)
        self.now = 0.0
        self.lifecycle = RunLifecycle()
        self.board = config.syncboard
        self.master_clock = config.master().clock
        self.workers: dict[int, Worker] = {}
        self.sync_reports: list[SyncReport] = []
        self.drop_ledger: dict[str, list[int]] = {}
        self.events: list[dict] = []
        self.record_start: float | None = None
        self.record_stop: float | None = None
        self.last_summary: dict | None = None
        self.run_label = ""

    # -- helpers -------------------------------------------------------

    def _log(self, kind: str, **data) -> None:
        self.events.append({"event": kind, "time": self.now, **data})

    def _phase(self, phase: str) -> None:
        self.lifecycle.advance(phase, self.now)
        self._log("phase", phase=phase)

    def _sensor_owner(self, sensor_id: str) -> Worker:
        for worker in self.workers.values():
            if sensor_id in worker.sensors:
                return worker
        raise KeyError(sensor_id)

    # -- lifecycle operations -------------------------------------------

    def bringup(self) -> RunLifecycle:
        if self.lifecycle.phase != POWERED_OFF:
            raise LifecycleError(f"bringup from {self.lifecycle.phase}")
        self._phase(MASTER_UP)
        config_frame = wire.encode_frame(
            wire.WireMessage(wire.CONFIG, self.config.master().node_id,
                             _config_payload(self.config))
        )
        canonical_blob = config_frame[wire.HEADER.size :]
        for node in self.config.workers():
            worker = Worker(node, self.out_dir)
            hello = wire.encode_frame(
                wire.WireMessage(wire.HELLO, node.node_id, {"boot": "network"})
            )
            reply = wire.decode_frame(worker.handle(hello))
            if reply.payload.get("hello") != node.node_id:
                raise BringupError(f"node {node.node_id} failed registration")
            worker.handle(config_frame)
            if worker.config_blob != canonical_blob:
                raise BringupError(f"node {node.node_id} holds a diverged config")
            worker.sensor_configs = self.config.sensors_on(node.node_id)
            self.workers[node.node_id] = worker
        self._phase(CLUSTER_UP)
        return self.lifecycle

    def time_sync_phase(self) -> list[SyncReport]:
        if self.lifecycle.phase != CLUSTER_UP:
            raise LifecycleError(f"time sync from {self.lifecycle.phase}")
        self.sync_reports = []
        blocked = []
        for node_id in sorted(self.workers):
            worker = self.workers[node_id]
            measure = lambda: timebase.estimate_offset_delay(
                timebase.simulate_exchange(
                    self.master_clock,
                    worker.clock,
                    self.now,
                    worker.node.link_delay_to_worker_s,
                    worker.node.link_delay_to_master_s,
                )
            )[0]
            residual = lambda: (
                worker.clock.device_time(self.now)
                - self.master_clock.device_time(self.now)
            )
            bound = self.config.sync_offset_bound_s
            pre = measure()
            offset = pre
            rounds = 0

            def converged_now() -> bool:
                return abs(offset) < bound and abs(residual()) < bound

            while not converged_now() and rounds < self.config.sync_max_rounds:
                worker.clock = timebase.discipline(worker.clock, offset)
                rounds += 1
                offset = measure()
            converged = converged_now()
            report = SyncReport(node_id, pre, residual(), rounds, converged)
            self.sync_reports.append(report)
            if not converged:
                blocked.append(node_id)
        if blocked:
            raise SyncBlockedError(f"nodes failed to converge: {blocked}")
        self._phase(TIME_SYNCED)
        return self.sync_reports

    def launch_sensors(self) -> RunLifecycle:
        if self.lifecycle.phase != TIME_SYNCED:
            raise LifecycleError(f"launch from {self.lifecycle.phase}")
        for node_id in sorted(self.workers):
            frame = wire.encode_frame(wire.WireMessage(wire.LAUNCH, node_id, {}))
            self.workers[node_id].handle(frame)
        self._phase(SENSORS_UP)
        return self.lifecycle

    def start_recording(self, run_label: str = "") -> RunLifecycle:
        if self.lifecycle.phase != SENSORS_UP:
            raise LifecycleError(f"start from {self.lifecycle.phase}")
        acks: dict[int, bool] = {}
        for node_id in sorted(self.workers):
            frame = wire.encode_frame(
                wire.WireMessage(wire.START_REC, node_id, {"label": run_label})
            )
            reply = wire.decode_frame(self.workers[node_id].handle(frame))
            acks[node_id] = bool(reply.payload.get("ack"))
        if not all(acks.values()):
            # All-or-nothing: roll everyone back.
            for node_id in sorted(self.workers):
                frame = wire.encode_frame(wire.WireMessage(wire.STOP_REC, node_id, {}))
                self.workers[node_id].handle(frame)
            bad = sorted(n for n, ok in acks.items() if not ok)
            raise StartRejectedError(f"workers {bad} rejected START_REC")
        self.run_label = run_label
        # START_REC delivered to every worker strictly before the board starts.
        self.board = trigger.start_stop(self.board, "start")
        self.record_start = self.now
        self.record_stop = None
        self.drop_ledger = {}
        self._phase(RECORDING)
        return self.lifecycle

    def advance(self, duration: float) -> None:
        """Simulate [now, now + duration) of recording."""
        if self.lifecycle.phase != RECORDING:
            raise LifecycleError(f"advance from {self.lifecycle.phase}")
        if duration < 0.0:
            raise ValueError("duration must be >= 0")
        t0, t1 = self.now, self.now + duration
        if duration > 0.0:
            self._deliver_triggers(t0, t1)
            self._run_free_running(t0, t1)
        self.now = t1

    def _deliver_triggers(self, t0: float, t1: float) -> None:
        seed = self.config.seed
        assert self.record_start is not None
        # Rebase per-window sequence indices onto the run-global schedule so
        # drop decisions and the drop ledger are invariant under how the
        # recording window is chopped into advance() calls.
        base_by_channel: dict[int, int] = {}
        events_by_channel: dict[int, list[trigger.TriggerEvent]] = {}
        for event in trigger.board_schedule(self.board, t0, t1):
            base = base_by_channel.get(event.channel_id)
            if base is None:
                base = self._base_index_for_channel(event.channel_id, t0)
                base_by_channel[event.channel_id] = base
            event = replace(event, sequence_index=event.sequence_index + base)
            events_by_channel.setdefault(event.channel_id, []).append(event)
        us_sensors = sorted(
            (s for w in self.workers.values() for s in w.sensors.values()
             if s.kind == sensors.ULTRASOUND),
            key=lambda m: m.trigger_channel,
        )
        us_events: dict[int, list[trigger.TriggerEvent]] = {}
        if us_sensors:
            # The slot grid is anchored at the recording start, so regenerate
            # from there and keep only this window's slots.
            window_start_ns = trigger.seconds_to_ns(t0)
            for event in trigger.ultrasound_schedule(
                len(us_sensors), self.config.ultrasound_slot_s, self.record_start, t1
            ):
                if event.time_ns >= window_start_ns:
                    us_events.setdefault(event.channel_id, []).append(event)
        for node_id in sorted(self.workers):
            worker = self.workers[node_id]
            for sid in sorted(worker.sensors):
                model = worker.sensors[sid]
                if model.kind == sensors.EVENT_CAMERA:
                    for event in events_by_channel.get(model.trigger_channel, []):
                        ext = sensors.perceive_ext_trigger(model, event)
                        record = sensors.SensorRecord(
                            sensor_id=sid,
                            sequence_index=model.emitted_count,
                            device_timestamp=ext.device_timestamp_us / 1e6,
                            payload_digest=sensors.payload_digest(
                                sid, model.emitted_count, ext.device_timestamp_us
                            ),
                            payload_size_bytes=model.payload_size_bytes,
                        )
                        model.emitted_count += 1
                        worker.append_record(record)
                elif model.kind in (sensors.TRIGGERED_CAMERA, sensors.DEPTH_CAMERA) and (
                    model.trigger_channel is not None
                ):
                    for event in events_by_channel.get(model.trigger_channel, []):
                        record = sensors.fire_triggered_camera(model, event, seed)
                        if record is None:
                            self.drop_ledger.setdefault(sid, []).append(
                                event.sequence_index
                            )
                            self._log("drop", sensor=sid,
                                      trigger_index=event.sequence_index)
                        else:
                            worker.append_record(record)
                elif model.kind == sensors.ULTRASOUND:
                    for event in us_events.get(model.trigger_channel, []):
                        record = sensors.fire_triggered_camera(model, event, seed)
                        if record is not None:
                            worker.append_record(record)

    def _base_index_for_channel(self, channel_id: int, t0: float) -> int:
        """Number of edges the channel emitted between the recording start
        and the current window, i.e. the run-global index of window edge 0."""
        assert self.record_start is not None
        if t0 <= self.record_start:
            return 0
        cfg = self.board.channel(channel_id)
        return len(trigger.generate_schedule(cfg, self.record_start, t0))

    def _run_free_running(self, t0: float, t1: float) -> None:
        for node_id in sorted(self.workers):
            worker = self.workers[node_id]
            for sid in sorted(worker.sensors):
                model = worker.sensors[sid]
                if model.kind == sensors.LIDAR:
                    self._run_lidar(worker, model, t0, t1)
                elif model.kind in (sensors.IMU, sensors.DEPTH_CAMERA) and (
                    model.trigger_channel is None
                ):
                    for record in sensors.free_run(model, model.rate_hz, t0, t1):
                        worker.append_record(record)

    def _run_lidar(self, worker: Worker, model: sensors.SensorModel,
                   t0: float, t1: float) -> None:
        # Discipline from GPRMC+PPS at each second boundary, then sample.
        cursor = t0
        while cursor < t1:
            boundary = math.floor(cursor)
            if boundary == cursor:
                pulse, sentence, _, _ = nmea.emit_time_message(
                    self.board.lidar_channel, int(boundary)
                )
                sensors.discipline_lidar(model, pulse, sentence)
            next_cut = min(t1, math.floor(cursor) + 1.0)
            for record in sensors.free_run(model, model.rate_hz, cursor, next_cut):
                worker.append_record(record)
            cursor = next_cut

    def stop_recording(self) -> dict:
        if self.lifecycle.phase != RECORDING:
            raise LifecycleError(f"stop from {self.lifecycle.phase}")
        # Triggering stops strictly before STOP_REC dispatch.
        self.board = trigger.start_stop(self.board, "stop")
        self.record_stop = self.now
        summary: dict = {"label": self.run_label, "nodes": {}, "sensors": {}}
        for node_id in sorted(self.workers):
            worker = self.workers[node_id]
            frame = wire.encode_frame(wire.WireMessage(wire.STOP_REC, node_id, {}))
            try:
                reply = wire.decode_frame(worker.handle(frame))
            except OSError:
                worker.degraded = True
                summary["nodes"][str(node_id)] = {"degraded": True}
                continue
            summary["nodes"][str(node_id)] = reply.payload
            for sid, stats in reply.payload["sensors"].items():
                summary["sensors"][sid] = stats
        summary["record_window"] = [self.record_start, self.record_stop]
        summary["drops"] = {k: list(v) for k, v in sorted(self.drop_ledger.items())}
        self.last_summary = summary
        self._phase(SENSORS_UP)
        self._log("summary", summary=summary)
        return summary

    def finish(self) -> RunLifecycle:
        if self.lifecycle.phase != SENSORS_UP:
            raise LifecycleError(f"finish from {self.lifecycle.phase}")
        self._phase(FINISHED)
        return self.lifecycle

    # -- queries ---------------------------------------------------------

    def collect_chunks(
        self, node_id: int | None = None, sensor_id: str | None = None
    ) -> Iterator[RecordChunk]:
        """Stream sealed chunks with verified checksums; corrupt ones are
        flagged, never silently skipped."""
        if self.lifecycle.phase == RECORDING:
            raise LifecycleError("cannot export sealed chunks while recording")
        for nid in sorted(self.workers):
            if node_id is not None and nid != node_id:
                continue
            node_dir = self.workers[nid].node_dir
            if not node_dir.is_dir():
                continue
            for path in sorted(node_dir.rglob("*.swch")):
                chunk = read_chunk_file(path)
                if sensor_id is not None and chunk.sensor_id != sensor_id:
                    continue
                yield chunk

    def status(self) -> dict:
        return {
            "phase": self.lifecycle.phase,
            "sim_time": self.now,
            "trigger_running": self.board.running,
            "record_window": [self.record_start, self.record_stop],
            "nodes": [self.workers[n].heartbeat() for n in sorted(self.workers)],
            "sync_reports": [
                {
                    "node_id": r.node_id,
                    "pre_offset_s": r.pre_offset_s,
                    "post_offset_s": r.post_offset_s,
                    "rounds": r.rounds,
                    "converged": r.converged,
                }
                for r in self.sync_reports
            ],
            "drops": {k: list(v) for k, v in sorted(self.drop_ledger.items())},
        }


def _config_payload(config: RunConfig) -> dict:
    """Canonical JSON-able image of the run config for CONFIG frames."""
    return {
        "seed": config.seed,
        "duration_s": config.duration_s,
        "ultrasound_slot_s": config.ultrasound_slot_s,
        "channels": [
            {
                "channel_id": c.channel_id,
                "frequency_hz": c.frequency_hz,
                "polarity": c.polarity,
                "offset_s": c.offset_s,
                "duty_ratio": c.duty_ratio,
                "voltage": c.voltage,
                "vacancies": c.vacancies,
            }
            for c in config.syncboard.channels
        ],
        "sensors": [
            {
                "sensor_id": s.sensor_id,
                "kind": s.kind,
                "node": s.node,
                "channel": s.channel,
                "ultrasound_index": s.ultrasound_index,
                "rate_hz": s.rate_hz,
                "drop_probability": s.drop_probability,
                "payload_size_bytes": s.payload_size_bytes,
            }
            for s in config.sensors
        ],
    }

"""Run configuration: the single YAML file describing a collection run.

Schema (all times in seconds unless suffixed otherwise)::

    seed: 42
    duration_s: 10.0
    output_dir: out
    syncboard:
      external_master: gnss          # gnss | ntp | freerun
      lidar_channel: {baud_rate: 9600, sentence_offset_ms: 1.0, inverted_level: false}
      channels:
        - {channel_id: 0, frequency_hz: 10.0, polarity: rising,
           offset_s: 0.0, duty_ratio: 0.5, voltage: 3.3, vacancies: 12}
    ultrasound: {slot_s: 0.05}        # interleave slot for ultrasound sensors
    nodes:
      - {node_id: 0, role: master}
      - {node_id: 1, role: worker, storage_capacity_bytes: 2000000000000,
         link_delay_ms: [1.0, 1.0],   # to-worker, to-master
         clock: {offset_s: 0.1, drift_ppm: 10.0, read_jitter_sd: 0.0}}
    sensors:
      - {sensor_id: cam00, kind: triggered_camera, node: 1, channel: 0,
         drop_probability: 0.0, payload_size_bytes: 512,
         clock: {offset_s: 0.0, drift_ppm: 0.0}}
      - {sensor_id: us00, kind: ultrasound, node: 2, ultrasound_index: 0}
      - {sensor_id: imu0, kind: imu, node: 3, rate_hz: 400.0}
      - {sensor_id: lidar0, kind: lidar, node: 4, rate_hz: 10.0,
         clock: {offset_s: 0.3}}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import sensors as sensors_mod
from .nmea import LidarChannelConfig
from .timebase import ClockState
from .trigger import SyncboardState, TriggerChannelConfig, min_ultrasound_slot_s

MAX_NODES = 16
MAX_SENSORS_PER_WORKER = 4
MAX_USB_PER_WORKER = 3
MAX_ETHERNET_PER_WORKER = 1
DEFAULT_STORAGE_BYTES = 2 * 10**12  # 2 TB SSD per node


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass
class NodeConfig:
    node_id: int
    role: str
    storage_capacity_bytes: int = DEFAULT_STORAGE_BYTES
    link_delay_to_worker_s: float = 0.001
    link_delay_to_master_s: float = 0.001
    clock: ClockState = field(default_factory=ClockState)


@dataclass
class SensorConfig:
    sensor_id: str
    kind: str
    node: int
    channel: int | None = None
    ultrasound_index: int | None = None
    rate_hz: float = 0.0
    drop_probability: float = 0.0
    report_jitter_sd: float = 0.0
    payload_size_bytes: int = 0
    clock: ClockState = field(default_factory=ClockState)


@dataclass
class RunConfig:
    seed: int
    duration_s: float
    output_dir: str
    syncboard: SyncboardState
    nodes: list[NodeConfig]
    sensors: list[SensorConfig]
    ultrasound_slot_s: float = 0.05
    sync_offset_bound_s: float = 1e-3
    sync_max_rounds: int = 10

    def master(self) -> NodeConfig:
        return next(n for n in self.nodes if n.role == "master")

    def workers(self) -> list[NodeConfig]:
        return [n for n in self.nodes if n.role == "worker"]

    def sensors_on(self, node_id: int) -> list[SensorConfig]:
        return [s for s in self.sensors if s.node == node_id]


def _clock_from(raw: dict) -> ClockState:
    return ClockState(
        true_epoch_offset=float(raw.get("offset_s", 0.0)),
        drift_ppm=float(raw.get("drift_ppm", 0.0)),
        read_jitter_sd=float(raw.get("read_jitter_sd", 0.0)),
    )


def load_config(path: str | Path) -> RunConfig:
    """Load and validate; raises ConfigError when any diagnostic is an error."""
    raw = yaml.safe_load(Path(path).read_text())
    config, diagnostics = parse_config(raw)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors or config is None:
        raise ConfigError(errors or diagnostics)
    return config


def validate_config(path: str | Path) -> list[Diagnostic]:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        return [Diagnostic("error", str(path), f"not valid YAML: {exc}")]
    _, diagnostics = parse_config(raw)
    return diagnostics


def parse_config(raw: dict) -> tuple[RunConfig | None, list[Diagnostic]]:
    diags: list[Diagnostic] = []

    def err(location: str, message: str) -> None:
        diags.append(Diagnostic("error", location, message))

    if not isinstance(raw, dict):
        err("<root>", "config must be a mapping")
        return None, diags

    board_raw = raw.get("syncboard", {})
    channels = []
    for i, ch in enumerate(board_raw.get("channels", [])):
        try:
            channels.append(
                TriggerChannelConfig(
                    channel_id=int(ch["channel_id"]),
                    frequency_hz=float(ch["frequency_hz"]),
                    polarity=ch.get("polarity", "rising"),
                    offset_s=float(ch.get("offset_s", 0.0)),
                    duty_ratio=float(ch.get("duty_ratio", 0.5)),
                    voltage=float(ch.get("voltage", 3.3)),
                    vacancies=int(ch.get("vacancies", 6)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            err(f"syncboard.channels[{i}]", str(exc))
    lc_raw = board_raw.get("lidar_channel", {})
    try:
        lidar_channel = LidarChannelConfig(
            baud_rate=int(lc_raw.get("baud_rate", 9600)),
            inverted_level=bool(lc_raw.get("inverted_level", False)),
            sentence_offset_ms=float(lc_raw.get("sentence_offset_ms", 0.0)),
        )
    except ValueError as exc:
        err("syncboard.lidar_channel", str(exc))
        lidar_channel = LidarChannelConfig()
    try:
        board = SyncboardState(
            channels=channels,
            lidar_channel=lidar_channel,
            external_master=board_raw.get("external_master", "gnss"),
        )
    except ValueError as exc:
        err("syncboard", str(exc))
        board = SyncboardState()

    nodes: list[NodeConfig] = []
    for i, nd in enumerate(raw.get("nodes", [])):
        loc = f"nodes[{i}]"
        try:
            delays = nd.get("link_delay_ms", [1.0, 1.0])
            nodes.append(
                NodeConfig(
                    node_id=int(nd["node_id"]),
                    role=nd.get("role", "worker"),
                    storage_capacity_bytes=int(
                        nd.get("storage_capacity_bytes", DEFAULT_STORAGE_BYTES)
                    ),
                    link_delay_to_worker_s=float(delays[0]) / 1000.0,
                    link_delay_to_master_s=float(delays[1]) / 1000.0,
                    clock=_clock_from(nd.get("clock", {})),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            err(loc, str(exc))
    if len(nodes) > MAX_NODES:
        err("nodes", f"{len(nodes)} nodes exceed the {MAX_NODES}-node cluster")
    node_ids = [n.node_id for n in nodes]
    if len(set(node_ids)) != len(node_ids):
        err("nodes", "duplicate node_id")
    masters = [n for n in nodes if n.role == "master"]
    if len(masters) != 1:
        err("nodes", f"exactly one master required, found {len(masters)}")
    for n in nodes:
        if n.role not in ("master", "worker"):
            err(f"nodes[{node_ids.index(n.node_id)}]", f"bad role {n.role!r}")
        if not 0 <= n.node_id < MAX_NODES:
            err("nodes", f"node_id {n.node_id} must be 0..{MAX_NODES - 1}")

    sensor_list: list[SensorConfig] = []
    channel_ids = {c.channel_id for c in channels}
    for i, sd in enumerate(raw.get("sensors", [])):
        loc = f"sensors[{i}]"
        try:
            cfg = SensorConfig(
                sensor_id=str(sd["sensor_id"]),
                kind=str(sd["kind"]),
                node=int(sd["node"]),
                channel=None if sd.get("channel") is None else int(sd["channel"]),
                ultrasound_index=(
                    None
                    if sd.get("ultrasound_index") is None
                    else int(sd["ultrasound_index"])
                ),
                rate_hz=float(sd.get("rate_hz", 0.0)),
                drop_probability=float(sd.get("drop_probability", 0.0)),
                report_jitter_sd=float(sd.get("report_jitter_sd", 0.0)),
                payload_size_bytes=int(sd.get("payload_size_bytes", 0)),
                clock=_clock_from(sd.get("clock", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            err(loc, str(exc))
            continue
        if cfg.kind not in sensors_mod.KINDS:
            err(loc, f"unknown sensor kind {cfg.kind!r}")
            continue
        if cfg.kind == sensors_mod.ULTRASOUND:
            if cfg.ultrasound_index is None:
                err(loc, "ultrasound sensor needs an ultrasound_index")
        elif cfg.kind in sensors_mod.TRIGGERED_KINDS:
            if cfg.channel is None:
                err(loc, f"{cfg.kind} needs a trigger channel")
            elif cfg.channel not in channel_ids:
                err(loc, f"unknown channel {cfg.channel}")
        elif cfg.rate_hz <= 0.0:
            err(loc, f"{cfg.kind} needs a positive rate_hz")
        if cfg.node not in node_ids:
            err(loc, f"unknown node {cfg.node}")
        sensor_list.append(cfg)

    ids = [s.sensor_id for s in sensor_list]
    if len(set(ids)) != len(ids):
        err("sensors", "duplicate sensor_id")
    us_indices = [
        s.ultrasound_index
        for s in sensor_list
        if s.kind == sensors_mod.ULTRASOUND and s.ultrasound_index is not None
    ]
    if len(set(us_indices)) != len(us_indices):
        err("sensors", "duplicate ultrasound_index")

    master_ids = {n.node_id for n in masters}
    for n in nodes:
        assigned = [s for s in sensor_list if s.node == n.node_id]
        loc = f"nodes[node_id={n.node_id}]"
        if n.node_id in master_ids and assigned:
            err(loc, "master node records no sensors")
        if len(assigned) > MAX_SENSORS_PER_WORKER:
            err(loc, f"{len(assigned)} sensors exceed the limit of {MAX_SENSORS_PER_WORKER}")
        eth = sum(1 for s in assigned if s.kind in sensors_mod.ETHERNET_KINDS)
        usb = len(assigned) - eth
        if eth > MAX_ETHERNET_PER_WORKER:
            err(loc, f"{eth} ethernet-class sensors exceed the limit of {MAX_ETHERNET_PER_WORKER}")
        if usb > MAX_USB_PER_WORKER:
            err(loc, f"{usb} usb-class sensors exceed the limit of {MAX_USB_PER_WORKER}")

    us_raw = raw.get("ultrasound", {})
    slot_s = float(us_raw.get("slot_s", 0.05))
    if us_indices and slot_s < min_ultrasound_slot_s():
        err("ultrasound.slot_s", f"slot below the {min_ultrasound_slot_s():.4f} s acoustic bound")

    try:
        seed = int(raw.get("seed", 0))
        duration = float(raw.get("duration_s", 0.0))
    except (TypeError, ValueError) as exc:
        err("<root>", str(exc))
        return None, diags
    if duration < 0.0:
        err("duration_s", "must be >= 0")

    config = RunConfig(
        seed=seed,
        duration_s=duration,
        output_dir=str(raw.get("output_dir", "out")),
        syncboard=board,
        nodes=nodes,
        sensors=sensor_list,
        ultrasound_slot_s=slot_s,
        sync_offset_bound_s=float(raw.get("sync_offset_bound_s", 1e-3)),
        sync_max_rounds=int(raw.get("sync_max_rounds", 10)),
    )
    return config, diags

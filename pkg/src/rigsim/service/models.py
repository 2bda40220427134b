"""Pydantic request/response models of the gateway API."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel


class SensorStatus(BaseModel):
    kind: str
    records: int
    faults: int


class NodeStatus(BaseModel):
    node_id: int
    storage_used: int
    storage_capacity: int
    recording: bool
    degraded: bool
    sensors: dict[str, SensorStatus]


class SyncReportModel(BaseModel):
    node_id: int
    pre_offset_s: float
    post_offset_s: float
    rounds: int
    converged: bool


class StatusResponse(BaseModel):
    phase: str
    sim_time: float
    trigger_running: bool
    record_window: list[float | None]
    nodes: list[NodeStatus]
    sync_reports: list[SyncReportModel]
    drops: dict[str, list[int]]
    transitions: list[tuple[str, float]]


class LifecycleResponse(BaseModel):
    ok: bool
    phase: str
    detail: str = ""


class ChunkInfo(BaseModel):
    node_id: int
    sensor_id: str
    chunk_index: int
    records: int
    byte_length: int
    corrupt: bool


class ChunksResponse(BaseModel):
    chunks: list[ChunkInfo]


class NmeaEncodeRequest(BaseModel):
    fields: dict[str, Any]


class NmeaEncodeResponse(BaseModel):
    sentence: str


class NmeaDecodeRequest(BaseModel):
    sentence: str


class NmeaDecodeResponse(BaseModel):
    fields: dict[str, Any]


class ScheduleRequest(BaseModel):
    channel_id: int
    t_start: float
    t_end: float


class ScheduleEvent(BaseModel):
    channel_id: int
    time_ns: int
    edge: str
    seq: int


class ScheduleResponse(BaseModel):
    events: list[ScheduleEvent]

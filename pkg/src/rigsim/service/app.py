"""HTTP + WebSocket gateway in front of the cluster simulation.

The gateway owns one ClusterSim and translates lifecycle commands and
status queries for the operator console and scripting. While recording,
a background task advances simulated time and pushes heartbeats, phase
changes, per-sensor record counts and frame-drop alerts to every
/events subscriber.
"""

from __future__ import annotations

import asyncio
import dataclasses
from contextlib import suppress
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .. import nmea, trigger
from ..cluster import (
    ClusterSim,
    LifecycleError,
    StartRejectedError,
    SyncBlockedError,
)
from ..config import RunConfig, load_config
from . import models

HEARTBEAT_PERIOD_S = 1.0  # simulated seconds between heartbeat pushes


class Gateway:
    """Serializes access to the simulation and fans events out."""

    def __init__(self, config: RunConfig, out_dir: str | Path | None = None,
                 sim_step_s: float = 1.0, real_step_s: float = 0.2):
        self.config = config
        self.sim = ClusterSim(config, out_dir)
        self.sim_step_s = sim_step_s
        self.real_step_s = real_step_s
        self.lock = asyncio.Lock()
        self.subscribers: list[asyncio.Queue] = []
        self._events_consumed = 0
        self._record_task: asyncio.Task | None = None

    def _publish(self, event: dict) -> None:
        for queue in list(self.subscribers):
            queue.put_nowait(event)

    def _drain_sim_events(self) -> None:
        for event in self.sim.events[self._events_consumed :]:
            self._publish(event)
        self._events_consumed = len(self.sim.events)

    def subscribe(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self.subscribers.append(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        with suppress(ValueError):
            self.subscribers.remove(queue)

    async def lifecycle(self, action: str) -> models.LifecycleResponse:
        async with self.lock:
            try:
                if action == "bringup":
                    self.sim.bringup()
                elif action == "sync":
                    self.sim.time_sync_phase()
                elif action == "launch":
                    self.sim.launch_sensors()
                elif action == "start":
                    self.sim.start_recording("gateway")
                    self._record_task = asyncio.ensure_future(self._record_loop())
                elif action == "stop":
                    if self._record_task is not None:
                        self._record_task.cancel()
                        with suppress(asyncio.CancelledError):
                            await self._record_task
                        self._record_task = None
                    self.sim.stop_recording()
                else:
                    raise HTTPException(404, f"unknown lifecycle action {action!r}")
            except (LifecycleError, SyncBlockedError, StartRejectedError) as exc:
                self._drain_sim_events()
                raise HTTPException(409, str(exc)) from None
            self._drain_sim_events()
            return models.LifecycleResponse(ok=True, phase=self.sim.lifecycle.phase)

    async def _record_loop(self) -> None:
        while True:
            await asyncio.sleep(self.real_step_s)
            async with self.lock:
                if self.sim.lifecycle.phase != "Recording":
                    return
                self.sim.advance(self.sim_step_s)
                self._drain_sim_events()
                status = self.sim.status()
                for node in status["nodes"]:
                    self._publish({"event": "heartbeat", "time": self.sim.now,
                                   "node": node})
                self._publish({
                    "event": "counts",
                    "time": self.sim.now,
                    "sensors": {
                        sid: info["records"]
                        for node in status["nodes"]
                        for sid, info in node["sensors"].items()
                    },
                })

    def status(self) -> models.StatusResponse:
        raw = self.sim.status()
        raw["transitions"] = list(self.sim.lifecycle.transitions)
        return models.StatusResponse(**raw)


def create_app(config: RunConfig | str | Path,
               out_dir: str | Path | None = None,
               sim_step_s: float = 1.0,
               real_step_s: float = 0.2) -> FastAPI:
    if not isinstance(config, RunConfig):
        config = load_config(config)
    app = FastAPI(title="rigsim gateway")
    gateway = Gateway(config, out_dir, sim_step_s, real_step_s)
    app.state.gateway = gateway

    @app.get("/status", response_model=models.StatusResponse)
    def get_status():
        return gateway.status()

    @app.get("/nodes", response_model=list[models.NodeStatus])
    def get_nodes():
        return gateway.status().nodes

    @app.post("/lifecycle/{action}", response_model=models.LifecycleResponse)
    async def post_lifecycle(action: str):
        return await gateway.lifecycle(action)

    @app.get("/chunks", response_model=models.ChunksResponse)
    def get_chunks(node: int | None = None, sensor: str | None = None):
        try:
            chunks = [
                models.ChunkInfo(
                    node_id=c.node_id,
                    sensor_id=c.sensor_id,
                    chunk_index=c.chunk_index,
                    records=len(c.records),
                    byte_length=c.byte_length,
                    corrupt=c.corrupt,
                )
                for c in gateway.sim.collect_chunks(node, sensor)
            ]
        except LifecycleError as exc:
            raise HTTPException(409, str(exc)) from None
        return models.ChunksResponse(chunks=chunks)

    @app.post("/nmea/encode", response_model=models.NmeaEncodeResponse)
    def post_nmea_encode(req: models.NmeaEncodeRequest):
        try:
            sentence = nmea.encode_gprmc(nmea.GprmcFields(**req.fields))
        except (TypeError, nmea.NmeaError) as exc:
            raise HTTPException(422, str(exc)) from None
        return models.NmeaEncodeResponse(sentence=sentence)

    @app.post("/nmea/decode", response_model=models.NmeaDecodeResponse)
    def post_nmea_decode(req: models.NmeaDecodeRequest):
        try:
            fields = nmea.decode_gprmc(req.sentence)
        except nmea.NmeaError as exc:
            raise HTTPException(422, str(exc)) from None
        return models.NmeaDecodeResponse(fields=dataclasses.asdict(fields))

    @app.post("/trigger/schedule", response_model=models.ScheduleResponse)
    def post_schedule(req: models.ScheduleRequest):
        try:
            cfg = gateway.sim.board.channel(req.channel_id)
            events = trigger.generate_schedule(cfg, req.t_start, req.t_end)
        except (KeyError, ValueError) as exc:
            raise HTTPException(422, str(exc)) from None
        return models.ScheduleResponse(
            events=[
                models.ScheduleEvent(
                    channel_id=e.channel_id, time_ns=e.time_ns,
                    edge=e.edge, seq=e.sequence_index,
                )
                for e in events
            ]
        )

    @app.websocket("/events")
    async def ws_events(websocket: WebSocket):
        await websocket.accept()
        queue = gateway.subscribe()
        try:
            while True:
                event = await queue.get()
                await websocket.send_json(event)
        except WebSocketDisconnect:
            pass
        finally:
            gateway.unsubscribe(queue)

    _mount_console(app)
    return app


def _mount_console(app: FastAPI) -> None:
    """Serve the operator console statically when its build is present.

    The console is a sibling `frontend/` package in source checkouts; a
    gateway installed without it still serves the full API.
    """
    console_root = Path(__file__).resolve().parents[3] / "frontend"
    index = console_root / "index.html"
    dist = console_root / "dist"
    if not index.exists():
        return

    from fastapi.responses import FileResponse
    from fastapi.staticfiles import StaticFiles

    @app.get("/", include_in_schema=False)
    def console_index():
        return FileResponse(index)

    if dist.is_dir():
        app.mount("/dist", StaticFiles(directory=dist), name="console-assets")

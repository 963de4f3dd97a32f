"""Control-plane HTTP service.

One process owns every live instance.  Mutations (commands, steps, injects,
snapshots) serialize through a per-instance lock; reads hit immutable state
snapshots and the append-only log, so they take no locks.  The event feed is
available as a plain JSON query and as a server-sent event stream
(``follow=true``) that the operator console and curl can consume.

The virtual clock only moves through the step endpoint unless the service
was started in real-time mode, in which case a background driver advances
every non-terminal instance one tick per 100 ms of wall time.
"""

from __future__ import annotations

import asyncio
import json
import os
import re
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dsl import parse
from .eventlog import EventStore, UnknownInstanceError
from .injects import InjectError, InjectSpec, list_injects
from .lifecycle import Command, DestroyedError, Phase, TransitionError
from .model import Scenario, scenario_to_dict, validate_scenario
from .netsim import NotRunningError
from .placement import (
    ClusterSpecError,
    DEFAULT_CLUSTER,
    HostSpec,
    InfeasibleError,
    cluster_from_dict,
    load_cluster,
)
from .runtime import RangeInstance
from .snapshot import SnapshotError, restore, write_snapshot
from .templates import builtin_templates
from .topology import compile_topology

TICK_SECONDS = 0.1  # real-time mode: one tick per 100 ms

ENV_DATA_DIR = "RANGEFORGE_DATA_DIR"
ENV_LISTEN = "RANGEFORGE_LISTEN"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, **extra):
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra
        super().__init__(message)


@dataclass
class ServerConfig:
    data_dir: str
    cluster_file: Optional[str] = None
    realtime: bool = False
    static_dir: Optional[str] = None


@dataclass
class _Slot:
    instance: RangeInstance
    lock: threading.Lock = field(default_factory=threading.Lock)


class ControlPlane:
    """Service state: scenario catalog, cluster, instances, event store."""

    def __init__(self, config: ServerConfig):
        self.config = config
        if not os.path.isdir(config.data_dir):
            os.makedirs(config.data_dir, exist_ok=True)
        if not os.access(config.data_dir, os.W_OK):
            raise RuntimeError(f"data dir not writable: {config.data_dir}")
        os.makedirs(os.path.join(config.data_dir, "snapshots"), exist_ok=True)
        if config.cluster_file is not None:
            self.cluster = load_cluster(config.cluster_file)  # loud on malformed file
        else:
            self.cluster = list(DEFAULT_CLUSTER)
        self.store = EventStore(config.data_dir)
        self.catalog: dict[str, Scenario] = {}
        self.catalog_sources: dict[str, str] = {}
        for scenario in builtin_templates():
            self.catalog[scenario.name] = scenario
            self.catalog_sources[scenario.name] = "builtin"
        self._load_scn_files()
        self.slots: dict[str, _Slot] = {}
        self._id_lock = threading.Lock()
        self._next_id = self._initial_id()
        self._stop = threading.Event()

    def _load_scn_files(self) -> None:
        scn_dir = os.path.join(self.config.data_dir, "scenarios")
        if not os.path.isdir(scn_dir):
            return
        for name in sorted(os.listdir(scn_dir)):
            if not name.endswith(".scn"):
                continue
            path = os.path.join(scn_dir, name)
            with open(path, "r", encoding="utf-8") as fh:
                result = parse(fh.read())
            if result.scenario is None:
                raise RuntimeError(f"malformed scenario file {path}: {result.errors[:3]}")
            report = validate_scenario(result.scenario)
            if not report.ok:
                raise RuntimeError(f"invalid scenario file {path}: {report.errors[:3]}")
            if result.scenario.name in self.catalog:
                raise RuntimeError(
                    f"scenario file {path} redefines {result.scenario.name!r}"
                )
            self.catalog[result.scenario.name] = result.scenario
            self.catalog_sources[result.scenario.name] = "file"

    def _initial_id(self) -> int:
        highest = 0
        for instance_id in self.store.instances():
            match = re.fullmatch(r"i-(\d+)", instance_id)
            if match:
                highest = max(highest, int(match.group(1)))
        return highest + 1

    def new_instance_id(self) -> str:
        with self._id_lock:
            instance_id = f"i-{self._next_id}"
            self._next_id += 1
            return instance_id

    def slot(self, instance_id: str) -> _Slot:
        slot = self.slots.get(instance_id)
        if slot is None:
            raise ApiError(404, "E_NOT_FOUND", f"no instance {instance_id!r}")
        return slot

    # -- real-time driver --------------------------------------------------

    def start_realtime(self) -> None:
        thread = threading.Thread(target=self._realtime_loop, daemon=True)
        thread.start()

    def stop(self) -> None:
        self._stop.set()

    def _realtime_loop(self) -> None:
        while not self._stop.wait(TICK_SECONDS):
            for slot in list(self.slots.values()):
                if slot.instance.state.phase == Phase.DESTROYED:
                    continue
                with slot.lock:
                    if slot.instance.state.phase != Phase.DESTROYED:
                        slot.instance.step(1)


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------


class CreateInstanceBody(BaseModel):
    scenario: str
    seed: int = 0
    cluster: Optional[dict] = None


class CommandBody(BaseModel):
    command: str


class StepBody(BaseModel):
    ticks: int = 1


class InjectBody(BaseModel):
    kind: str
    source_node: Optional[str] = None
    target_node: Optional[str] = None
    params: dict[str, int] = {}
    seed: int = 0


class SnapshotBody(BaseModel):
    path: Optional[str] = None


class RestoreBody(BaseModel):
    path: str


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


def create_app(config: ServerConfig) -> FastAPI:
    plane = ControlPlane(config)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if config.realtime:
            plane.start_realtime()
        yield
        plane.stop()

    app = FastAPI(title="rangeforge", version="0.1.0", lifespan=lifespan)
    app.state.plane = plane

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        body = {"code": exc.code, "message": exc.message}
        body.update(exc.extra)
        return JSONResponse(body, status_code=exc.status)

    # -- catalog ---------------------------------------------------------

    @app.get("/api/v1/scenarios")
    def get_scenarios():
        out = []
        for name in sorted(plane.catalog):
            scenario = plane.catalog[name]
            entry = scenario_to_dict(scenario)
            entry["source"] = plane.catalog_sources[name]
            graph = compile_topology(scenario)
            entry["subnets"] = {net: cidr for net, cidr in graph.subnets}
            entry["ip_assignments"] = {key: addr for key, addr in graph.ip_assignments}
            out.append(entry)
        return {"scenarios": out}

    @app.post("/api/v1/scenarios/validate")
    async def validate_text(request: Request):
        raw = await request.body()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ApiError(400, "E_ENCODING", "scenario text must be UTF-8")
        if len(raw) > 1024 * 1024:
            raise ApiError(413, "E_TOO_LARGE", "scenario text exceeds 1 MiB")
        result = parse(text)
        errors = [
            {
                "line": e.span.line,
                "column": e.span.column,
                "length": e.span.length,
                "code": e.code,
                "message": e.message,
            }
            for e in result.errors
        ]
        findings = []
        if result.scenario is not None:
            report = validate_scenario(result.scenario)
            findings = [
                {
                    "severity": f.severity.value,
                    "code": f.code,
                    "location": f.location,
                    "message": f.message,
                }
                for f in report.findings
            ]
        ok = result.scenario is not None and not errors
        ok = ok and not any(f["severity"] == "error" for f in findings)
        return {"ok": ok, "errors": errors, "findings": findings}

    @app.get("/api/v1/injects")
    def get_injects():
        return {"injects": [kind.to_dict() for kind in list_injects()]}

    # -- instances ---------------------------------------------------------

    @app.get("/api/v1/instances")
    def list_instances():
        return {
            "instances": [
                {
                    "id": slot.instance.id,
                    "scenario": slot.instance.scenario.name,
                    "phase": slot.instance.state.phase.value,
                    "clock_ticks": slot.instance.state.clock_ticks,
                }
                for _, slot in sorted(plane.slots.items())
            ]
        }

    @app.post("/api/v1/instances", status_code=201)
    def create_instance(body: CreateInstanceBody):
        scenario = plane.catalog.get(body.scenario)
        if scenario is None:
            raise ApiError(404, "E_UNKNOWN_SCENARIO", f"no scenario {body.scenario!r}")
        cluster = plane.cluster
        if body.cluster is not None:
            try:
                cluster = cluster_from_dict(body.cluster)
            except ClusterSpecError as exc:
                raise ApiError(422, "E_BAD_CLUSTER", str(exc))
        instance_id = plane.new_instance_id()
        try:
            instance = RangeInstance(
                scenario, cluster, seed=body.seed, instance_id=instance_id, store=plane.store
            )
        except InfeasibleError as exc:
            raise ApiError(
                409, "E_INFEASIBLE", str(exc), constraint=exc.constraint
            )
        plane.slots[instance_id] = _Slot(instance)
        return {"id": instance_id, "state": instance.state.to_dict()}

    @app.get("/api/v1/instances/{instance_id}")
    def get_instance(instance_id: str):
        slot = plane.slot(instance_id)
        return slot.instance.state.to_dict()

    @app.get("/api/v1/instances/{instance_id}/plan")
    def get_plan(instance_id: str):
        slot = plane.slot(instance_id)
        return slot.instance.state.plan.to_dict()

    @app.post("/api/v1/instances/{instance_id}/commands")
    def post_command(instance_id: str, body: CommandBody):
        slot = plane.slot(instance_id)
        try:
            command = Command(body.command)
        except ValueError:
            raise ApiError(422, "E_BAD_COMMAND", f"unknown command {body.command!r}")
        with slot.lock:
            try:
                slot.instance.command(command)
            except TransitionError as exc:
                raise ApiError(
                    409,
                    exc.code,
                    str(exc),
                    phase=exc.phase.value,
                    command=exc.command.value,
                )
            except DestroyedError as exc:
                raise ApiError(409, exc.code, str(exc))
            return slot.instance.state.to_dict()

    @app.post("/api/v1/instances/{instance_id}/step")
    def post_step(instance_id: str, body: StepBody):
        slot = plane.slot(instance_id)
        if body.ticks < 1 or body.ticks > 100_000:
            raise ApiError(422, "E_BAD_TICKS", "ticks must be in 1..100000")
        with slot.lock:
            try:
                appended = slot.instance.step(body.ticks)
            except DestroyedError as exc:
                raise ApiError(409, exc.code, str(exc))
            return {"state": slot.instance.state.to_dict(), "appended": len(appended)}

    @app.post("/api/v1/instances/{instance_id}/injects")
    def post_inject(instance_id: str, body: InjectBody):
        slot = plane.slot(instance_id)
        with slot.lock:
            source, target = body.source_node, body.target_node
            try:
                if source is None or target is None:
                    default_source, default_target = slot.instance.default_inject_endpoints(
                        body.kind
                    )
                    source = source or default_source
                    target = target or default_target
                spec = InjectSpec.make(
                    body.kind, source, target, params=body.params, seed=body.seed
                )
                result, _ = slot.instance.inject(spec)
            except NotRunningError as exc:
                raise ApiError(409, exc.code, str(exc))
            except InjectError as exc:
                raise ApiError(422, exc.code, str(exc))
            return result.to_dict()

    # -- events ------------------------------------------------------------

    @app.get("/api/v1/instances/{instance_id}/events")
    async def get_events(
        instance_id: str,
        since: int = 0,
        kind: Optional[str] = None,
        follow: bool = False,
    ):
        if instance_id not in plane.slots and not plane.store.exists(instance_id):
            raise ApiError(404, "E_NOT_FOUND", f"no instance {instance_id!r}")
        if not follow:
            try:
                records = plane.store.query(instance_id, since_seq=since, kind=kind)
            except UnknownInstanceError:
                raise ApiError(404, "E_NOT_FOUND", f"no instance {instance_id!r}")
            return {"events": [r.to_dict() for r in records]}

        async def stream():
            cursor = since
            yield ": stream start\n\n"
            while True:
                records = plane.store.query(instance_id, since_seq=cursor, kind=kind)
                for record in records:
                    cursor = max(cursor, record.seq)
                    data = json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))
                    yield f"id: {record.seq}\nevent: record\ndata: {data}\n\n"
                await asyncio.sleep(0.05)

        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- snapshots -----------------------------------------------------------

    @app.post("/api/v1/instances/{instance_id}/snapshot")
    def post_snapshot(instance_id: str, body: SnapshotBody = SnapshotBody()):
        slot = plane.slot(instance_id)
        path = body.path or os.path.join(
            config.data_dir,
            "snapshots",
            f"{instance_id}-t{slot.instance.state.clock_ticks}.json",
        )
        with slot.lock:
            write_snapshot(slot.instance, path)
        return {"path": path}

    @app.post("/api/v1/instances/restore")
    def post_restore(body: RestoreBody):
        try:
            instance = restore(body.path, plane.store)
        except SnapshotError as exc:
            status = 409 if exc.code == "E_CONFLICT" else 400
            raise ApiError(status, exc.code, str(exc))
        if instance.id in plane.slots:
            raise ApiError(409, "E_EXISTS", f"instance {instance.id!r} is already live")
        plane.slots[instance.id] = _Slot(instance)
        return {"id": instance.id, "state": instance.state.to_dict()}

    if config.static_dir and os.path.isdir(config.static_dir):
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="console")

    return app


def parse_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {listen!r}")
    return host, int(port)


def serve(config: ServerConfig, listen: str) -> None:
    """Run the service until interrupted (uvicorn loop)."""
    import uvicorn

    host, port = parse_listen(listen)
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")

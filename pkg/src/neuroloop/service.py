"""WebSocket bridge: broadcasts one state frame per tick and routes human
joystick-surrogate commands into the session loop.

The session loop is the single writer and runs in its own thread; frames
cross to clients as immutable JSON snapshots through bounded per-client
queues (drop-oldest, so a slow client never delays a tick). Client commands
land in a latest-wins mailbox sampled once per tick. The first client to
connect holds the operator role; everyone else observes.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import threading
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .commands import Command
from .config import RunConfig
from .engine import ClosedLoopEngine, SessionConfig, SessionMode, StateFrame
from .task import TrialRecord

log = logging.getLogger("neuroloop.service")

DEFAULT_BIND = ("127.0.0.1", 8090)
CLIENT_QUEUE_FRAMES = 64

_FRAME_FIELD_TYPES: dict[str, tuple] = {
    "type": (str,),
    "session": (str,),
    "mode": (str,),
    "trial": (int,),
    "tick": (int,),
    "x": (int, float),
    "y": (int, float),
    "target_x": (int, float),
    "target_y": (int, float),
    "target_side": (int, float),
    "phase": (str,),
    "hold_ticks": (int,),
    "cmd_exec": (str, type(None)),
    "cmd_dec": (str, type(None)),
    "cmd_oracle": (str, type(None)),
    "successes": (int,),
}


def frame_schema_check(doc: dict) -> bool:
    """True when every required state-frame field is present with the right
    type; unknown extra fields are allowed (forward-compatible)."""
    if not isinstance(doc, dict):
        return False
    for name, kinds in _FRAME_FIELD_TYPES.items():
        if name not in doc:
            return False
        value = doc[name]
        if isinstance(value, bool) or not isinstance(value, kinds):
            return False
    return doc["type"] == "state"


class CommandMailbox:
    """Held-key command store: a command persists until replaced or released."""

    def __init__(self):
        self._lock = threading.Lock()
        self._held = Command.STOP
        self._operator_connected = False

    def set(self, cmd: Command) -> None:
        with self._lock:
            self._held = cmd

    def release(self) -> None:
        with self._lock:
            self._held = Command.STOP

    def poll(self) -> Command:
        with self._lock:
            return self._held

    def set_operator(self, connected: bool) -> None:
        with self._lock:
            self._operator_connected = connected

    def is_ready(self) -> bool:
        with self._lock:
            return self._operator_connected


class SessionControl:
    """start/pause/abort switch; the loop blocks at tick boundaries."""

    def __init__(self, autostart: bool = False):
        self._cond = threading.Condition()
        self._state = "run" if autostart else "idle"

    def start(self) -> None:
        with self._cond:
            if self._state in ("idle", "pause"):
                self._state = "run"
                self._cond.notify_all()

    def pause(self) -> None:
        with self._cond:
            if self._state == "run":
                self._state = "pause"
                self._cond.notify_all()

    def abort(self) -> None:
        with self._cond:
            self._state = "abort"
            self._cond.notify_all()

    def wait_runnable(self) -> str:
        with self._cond:
            while self._state in ("idle", "pause"):
                self._cond.wait(timeout=0.5)
            return "abort" if self._state == "abort" else "run"

    @property
    def state(self) -> str:
        with self._cond:
            return self._state


@dataclass
class _Client:
    client_id: int
    role: str
    queue: asyncio.Queue
    loop: asyncio.AbstractEventLoop


class LoopService:
    """Owns one session run and fans its telemetry out to WebSocket clients."""

    def __init__(
        self,
        engine: ClosedLoopEngine,
        session: SessionConfig,
        model=None,
        tick_gate=None,
    ):
        self.engine = engine
        self.session = session
        self.model = model
        self.tick_gate = tick_gate
        self.mailbox = CommandMailbox()
        interactive = session.mode is SessionMode.HAND_INTERACTIVE
        self.control = SessionControl(autostart=not interactive)
        self.records: list[TrialRecord] | None = None
        self.error: BaseException | None = None
        self._clients: dict[int, _Client] = {}
        self._clients_lock = threading.Lock()
        self._ids = itertools.count()
        self._operator_id: int | None = None
        self._thread: threading.Thread | None = None
        self.finished = threading.Event()

    # ---------------------------- session loop ---------------------------- #

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="neuroloop-session", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        try:
            if self.session.mode is SessionMode.HAND_INTERACTIVE:
                # hold at the gate until the operator sends control:start
                if self.control.wait_runnable() == "abort":
                    return
            self.records = self.engine.run_session(
                self.session,
                model=self.model,
                session_name="serve",
                command_source=self.mailbox,
                frame_cb=self.broadcast,
                control=self.control,
                tick_gate=self.tick_gate,
            )
        except BaseException as exc:  # surfaced to join()
            self.error = exc
            log.exception("session loop failed")
        finally:
            self.finished.set()

    def shutdown(self, timeout: float = 5.0) -> None:
        self.control.abort()
        if self._thread is not None:
            self._thread.join(timeout=timeout)

    def join(self, timeout: float = 60.0) -> list[TrialRecord]:
        if not self.finished.wait(timeout=timeout):
            raise TimeoutError("session did not finish in time")
        if self.error is not None:
            raise self.error
        assert self.records is not None
        return self.records

    # ----------------------------- telemetry ------------------------------ #

    def broadcast(self, frame: StateFrame) -> None:
        doc = frame.to_json()
        with self._clients_lock:
            clients = list(self._clients.values())
        for client in clients:
            client.loop.call_soon_threadsafe(_offer, client.queue, doc)

    # ------------------------------ clients ------------------------------- #

    def register(self, loop: asyncio.AbstractEventLoop) -> _Client:
        with self._clients_lock:
            client_id = next(self._ids)
            role = "observer"
            if self._operator_id is None:
                self._operator_id = client_id
                role = "operator"
                self.mailbox.set_operator(True)
            client = _Client(client_id, role, asyncio.Queue(maxsize=CLIENT_QUEUE_FRAMES), loop)
            self._clients[client_id] = client
            return client

    def unregister(self, client: _Client) -> None:
        with self._clients_lock:
            self._clients.pop(client.client_id, None)
            if self._operator_id == client.client_id:
                self._operator_id = None
                self.mailbox.set_operator(False)
                self.mailbox.release()

    def handle_message(self, client: _Client, doc: dict) -> dict | None:
        """Apply one client message; returns an error document or None."""
        if not isinstance(doc, dict) or "type" not in doc:
            return {"type": "error", "msg": "malformed message"}
        kind = doc["type"]
        if kind == "cmd":
            if client.role != "operator":
                return {"type": "error", "msg": "role denied: observer commands ignored"}
            if self.session.mode is not SessionMode.HAND_INTERACTIVE:
                return {"type": "error", "msg": "session is not interactive"}
            try:
                self.mailbox.set(Command.from_wire(doc.get("cmd")))
            except ValueError as exc:
                return {"type": "error", "msg": str(exc)}
            return None
        if kind == "release":
            if client.role != "operator":
                return {"type": "error", "msg": "role denied: observer commands ignored"}
            self.mailbox.release()
            return None
        if kind == "control":
            if client.role != "operator":
                return {"type": "error", "msg": "role denied: control is operator-only"}
            op = doc.get("op")
            if op == "start":
                self.control.start()
            elif op == "pause":
                self.control.pause()
            elif op == "abort":
                self.control.abort()
            else:
                return {"type": "error", "msg": f"unknown control op: {op!r}"}
            return None
        return {"type": "error", "msg": f"unknown message type: {kind!r}"}


def _offer(queue: asyncio.Queue, item: dict) -> None:
    # bounded, drop-oldest: the loop never waits on a slow client
    if queue.full():
        try:
            queue.get_nowait()
        except asyncio.QueueEmpty:
            pass
    queue.put_nowait(item)


def create_app(service: LoopService) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.start()
        yield
        service.shutdown()

    app = FastAPI(title="neuroloop", lifespan=lifespan)
    app.state.service = service

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "session_state": service.control.state}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        client = service.register(asyncio.get_running_loop())
        await websocket.send_json({"type": "role", "role": client.role})

        async def pump_frames():
            while True:
                doc = await client.queue.get()
                await websocket.send_json(doc)

        sender = asyncio.create_task(pump_frames())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    doc = json.loads(raw)
                except json.JSONDecodeError:
                    await websocket.send_json({"type": "error", "msg": "not valid JSON"})
                    continue
                reply = service.handle_message(client, doc)
                if reply is not None:
                    await websocket.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            service.unregister(client)

    return app


def build_service(cfg: RunConfig, realtime: bool = False, tick_gate=None) -> LoopService:
    """Assemble engine + session from a run config's ``sessions.serve`` entry."""
    from .elm import load_model

    session = cfg.serve_session or SessionConfig(SessionMode.HAND_INTERACTIVE, trials=10)
    model = None
    if cfg.serve_model_path:
        model = load_model(cfg.serve_model_path)
    engine = ClosedLoopEngine(
        encoder_params=cfg.encoder,
        feature_config=cfg.features,
        trial_config=cfg.task,
        master_seed=cfg.seed,
        realtime=realtime,
        session_id="serve",
    )
    return LoopService(engine, session, model=model, tick_gate=tick_gate)


def serve(
    cfg: RunConfig,
    host: str = DEFAULT_BIND[0],
    port: int = DEFAULT_BIND[1],
    realtime: bool = True,
    out_dir: str | None = None,
) -> None:
    """Run the WebSocket service until interrupted; writes trial logs at exit."""
    import uvicorn

    from .task import write_records_jsonl

    service = build_service(cfg, realtime=realtime)
    app = create_app(service)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        if out_dir and service.records:
            from pathlib import Path

            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "serve.jsonl", "w") as fp:
                write_records_jsonl(service.records, fp)

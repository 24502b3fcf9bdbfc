"""Live gateway between the simulator and cockpit clients.

One stepping thread owns all mutable world state and advances the
engine at wall-clock tick rate; websocket handlers exchange data with
it only through queued messages (validated inputs in, snapshot dicts
out), so stepping never blocks on network I/O. Each session has a
one-slot snapshot queue: under backpressure the oldest snapshot is
dropped, latest wins.

Wire protocol, one JSON object per text frame:
  client -> server  {"type": "hello", "role": "driver" | "observer"}
                    {"type": "input", "mode": "pose" | "wrench",
                     "t": <client ms>, "v": [6 numbers]}
  server -> client  {"type": "snapshot", ...}
                    {"type": "error", "msg": <string>}

Exactly one driver at a time; a second driver hello is refused. A
protocol violation closes only the offending session. With no driver
connected the loop idles at the centered pose command.
"""

from __future__ import annotations

import asyncio
import json
import math
import os
import socket
import threading
import time
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .config import SimConfig
from .engine import MODE_POSE, MODE_WRENCH
from .errors import BindError
from .link import LinkPlanner
from .orchestrator import initial_engine
from .records import InputRecord, write_inputs, write_log

SNAPSHOT_HZ = 60.0
# cockpit default: clients drive the handle pose directly
IDLE_INPUT = (MODE_POSE, (0.0,) * 6)
_MODE_BY_NAME = {"pose": MODE_POSE, "wrench": MODE_WRENCH}
_NAME_BY_MODE = {MODE_POSE: "pose", MODE_WRENCH: "wrench"}


class ProtocolError(Exception):
    """Client frame violated the wire protocol; closes that session."""


class _Session:
    """Handler-side mailbox; the stepping thread posts into it."""

    __slots__ = ("role", "queue", "loop")

    def __init__(self, role: str, loop: asyncio.AbstractEventLoop):
        self.role = role
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=1)
        self.loop = loop

    def post(self, message: dict) -> None:
        self.loop.call_soon_threadsafe(self._put_latest, message)

    def _put_latest(self, message: dict) -> None:
        if self.queue.full():
            try:
                self.queue.get_nowait()
            except asyncio.QueueEmpty:
                pass
        self.queue.put_nowait(message)


class TeleopService:
    """Owns the engine, the input hold, sessions, and session records."""

    def __init__(self, config: SimConfig, realtime: bool = True):
        self.config = config
        self.realtime = realtime
        self.engine = initial_engine(config)
        self.planner = LinkPlanner(config.link, config.dt)
        self.tick = 0
        self.failure: str | None = None
        self._applied = IDLE_INPUT
        self._pending: tuple[int, tuple[float, ...]] | None = None
        self._last_recorded: tuple[int, tuple[float, ...]] | None = None
        self._lock = threading.Lock()
        self._sessions: dict[int, _Session] = {}
        self._driver_id: int | None = None
        self._next_id = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._rows: list[np.ndarray] | None = None
        self._events: list[InputRecord] | None = None
        self._log_path: str | None = None
        self._input_path: str | None = None
        self._snap_every = max(1, round(1.0 / (SNAPSHOT_HZ * config.dt)))
        self._modes_buf = np.zeros(1, dtype=np.int8)
        self._cmds_buf = np.zeros((1, 6))
        self._row_buf = np.zeros((1, 70))

    # -- recording ---------------------------------------------------

    def record_session(self, log_path: str, input_path: str | None = None) -> None:
        """Arm recording: StepRecord log + per-tick input change events.

        The input file is the replay format the headless runner loads,
        so a recorded session reruns to the same trajectory.
        """
        self._log_path = log_path
        self._input_path = input_path or log_path + ".inputs"
        self._rows = []
        self._events = []

    def _write_records(self) -> None:
        if self._log_path is None:
            return
        rows = np.array(self._rows) if self._rows else np.zeros((0, 70))
        write_log(self._log_path, rows)
        write_inputs(self._input_path, self._events or [])

    # -- input path ---------------------------------------------------

    def submit_input(self, mode_name: str, v) -> None:
        """Hold a validated input; applied from the next tick onward."""
        mode = _MODE_BY_NAME[mode_name]
        with self._lock:
            self._pending = (mode, tuple(float(x) for x in v))

    def _reset_input(self) -> None:
        with self._lock:
            self._pending = IDLE_INPUT

    # -- stepping -----------------------------------------------------

    def step_once(self) -> None:
        """Advance one tick; safe to call directly when not started."""
        with self._lock:
            pending = self._pending
            self._pending = None
        if pending is not None:
            self._applied = pending
        mode, v = self._applied
        if self._events is not None and self._applied != self._last_recorded:
            self._events.append(InputRecord(self.tick, _NAME_BY_MODE[mode], v))
            self._last_recorded = self._applied

        self._modes_buf[0] = mode
        self._cmds_buf[0, :] = v
        fwd, ret = self.planner.extend(1)
        self.engine.run(self._modes_buf, self._cmds_buf, fwd, ret, self.tick, 1, self._row_buf)
        row = self._row_buf[0].copy()
        if self._rows is not None:
            self._rows.append(row)
        k = self.tick
        self.tick += 1
        if k % self._snap_every == 0:
            self._broadcast(self._snapshot(k, row))

    def _run(self) -> None:
        period = self.config.dt
        next_t = time.perf_counter()
        while not self._stop.is_set():
            try:
                self.step_once()
            except Exception as exc:  # non-finite state poisons the loop
                self.failure = str(exc)
                self._broadcast({"type": "error", "msg": f"simulation failed: {exc}"})
                return
            if self.realtime:
                next_t += period
                delay = next_t - time.perf_counter()
                if delay > 0.0:
                    time.sleep(delay)
                elif delay < -0.1:
                    next_t = time.perf_counter()  # resync after a long stall
            elif self.tick % 256 == 0:
                time.sleep(0)  # let handler coroutines breathe

    def start(self) -> None:
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="omniteleop-step", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
        self._write_records()

    # -- sessions -----------------------------------------------------

    def register(self, role: str, loop: asyncio.AbstractEventLoop) -> tuple[int, _Session]:
        with self._lock:
            if role == "driver" and self._driver_id is not None:
                raise ProtocolError("a driver session is already active")
            sid = self._next_id
            self._next_id += 1
            session = _Session(role, loop)
            self._sessions[sid] = session
            if role == "driver":
                self._driver_id = sid
        return sid, session

    def unregister(self, sid: int) -> None:
        with self._lock:
            self._sessions.pop(sid, None)
            was_driver = sid == self._driver_id
            if was_driver:
                self._driver_id = None
        if was_driver:
            self._reset_input()

    def _broadcast(self, message: dict) -> None:
        with self._lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            session.post(message)

    # -- serialization ------------------------------------------------

    def _snapshot(self, tick: int, row: np.ndarray) -> dict:
        def vals(sl) -> list[float]:
            return [float(x) for x in sl]

        f = row[40:43]
        f_mag = math.sqrt(float(f[0]) ** 2 + float(f[1]) ** 2 + float(f[2]) ** 2)
        return {
            "type": "snapshot",
            "tick": tick,
            "t": float(row[0]),
            "handle": {"p": vals(row[1:4]), "q": vals(row[4:8])},
            "reference": {"p": vals(row[14:17]), "q": vals(row[17:21])},
            "vehicle": {
                "p": vals(row[27:30]),
                "q": vals(row[30:34]),
                "v": vals(row[34:37]),
                "w": vals(row[37:40]),
            },
            "w_rec": vals(row[46:52]),
            "w_int": vals(row[52:58]),
            "w_fb": vals(row[58:64]),
            "contact": bool(f_mag > 0.0),
            "contact_force": f_mag,
        }


def _parse_hello(raw: str) -> str:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        raise ProtocolError("frame is not valid JSON") from None
    if not isinstance(obj, dict) or obj.get("type") != "hello":
        raise ProtocolError("first frame must be a hello")
    role = obj.get("role")
    if role not in ("driver", "observer"):
        raise ProtocolError("role must be 'driver' or 'observer'")
    return role


def _parse_input(raw: str, role: str) -> tuple[str, list[float]]:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        raise ProtocolError("frame is not valid JSON") from None
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    kind = obj.get("type")
    if kind == "hello":
        raise ProtocolError("session already greeted")
    if kind != "input":
        raise ProtocolError(f"unknown frame type {kind!r}")
    if role != "driver":
        raise ProtocolError("observers cannot send input")
    mode = obj.get("mode")
    if mode not in _MODE_BY_NAME:
        raise ProtocolError("mode must be 'pose' or 'wrench'")
    t = obj.get("t")
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
        raise ProtocolError("t must be a finite number (client ms)")
    v = obj.get("v")
    if (
        not isinstance(v, list)
        or len(v) != 6
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)
    ):
        raise ProtocolError("v must be a list of 6 numbers")
    values = [float(x) for x in v]
    if not all(math.isfinite(x) for x in values):
        raise ProtocolError("v must be finite")
    return mode, values


def build_app(service: TeleopService, static_dir: str | None = None) -> FastAPI:
    """FastAPI app: /ws endpoint plus an optional static cockpit mount."""

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        service.start()
        try:
            yield
        finally:
            service.stop()

    app = FastAPI(lifespan=lifespan)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        sid = None
        session = None
        try:
            role = _parse_hello(await ws.receive_text())
            sid, session = service.register(role, loop)
        except ProtocolError as exc:
            await ws.send_text(json.dumps({"type": "error", "msg": str(exc)}))
            await ws.close()
            return
        except WebSocketDisconnect:
            return

        recv_task = asyncio.create_task(ws.receive_text())
        snap_task = asyncio.create_task(session.queue.get())
        try:
            while True:
                done, _ = await asyncio.wait(
                    {recv_task, snap_task}, return_when=asyncio.FIRST_COMPLETED
                )
                if snap_task in done:
                    await ws.send_text(json.dumps(snap_task.result()))
                    snap_task = asyncio.create_task(session.queue.get())
                if recv_task in done:
                    raw = recv_task.result()  # raises on disconnect
                    mode, values = _parse_input(raw, session.role)
                    service.submit_input(mode, values)
                    recv_task = asyncio.create_task(ws.receive_text())
        except (WebSocketDisconnect, RuntimeError):
            pass  # peer went away mid-send
        except ProtocolError as exc:
            try:
                await ws.send_text(json.dumps({"type": "error", "msg": str(exc)}))
                await ws.close()
            except (WebSocketDisconnect, RuntimeError):
                pass
        finally:
            for task in (recv_task, snap_task):
                task.cancel()
                try:
                    task.exception()
                except (asyncio.CancelledError, asyncio.InvalidStateError):
                    pass
            service.unregister(sid)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="cockpit")
    return app


def default_ui_dir() -> str | None:
    """Cockpit bundle location: OMNITELEOP_UI_DIR, else ./frontend/dist."""
    env = os.environ.get("OMNITELEOP_UI_DIR")
    if env:
        return env
    local = os.path.join("frontend", "dist")
    return local if os.path.isdir(local) else None


def serve(config: SimConfig, host: str = "127.0.0.1", port: int = 8765) -> None:
    """Blocking entry point: probe the address, then host the app.

    When the config names a log path the whole service session is
    recorded there (rows, plus the replayable input file alongside).
    """
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from None
    finally:
        probe.close()

    import uvicorn

    service = TeleopService(config)
    if config.log:
        service.record_session(config.log)
    app = build_app(service, default_ui_dir())
    uvicorn.run(app, host=host, port=port, log_level="warning")

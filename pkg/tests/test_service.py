"""Live gateway: recorded sessions replay bitwise through the headless
runner, the wire protocol enforces hello/driver/observer roles, bad frames
close only the offending session, and the address probe fails fast."""

import asyncio
import json
import socket
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from starlette.testclient import WebSocketDisconnect

from omniteleop.config import SimConfig
from omniteleop.errors import BindError, NonFiniteState
from omniteleop.orchestrator import load_replay, run
from omniteleop.records import InputRecord, load_rows, read_inputs
from omniteleop.service import TeleopService, ProtocolError, build_app, serve

HELLO_DRIVER = json.dumps({"type": "hello", "role": "driver"})
HELLO_OBSERVER = json.dumps({"type": "hello", "role": "observer"})


def pose_frame(v, t=0.0):
    return json.dumps({"type": "input", "mode": "pose", "t": t, "v": list(v)})


def drain_for_error(ws, limit=20):
    """Skip snapshots until the server's error frame arrives."""
    for _ in range(limit):
        msg = ws.receive_json()
        if msg["type"] == "error":
            return msg
    raise AssertionError("no error frame within limit")


def walk_numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from walk_numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from walk_numbers(v)
    elif isinstance(obj, float):
        yield obj


class TestSteppingAndRecording:
    def test_recorded_session_replays_bitwise(self, tmp_path):
        cfg = SimConfig(duration=0.6, seed=12)
        n = cfg.ticks()
        svc = TeleopService(cfg, realtime=False)
        log = str(tmp_path / "live.jsonl")
        svc.record_session(log)
        script = {
            40: ("wrench", (2.0, 0.0, -1.0, 0.0, 0.4, 0.0)),
            60: ("wrench", (2.0, 0.0, -1.0, 0.0, 0.4, 0.0)),  # duplicate
            230: ("pose", (0.1, -0.05, 0.0, 0.0, 0.0, 0.3)),
            410: ("wrench", (0.0,) * 6),
        }
        for k in range(n):
            if k in script:
                svc.submit_input(*script[k])
            svc.step_once()
        svc.stop()

        live = load_rows(log)
        assert live.shape == (n, 70)
        events = read_inputs(log + ".inputs")
        # first tick always recorded; the duplicate submit is not
        assert [e.tick for e in events] == [0, 40, 230, 410]
        assert events[0] == InputRecord(0, "pose", (0.0,) * 6)

        modes, cmds = load_replay(log + ".inputs", n)
        rerun = run(cfg.with_overrides(decimation=1), modes, cmds, write=False)
        assert np.array_equal(rerun.rows, live)

    def test_driver_drop_recenters_command(self, tmp_path):
        svc = TeleopService(SimConfig(duration=0.1), realtime=False)
        log = str(tmp_path / "drop.jsonl")
        svc.record_session(log)
        loop = asyncio.new_event_loop()
        try:
            sid, _ = svc.register("driver", loop)
            svc.submit_input("wrench", (3.0, 0.0, 0.0, 0.0, 0.0, 0.0))
            for _ in range(5):
                svc.step_once()
            svc.unregister(sid)
            for _ in range(5):
                svc.step_once()
        finally:
            loop.close()
        svc.stop()
        events = read_inputs(log + ".inputs")
        assert [(e.tick, e.mode) for e in events] == [(0, "wrench"), (5, "pose")]
        assert events[1].v == (0.0,) * 6

    def test_empty_session_writes_empty_log(self, tmp_path):
        svc = TeleopService(SimConfig(duration=0.1), realtime=False)
        log = str(tmp_path / "empty.jsonl")
        svc.record_session(log)
        svc.stop()
        assert load_rows(log).shape == (0, 70)
        assert read_inputs(log + ".inputs") == []

    def test_snapshot_queue_keeps_latest(self):
        svc = TeleopService(SimConfig(duration=0.1), realtime=False)
        loop = asyncio.new_event_loop()
        try:
            _, sess = svc.register("observer", loop)
            for i in range(3):
                sess.post({"tick": i})
            loop.call_soon(loop.stop)
            loop.run_forever()
            assert sess.queue.qsize() == 1
            assert sess.queue.get_nowait() == {"tick": 2}
        finally:
            loop.close()

    def test_second_driver_refused_until_first_leaves(self):
        svc = TeleopService(SimConfig(duration=0.1), realtime=False)
        loop = asyncio.new_event_loop()
        try:
            sid, _ = svc.register("driver", loop)
            with pytest.raises(ProtocolError, match="already active"):
                svc.register("driver", loop)
            svc.register("observer", loop)
            svc.unregister(sid)
            svc.register("driver", loop)
        finally:
            loop.close()

    def test_engine_failure_reports_error(self, monkeypatch):
        svc = TeleopService(SimConfig(duration=1.0), realtime=False)
        loop = asyncio.new_event_loop()
        try:
            _, sess = svc.register("observer", loop)

            class Boom:
                def run(self, *args):
                    raise NonFiniteState("state went non-finite", tick=3)

            monkeypatch.setattr(svc, "engine", Boom())
            svc.start()
            deadline = time.monotonic() + 5.0
            while svc.failure is None and time.monotonic() < deadline:
                time.sleep(0.005)
            svc.stop()
            assert svc.failure is not None and "tick 3" in svc.failure
            loop.call_soon(loop.stop)
            loop.run_forever()
            msg = sess.queue.get_nowait()
            assert msg["type"] == "error"
            assert "simulation failed" in msg["msg"]
        finally:
            loop.close()


class TestWireProtocol:
    def make(self, **overrides):
        svc = TeleopService(SimConfig(**overrides))
        return svc, build_app(svc)

    def test_observer_stream_is_monotone_and_finite(self):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(HELLO_OBSERVER)
                wall0 = time.monotonic()
                snaps = [ws.receive_json() for _ in range(8)]
                wall = time.monotonic() - wall0
        for snap in snaps:
            assert snap["type"] == "snapshot"
            assert set(snap) == {
                "type", "tick", "t", "handle", "reference", "vehicle",
                "w_rec", "w_int", "w_fb", "contact", "contact_force",
            }
            assert all(np.isfinite(x) for x in walk_numbers(snap))
            assert snap["t"] == pytest.approx(snap["tick"] * 1e-3)
            assert snap["contact"] is False and snap["contact_force"] == 0.0
            assert len(snap["w_fb"]) == 6 and len(snap["vehicle"]["q"]) == 4
        ticks = [s["tick"] for s in snaps]
        assert all(b > a for a, b in zip(ticks, ticks[1:]))
        # wall-clock pacing, loosely: 8 snapshots at 60 Hz is ~0.12 s
        sim_span = snaps[-1]["t"] - snaps[0]["t"]
        assert 0.3 * sim_span < wall < 5.0 * sim_span + 0.2

    def test_driver_pose_ramps_vehicle_and_replays(self, tmp_path):
        cfg = SimConfig(duration=2.0, seed=4)
        svc = TeleopService(cfg)
        log = str(tmp_path / "session.jsonl")
        svc.record_session(log)
        app = build_app(svc)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(HELLO_DRIVER)
                ws.send_text(pose_frame([0.1, 0.0, 0.0, 0.0, 0.0, 0.0]))
                ts, xs = [], []
                while True:
                    snap = ws.receive_json()
                    ts.append(snap["t"])
                    xs.append(snap["vehicle"]["p"][0])
                    if snap["t"] >= 1.2:
                        break
        assert xs[-1] > 0.05  # vehicle moved along +x
        mid = next(i for i, t in enumerate(ts) if t >= 0.7)
        rate = (xs[-1] - xs[mid]) / (ts[-1] - ts[mid])
        assert 0.085 < rate < 0.105  # approaches v_max * 0.1
        tail = np.diff(xs[mid:])
        assert np.all(tail > 0.0)

        # the recorded trace replays headless to the same rows
        live = load_rows(log)
        n = live.shape[0]
        assert n >= 1200
        modes, cmds = load_replay(log + ".inputs", n)
        replay_cfg = cfg.with_overrides(duration=n * cfg.dt, decimation=1)
        rerun = run(replay_cfg, modes, cmds, write=False)
        assert np.array_equal(rerun.rows, live)

    def test_second_driver_refused(self):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as d1:
                d1.send_text(HELLO_DRIVER)
                d1.receive_json()  # registered: snapshots flow
                with client.websocket_connect("/ws") as d2:
                    d2.send_text(HELLO_DRIVER)
                    msg = d2.receive_json()
                    assert msg["type"] == "error"
                    assert "driver" in msg["msg"]
                assert d1.receive_json()["type"] == "snapshot"

    def test_malformed_frame_closes_only_that_session(self):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as obs:
                obs.send_text(HELLO_OBSERVER)
                first = obs.receive_json()
                with client.websocket_connect("/ws") as bad:
                    bad.send_text(HELLO_OBSERVER)
                    bad.receive_json()
                    bad.send_text("this is not json")
                    err = drain_for_error(bad)
                    assert "JSON" in err["msg"]
                    with pytest.raises(WebSocketDisconnect):
                        for _ in range(5):
                            bad.receive_json()
                later = obs.receive_json()
                assert later["type"] == "snapshot"
                assert later["tick"] > first["tick"]
        assert svc.failure is None

    def test_observer_input_rejected(self):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(HELLO_OBSERVER)
                ws.send_text(pose_frame([0.0] * 6))
                err = drain_for_error(ws)
                assert "observers" in err["msg"]

    def test_first_frame_must_be_hello(self):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(pose_frame([0.0] * 6))
                msg = ws.receive_json()
                assert msg["type"] == "error"
                assert "hello" in msg["msg"]

    def test_unknown_role_rejected(self):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps({"type": "hello", "role": "pilot"}))
                msg = ws.receive_json()
                assert msg["type"] == "error"
                assert "role" in msg["msg"]

    @pytest.mark.parametrize(
        "frame,phrase",
        [
            (json.dumps({"type": "nudge"}), "unknown frame type"),
            (HELLO_DRIVER, "already greeted"),
            ("17", "JSON object"),
            (json.dumps({"type": "input", "mode": "twist", "t": 0, "v": [0] * 6}),
             "mode must be"),
            (json.dumps({"type": "input", "mode": "pose", "v": [0] * 6}),
             "t must be"),
            (json.dumps({"type": "input", "mode": "pose", "t": 0, "v": [0] * 5}),
             "6 numbers"),
            (json.dumps({"type": "input", "mode": "pose", "t": 0,
                         "v": [True, 0, 0, 0, 0, 0]}), "6 numbers"),
            ('{"type":"input","mode":"pose","t":0,"v":[Infinity,0,0,0,0,0]}',
             "finite"),
        ],
    )
    def test_bad_driver_frames_are_refused(self, frame, phrase):
        svc, app = self.make()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(HELLO_DRIVER)
                ws.send_text(frame)
                err = drain_for_error(ws)
                assert phrase in err["msg"]


class TestServeProbe:
    def test_refuses_occupied_address(self):
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            blocker.bind(("127.0.0.1", 0))
            blocker.listen(1)
            port = blocker.getsockname()[1]
            with pytest.raises(BindError, match=str(port)):
                serve(SimConfig(), host="127.0.0.1", port=port)
        finally:
            blocker.close()

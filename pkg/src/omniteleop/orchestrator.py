"""Headless closed-loop runner.

Builds the world a config describes, streams the operator input (zeros,
a timed wrench trace, or a recorded per-tick input file), plans the
link delivery schedule, advances the stepping engine over the full
horizon, and turns the sampled rows into a log file plus a small
summary. Strictly single threaded; all randomness flows from the config
seed, so equal configs produce byte-identical logs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .engine import MODE_POSE, MODE_WRENCH, Engine
from .geometry import Pose, Vec3, exp_so3
from .link import plan_link
from .policy import ReferenceState
from .records import ROW_WIDTH, CONTACT, write_log
from .station import StationState
from .vehicle import VehicleState

DEFAULT_LOG_NAME = "run.jsonl"


@dataclass(frozen=True, slots=True)
class RunResult:
    """Sampled record rows plus the human-facing run summary."""

    rows: np.ndarray
    summary: dict
    log_path: str | None


def initial_engine(config: SimConfig, engine_cls=None) -> Engine:
    """World at t=0: handle at rest, reference placed on the vehicle."""
    cls = engine_cls or Engine
    pose = Pose(config.vehicle_position, exp_so3(config.vehicle_rotvec))
    return cls(
        config.dt,
        config.station,
        config.policy,
        config.vehicle,
        config.wall,
        StationState.rest(),
        ReferenceState.at(pose),
        VehicleState.rest(pose.position, pose.orientation),
    )


def zero_input(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Idle operator: wrench mode, all-zero commands."""
    return np.full(n, MODE_WRENCH, dtype=np.int8), np.zeros((n, 6))


def load_trace(path: str, n: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Timed operator wrench trace, held between entries.

    One JSON object per line with keys t, fa_x, fa_y, fa_z, tau_x,
    tau_y, tau_z; times must be nondecreasing. Ticks before the first
    entry get zero input; each entry holds until the next one.
    """
    entries: list[tuple[float, list[float]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                t = float(obj["t"])
                v = [float(obj[k]) for k in ("fa_x", "fa_y", "fa_z", "tau_x", "tau_y", "tau_z")]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad trace entry ({exc})") from None
            if entries and t < entries[-1][0]:
                raise ValueError(f"{path}:{lineno}: trace times must be nondecreasing")
            entries.append((t, v))

    modes = np.full(n, MODE_WRENCH, dtype=np.int8)
    cmds = np.zeros((n, 6))
    i = -1
    for k in range(n):
        t = k * dt
        while i + 1 < len(entries) and entries[i + 1][0] <= t:
            i += 1
        if i >= 0:
            cmds[k, :] = entries[i][1]
    return modes, cmds


def load_replay(path: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Recorded per-tick input: {"tick", "mode", "v"} lines, held between.

    This is the change-event format a live session records, so feeding
    it back reproduces that session's engine input exactly.
    """
    modes = np.full(n, MODE_WRENCH, dtype=np.int8)
    cmds = np.zeros((n, 6))
    last_tick = -1
    cur_mode, cur_v = MODE_WRENCH, [0.0] * 6
    pos = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                tick = int(obj["tick"])
                mode = {"wrench": MODE_WRENCH, "pose": MODE_POSE}[obj["mode"]]
                v = [float(x) for x in obj["v"]]
                if len(v) != 6:
                    raise ValueError("v must have 6 entries")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad input entry ({exc})") from None
            if tick <= last_tick:
                raise ValueError(f"{path}:{lineno}: ticks must be strictly increasing")
            for k in range(max(pos, 0), min(tick, n)):
                modes[k] = cur_mode
                cmds[k, :] = cur_v
            pos = max(pos, min(tick, n))
            last_tick = tick
            if tick < n:
                cur_mode, cur_v = mode, v
    for k in range(pos, n):
        modes[k] = cur_mode
        cmds[k, :] = cur_v
    return modes, cmds


def resolve_log_path(explicit: str | None) -> str:
    """Explicit paths win; the fallback directory honors OMNITELEOP_LOG_DIR."""
    if explicit is not None:
        return explicit
    return os.path.join(os.environ.get("OMNITELEOP_LOG_DIR", "."), DEFAULT_LOG_NAME)


def summarize(rows: np.ndarray, config: SimConfig) -> dict:
    """Run summary: final poses, peak contact force, record counts."""
    n = config.ticks()
    if rows.shape[0] == 0:
        return {"ticks": n, "records": 0}
    last = rows[-1]
    contact = rows[:, CONTACT][:, 0:3]
    max_f = float(np.max(np.sqrt(np.sum(contact * contact, axis=1))))
    return {
        "ticks": n,
        "records": int(rows.shape[0]),
        "duration": n * config.dt,
        "final_station_p": [float(x) for x in last[1:4]],
        "final_vehicle_p": [float(x) for x in last[27:30]],
        "final_vehicle_q": [float(x) for x in last[30:34]],
        "final_reference_p": [float(x) for x in last[14:17]],
        "max_contact_force": max_f,
    }


def run(
    config: SimConfig,
    modes: np.ndarray | None = None,
    cmds: np.ndarray | None = None,
    engine_cls=None,
    write: bool = True,
) -> RunResult:
    """Execute one configured run end to end.

    Input priority: explicit (modes, cmds) arrays, else the config's
    trace file, else an idle operator. Writes the log when ``write`` and
    the config names a destination; NonFiniteState failures propagate
    with the tick attached.
    """
    n = config.ticks()
    if (modes is None) != (cmds is None):
        raise ValueError("modes and cmds must be supplied together")
    if modes is None:
        if config.trace is not None:
            modes, cmds = load_trace(config.trace, n, config.dt)
        else:
            modes, cmds = zero_input(n)
    if len(modes) != n or len(cmds) != n:
        raise ValueError(f"input arrays must cover all {n} ticks")

    fwd, ret = plan_link(config.link, n, config.dt)
    engine = initial_engine(config, engine_cls)
    rec_count = -(-n // config.decimation)  # ticks 0, d, 2d, ... below n
    rows = np.empty((rec_count, ROW_WIDTH))
    written = engine.run(modes, cmds, fwd, ret, 0, config.decimation, rows)
    rows = rows[:written]

    log_path = None
    if write and config.log is not None:
        log_path = config.log
        parent = os.path.dirname(log_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_log(log_path, rows)
    return RunResult(rows=rows, summary=summarize(rows, config), log_path=log_path)

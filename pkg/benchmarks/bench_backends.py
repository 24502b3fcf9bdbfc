"""Throughput comparison of the pure and compiled engine backends.

Runs the same closed-loop world (wall contact, lossy link, mixed
pose/wrench operator stream) through both implementations, reports
ticks per second for each, and cross-checks that the recorded rows
agree byte for byte.

Usage: python3 benchmarks/bench_backends.py [--ticks N] [--seed S] [--repeat R]
"""

import argparse
import time

import numpy as np

from omniteleop.engine import BACKEND
from omniteleop.engine._pure import MODE_POSE, MODE_WRENCH, PureEngine
from omniteleop.geometry import Pose, Vec3
from omniteleop.link import LinkModel, plan_link
from omniteleop.policy import PolicyParams, ReferenceState
from omniteleop.records import ROW_WIDTH
from omniteleop.station import StationParams, StationState
from omniteleop.vehicle import VehicleParams, VehicleState, WallModel

DT = 1e-3


def build_world(cls):
    wall = WallModel(
        point=Vec3(0.66, 0.0, 0.0),
        normal=Vec3(-1.0, 0.0, 0.0),
        normal_stiffness=600.0,
        normal_damping=25.0,
        friction=0.4,
    )
    pose = Pose.identity()
    return cls(
        DT,
        StationParams(),
        PolicyParams(),
        VehicleParams(),
        wall,
        StationState.rest(),
        ReferenceState.at(pose),
        VehicleState.rest(pose.position, pose.orientation),
    )


def build_stream(n, seed):
    rng = np.random.default_rng(seed)
    cmds = rng.normal(0.0, 2.0, size=(n, 6))
    cmds[:, 0] += 2.0  # push the tip toward the wall so contact stays hot
    modes = np.where(rng.random(n) < 0.25, MODE_POSE, MODE_WRENCH).astype(np.int8)
    link = LinkModel(forward_delay=4e-3, return_delay=3e-3, jitter_std=1e-3, seed=seed)
    fwd, ret = plan_link(link, n, DT, np.random.default_rng(seed))
    return modes, cmds, fwd, ret


def time_backend(cls, n, seed, repeat):
    modes, cmds, fwd, ret = build_stream(n, seed)
    out = np.empty((n, ROW_WIDTH))
    best = float("inf")
    for _ in range(repeat):
        eng = build_world(cls)  # fresh state so every repeat runs the same ticks
        t0 = time.perf_counter()
        written = eng.run(modes, cmds, fwd, ret, 0, 1, out)
        best = min(best, time.perf_counter() - t0)
        assert written == n
    return best, out.copy()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ticks", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    t_pure, rows_pure = time_backend(PureEngine, args.ticks, args.seed, args.repeat)
    print(f"pure:     {args.ticks / t_pure:12.0f} ticks/s  ({t_pure * 1e3:8.1f} ms)")

    if BACKEND != "compiled":
        print("compiled: not built (install without OMNITELEOP_NO_EXT to compare)")
        return

    from omniteleop.engine._core import CoreEngine

    t_core, rows_core = time_backend(CoreEngine, args.ticks, args.seed, args.repeat)
    print(f"compiled: {args.ticks / t_core:12.0f} ticks/s  ({t_core * 1e3:8.1f} ms)")
    print(f"speedup:  {t_pure / t_core:.1f}x")
    same = rows_core.tobytes() == rows_pure.tobytes()
    print(f"rows bitwise identical: {same}")
    if not same:
        raise SystemExit(1)


if __name__ == "__main__":
    main()

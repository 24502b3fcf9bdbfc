"""Fused-tick engine: composition against a hand-stepped oracle loop,
mode semantics, channel holds, decimation, and backend selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from omniteleop.engine import BACKEND, MODE_POSE, MODE_WRENCH, Engine, PureEngine
from omniteleop.errors import NonFiniteState
from omniteleop.geometry import Frame, Pose, Rotation, Twist, Vec3, Wrench
from omniteleop.link import LinkModel, plan_link
from omniteleop.policy import (
    ContactMeasurement,
    PolicyParams,
    ReferenceState,
    apply_deadband,
    integrate_references,
    interaction_feedback,
    rate_reference,
    recentering_wrench,
    total_feedback,
    velocity_reference,
)
from omniteleop.records import ROW_WIDTH
from omniteleop.station import (
    OperatorCommand,
    StationParams,
    StationState,
    clamp_command,
    clamp_pose,
    internal_wrench,
    station_accel,
    station_step,
)
from omniteleop.vehicle import (
    VehicleParams,
    VehicleState,
    WallModel,
    contact_wrench,
    external_wrench,
    impedance_step,
    tool_tip_state,
)

DT = 1e-3
Z3 = Vec3(0.0, 0.0, 0.0)


def make_engine(cls=PureEngine, wall=None, station=None, policy=None, vehicle=None,
                ref_pose=None, veh_state=None):
    sp = station or StationParams()
    pp = policy or PolicyParams()
    vp = vehicle or VehicleParams()
    pose = ref_pose or Pose.identity()
    veh = veh_state or VehicleState.rest(pose.position, pose.orientation)
    return cls(DT, sp, pp, vp, wall, StationState.rest(), ReferenceState.at(pose), veh)


def passthrough_winners(n):
    fwd = np.arange(n, dtype=np.int64)
    ret = np.arange(-1, n - 1, dtype=np.int64)
    return fwd, ret


def run_engine(eng, modes, cmds, fwd, ret, first_tick=0, rec_every=1):
    n = len(modes)
    m = sum(1 for j in range(n) if (first_tick + j) % rec_every == 0)
    out = np.empty((m, ROW_WIDTH))
    written = eng.run(modes, cmds, fwd, ret, first_tick, rec_every, out)
    assert written == m
    return out


class OracleLoop:
    """Hand-stepped tick sequence built from the public module operations.

    Channel history lives in plain dicts keyed by send tick, so any
    slot-aliasing or ordering mistake in the engine's ring buffers shows
    up as a bitwise mismatch.
    """

    def __init__(self, sp, pp, vp, wall, st, ref, veh):
        self.sp, self.pp, self.vp, self.wall = sp, pp, vp, wall
        self.st, self.ref, self.veh = st, ref, veh
        self.sent_rates = {}
        self.sent_fb = {}

    def tick(self, k, mode, c, fwd_w, ret_w):
        sp, pp, vp = self.sp, self.pp, self.vp
        fb = self.sent_fb[ret_w] if ret_w >= 0 else Wrench(Z3, Z3, Frame.IDLE)

        if mode == MODE_POSE:
            pose = clamp_pose(Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5]), sp)
            self.st = StationState(pose, Twist(Z3, Z3, Frame.HANDLE))
            f_h = internal_wrench(self.st, (Z3, Z3), fb, sp)
        else:
            cmd = OperatorCommand(Wrench(Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5]), Frame.HANDLE))
            wr = clamp_command(cmd.wrench, sp)
            acc = station_accel(self.st, wr, fb, sp)
            f_h = internal_wrench(self.st, acc, fb, sp)
            self.st = station_step(self.st, cmd, fb, sp, DT)

        handle_db = StationState(apply_deadband(self.st.pose, pp), self.st.twist)
        self.sent_rates[k] = (velocity_reference(handle_db, pp), rate_reference(handle_db, pp))
        v_cmd, w_cmd = self.sent_rates[fwd_w] if fwd_w >= 0 else (Z3, Z3)
        self.ref = integrate_references(self.ref, v_cmd, w_cmd, DT)

        if self.wall is not None:
            tip_p, tip_v = tool_tip_state(self.veh, vp.tool_offset)
            contact = contact_wrench(tip_p, tip_v, self.wall, self.veh)
        else:
            contact = ContactMeasurement.zero()
        self.veh = impedance_step(self.veh, self.ref, external_wrench(contact, vp.tool_offset), vp, DT)

        w_rec = recentering_wrench(self.st, pp)
        w_int = interaction_feedback(contact, pp)
        w_fb = total_feedback(w_rec, w_int)
        self.sent_fb[k] = w_fb

        st, ref, veh = self.st, self.ref, self.veh
        sq, rq, vq = st.pose.orientation, ref.orientation, veh.orientation
        return [
            k * DT,
            *st.pose.position.as_tuple(), sq.w, sq.x, sq.y, sq.z,
            *st.twist.linear.as_tuple(), *st.twist.angular.as_tuple(),
            *ref.position.as_tuple(), rq.w, rq.x, rq.y, rq.z,
            *ref.velocity.as_tuple(), *ref.angular_rate.as_tuple(),
            *veh.position.as_tuple(), vq.w, vq.x, vq.y, vq.z,
            *veh.velocity.as_tuple(), *veh.angular_rate.as_tuple(),
            *contact.force.as_tuple(), *contact.torque.as_tuple(),
            *w_rec.force.as_tuple(), *w_rec.torque.as_tuple(),
            *w_int.force.as_tuple(), *w_int.torque.as_tuple(),
            *w_fb.force.as_tuple(), *w_fb.torque.as_tuple(),
            *f_h.force.as_tuple(), *f_h.torque.as_tuple(),
        ]


def random_stream(n, seed, pose_fraction=0.25, bias_x=0.0):
    rng = np.random.default_rng(seed)
    cmds = rng.normal(0.0, 2.0, size=(n, 6))
    cmds[:, 0] += bias_x
    modes = np.where(rng.random(n) < pose_fraction, MODE_POSE, MODE_WRENCH).astype(np.int8)
    return modes, cmds


def test_rest_world_is_a_fixed_point():
    n = 500
    eng = make_engine()
    modes = np.zeros(n, dtype=np.int8)
    cmds = np.zeros((n, 6))
    fwd, ret = passthrough_winners(n)
    rows = run_engine(eng, modes, cmds, fwd, ret)
    assert rows.shape == (n, ROW_WIDTH)
    # t column counts ticks
    assert rows[0, 0] == 0.0 and rows[499, 0] == 499 * DT
    # every pose stays at identity, every wrench at zero, exactly
    ident = np.zeros(ROW_WIDTH)
    ident[4] = ident[17] = ident[30] = 1.0  # q.w of the three pose groups
    for k in (0, 1, n // 2, n - 1):
        expect = ident.copy()
        expect[0] = k * DT
        assert np.array_equal(rows[k], expect)


def test_matches_hand_stepped_oracle_bitwise():
    n = 2500
    wall = WallModel(point=Vec3(0.68, 0.0, 0.0), normal=Vec3(-1.0, 0.0, 0.0),
                     normal_stiffness=800.0, normal_damping=30.0, friction=0.5)
    link = LinkModel(forward_delay=3e-3, return_delay=2e-3, jitter_std=5e-4, seed=99)
    fwd, ret = plan_link(link, n, DT, np.random.default_rng(99))
    modes, cmds = random_stream(n, seed=7, bias_x=2.5)

    eng = make_engine(wall=wall)
    rows = run_engine(eng, modes, cmds, fwd, ret)

    oracle = OracleLoop(StationParams(), PolicyParams(), VehicleParams(), wall,
                        StationState.rest(), ReferenceState.at(Pose.identity()),
                        VehicleState.rest())
    expect = np.array([oracle.tick(k, int(modes[k]), cmds[k], int(fwd[k]), int(ret[k]))
                       for k in range(n)])
    bad = np.nonzero(rows != expect)
    assert bad[0].size == 0, f"row mismatch first at tick {bad[0][:1]}, col {bad[1][:1]}"
    assert rows.tobytes() == expect.tobytes()  # catches signed-zero drift too
    assert np.any(expect[:, 40] != 0.0), "stream never reached the wall; contact path untested"
    # engine final state matches the oracle's
    assert eng.station == oracle.st
    assert eng.vehicle == oracle.veh
    assert eng.reference == oracle.ref


def test_pose_mode_pins_handle_and_zeroes_twist():
    n = 3
    eng = make_engine()
    modes = np.full(n, MODE_POSE, dtype=np.int8)
    cmds = np.zeros((n, 6))
    cmds[:, 0] = 0.9  # beyond the 0.3 m workspace sphere
    fwd, ret = passthrough_winners(n)
    rows = run_engine(eng, modes, cmds, fwd, ret)
    for k in range(n):
        assert rows[k, 1] == 0.3  # clamped to the sphere
        assert np.all(rows[k, 8:14] == 0.0)  # twist stays zero
    # the clamped displacement still drives the rate law and the spring
    assert rows[0, 21] == 1.0 * 0.3  # ref velocity = gain * handle x
    assert rows[0, 14] == DT * 0.3  # integrated one tick
    assert rows[0, 46] == -(50.0 * 0.3)  # recentering force


def test_return_channel_delay_shifts_felt_feedback():
    # hold the handle at +0.1 m; the spring force is -5 N; with a 5 ms
    # return delay the hand feels the reaction only from tick 5 onward
    n = 12
    delay_ticks = 5
    link = LinkModel(forward_delay=0.0, return_delay=delay_ticks * DT)
    fwd, ret = plan_link(link, n, DT)
    eng = make_engine()
    modes = np.full(n, MODE_POSE, dtype=np.int8)
    cmds = np.zeros((n, 6))
    cmds[:, 0] = 0.1
    rows = run_engine(eng, modes, cmds, fwd, ret)
    for k in range(n):
        assert rows[k, 46] == -5.0  # w_rec force.x, sent every tick
        expect_fh = 5.0 if k >= delay_ticks else 0.0
        assert rows[k, 64] == expect_fh, f"tick {k}"


def test_decimation_and_chunked_runs_agree_bitwise():
    n = 400
    modes, cmds = random_stream(n, seed=21)
    link = LinkModel(forward_delay=2e-3, return_delay=1e-3, jitter_std=3e-4, seed=5)
    fwd, ret = plan_link(link, n, DT, np.random.default_rng(5))

    whole = make_engine()
    rows_whole = run_engine(whole, modes, cmds, fwd, ret, rec_every=3)
    assert rows_whole.shape[0] == len(range(0, n, 3))

    split = make_engine()
    cut = 137
    rows_a = run_engine(split, modes[:cut], cmds[:cut], fwd[:cut], ret[:cut],
                        first_tick=0, rec_every=3)
    rows_b = run_engine(split, modes[cut:], cmds[cut:], fwd[cut:], ret[cut:],
                        first_tick=cut, rec_every=3)
    assert np.array_equal(np.vstack([rows_a, rows_b]), rows_whole)
    assert split.station == whole.station
    assert split.reference == whole.reference
    assert split.vehicle == whole.vehicle


def test_repeat_runs_are_bitwise_identical():
    n = 600
    modes, cmds = random_stream(n, seed=3, bias_x=1.0)
    wall = WallModel(point=Vec3(0.65, 0.0, 0.0), normal=Vec3(-1.0, 0.0, 0.0))
    fwd, ret = passthrough_winners(n)
    rows1 = run_engine(make_engine(wall=wall), modes, cmds, fwd, ret)
    rows2 = run_engine(make_engine(wall=wall), modes, cmds, fwd, ret)
    assert np.array_equal(rows1, rows2)


def test_nonfinite_command_reports_the_tick():
    n = 10
    eng = make_engine()
    modes = np.zeros(n, dtype=np.int8)
    cmds = np.zeros((n, 6))
    cmds[7, 2] = np.nan
    fwd, ret = passthrough_winners(n)
    out = np.empty((n, ROW_WIDTH))
    with pytest.raises(NonFiniteState) as exc:
        eng.run(modes, cmds, fwd, ret, 0, 1, out)
    assert exc.value.tick == 7
    assert "(tick 7)" in str(exc.value)


def test_run_argument_validation():
    eng = make_engine()
    n = 4
    modes = np.zeros(n, dtype=np.int8)
    cmds = np.zeros((n, 6))
    fwd, ret = passthrough_winners(n)
    with pytest.raises(ValueError):
        eng.run(modes, cmds[:2], fwd, ret, 0, 1, np.empty((n, ROW_WIDTH)))
    with pytest.raises(ValueError):
        eng.run(modes, cmds, fwd, ret, 0, 0, np.empty((n, ROW_WIDTH)))
    with pytest.raises(ValueError):
        eng.run(modes, cmds, fwd, ret, -1, 1, np.empty((n, ROW_WIDTH)))
    with pytest.raises(ValueError):
        eng.run(modes, cmds, fwd, ret, 0, 1, np.empty((n, ROW_WIDTH - 1)))
    with pytest.raises(ValueError):
        eng.run(modes, cmds, fwd, ret, 0, 1, np.empty((1, ROW_WIDTH)))


def test_engine_rejects_bad_dt():
    with pytest.raises(ValueError):
        PureEngine(0.0, StationParams(), PolicyParams(), VehicleParams(), None,
                   StationState.rest(), ReferenceState.at(Pose.identity()), VehicleState.rest())


def test_pure_env_var_forces_fallback():
    env = dict(os.environ, OMNITELEOP_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from omniteleop.engine import BACKEND; print(BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "pure"


@pytest.mark.skipif(BACKEND != "compiled", reason="compiled backend not built")
def test_backends_agree_bitwise():
    n = 3000
    wall = WallModel(point=Vec3(0.66, 0.0, 0.0), normal=Vec3(-1.0, 0.0, 0.0),
                     normal_stiffness=600.0, normal_damping=25.0, friction=0.4)
    link = LinkModel(forward_delay=4e-3, return_delay=3e-3, jitter_std=1e-3, seed=11)
    fwd, ret = plan_link(link, n, DT, np.random.default_rng(11))
    modes, cmds = random_stream(n, seed=55, bias_x=2.0)

    rows_pure = run_engine(make_engine(PureEngine, wall=wall), modes, cmds, fwd, ret)
    rows_core = run_engine(make_engine(Engine, wall=wall), modes, cmds, fwd, ret)
    assert rows_core.shape == rows_pure.shape
    mismatch = np.nonzero(rows_core != rows_pure)
    assert mismatch[0].size == 0, f"first mismatch at tick {mismatch[0][:1]}, col {mismatch[1][:1]}"
    assert rows_core.tobytes() == rows_pure.tobytes()
    assert np.any(rows_pure[:, 40] != 0.0), "parity stream never touched the wall"

"""Pure-Python fused tick for the closed teleoperation loop.

One tick advances, in fixed order: feedback delivery from the return
channel, the station under the operator input, the displacement-to-rate
law (after the deadband), delivery of the rate command over the forward
channel, reference integration, tip contact against the wall, the
vehicle impedance step, and finally the feedback wrench pushed into the
return channel. Both channels are ring buffers indexed by precomputed
per-tick winner send indices (:mod:`omniteleop.link`), so the kernel is
deterministic and free of heaps and random state.

This implementation composes the public module operations and is the
reference; the compiled kernel in ``_core`` mirrors it arithmetic
operation for arithmetic operation, so the two backends produce bitwise
identical runs.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteState
from ..geometry import Frame, Twist, Vec3, Wrench
from ..link import MAX_DELAY_TICKS
from ..policy import (
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
from ..records import ROW_WIDTH
from ..station import (
    OperatorCommand,
    StationParams,
    StationState,
    clamp_command,
    clamp_pose,
    internal_wrench,
    station_accel,
    station_step,
)
from ..vehicle import (
    VehicleParams,
    VehicleState,
    WallModel,
    contact_wrench,
    external_wrench,
    impedance_step,
    tool_tip_state,
)

MODE_WRENCH = 0
MODE_POSE = 1

# ring capacity must exceed the largest send-to-delivery span
RING = 1 << 16
MASK = RING - 1
assert RING > MAX_DELAY_TICKS

_Z3 = Vec3(0.0, 0.0, 0.0)
_ZERO_FB = Wrench(_Z3, _Z3, Frame.IDLE)
_ZERO_CONTACT = ContactMeasurement.zero()


class PureEngine:
    """Steppable closed-loop world; one instance per simulation run.

    ``run`` may be called repeatedly with consecutive tick windows (the
    streaming service steps one tick at a time); channel history carries
    over between calls. After a NonFiniteState the instance is spent.
    """

    __slots__ = (
        "dt",
        "station_params",
        "policy_params",
        "vehicle_params",
        "wall",
        "station",
        "reference",
        "vehicle",
        "_rates_v",
        "_rates_w",
        "_wfb",
    )

    def __init__(
        self,
        dt: float,
        station_params: StationParams,
        policy_params: PolicyParams,
        vehicle_params: VehicleParams,
        wall: WallModel | None,
        station_state: StationState,
        reference_state: ReferenceState,
        vehicle_state: VehicleState,
    ):
        if not 0.0 < dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01]")
        self.dt = dt
        self.station_params = station_params
        self.policy_params = policy_params
        self.vehicle_params = vehicle_params
        self.wall = wall
        self.station = station_state
        self.reference = reference_state
        self.vehicle = vehicle_state
        self._rates_v = [_Z3] * RING
        self._rates_w = [_Z3] * RING
        self._wfb = [_ZERO_FB] * RING

    def run(
        self,
        modes: np.ndarray,
        cmds: np.ndarray,
        fwd_winner: np.ndarray,
        ret_winner: np.ndarray,
        first_tick: int,
        rec_every: int,
        rec_out: np.ndarray,
    ) -> int:
        """Advance ``len(modes)`` ticks starting at absolute ``first_tick``.

        ``modes[j]`` selects the input interpretation of ``cmds[j]``
        (six floats): MODE_WRENCH drives the station with an operator
        wrench, MODE_POSE pins the handle at a commanded position +
        rotation-vector pose with zero twist. ``fwd_winner``/
        ``ret_winner`` are the per-tick delivery indices from
        :func:`omniteleop.link.plan_link`. Every tick with
        ``tick % rec_every == 0`` appends one 70-float row to
        ``rec_out``; returns the number of rows written.
        """
        n = len(modes)
        if not (len(cmds) == len(fwd_winner) == len(ret_winner) == n):
            raise ValueError("modes, cmds, and winner arrays must share one length")
        if rec_every < 1:
            raise ValueError("rec_every must be >= 1")
        if first_tick < 0:
            raise ValueError("first_tick must be >= 0")
        if rec_out.ndim != 2 or rec_out.shape[1] != ROW_WIDTH:
            raise ValueError(f"rec_out must be an (m, {ROW_WIDTH}) array")

        dt = self.dt
        sp, pp, vp = self.station_params, self.policy_params, self.vehicle_params
        wall = self.wall
        r_st = vp.tool_offset
        st, ref, veh = self.station, self.reference, self.vehicle
        rates_v, rates_w, wfb = self._rates_v, self._rates_w, self._wfb

        mode_l = np.asarray(modes).tolist()
        cmd_l = np.asarray(cmds, dtype=np.float64).tolist()
        fwd_l = np.asarray(fwd_winner).tolist()
        ret_l = np.asarray(ret_winner).tolist()

        written = 0
        for j in range(n):
            k = first_tick + j
            c = cmd_l[j]

            # return channel: wrench sent at winner tick, or silence
            wj = ret_l[j]
            fb = wfb[wj & MASK] if wj >= 0 else _ZERO_FB

            # station under the operator input
            if mode_l[j] == MODE_POSE:
                pose = clamp_pose(Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5]), sp)
                st = StationState(pose, Twist(_Z3, _Z3, Frame.HANDLE))
                f_h = internal_wrench(st, (_Z3, _Z3), fb, sp)
            else:
                cmd = OperatorCommand(
                    Wrench(Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5]), Frame.HANDLE)
                )
                wr = clamp_command(cmd.wrench, sp)
                acc = station_accel(st, wr, fb, sp)
                f_h = internal_wrench(st, acc, fb, sp)
                try:
                    st = station_step(st, cmd, fb, sp, dt)
                except NonFiniteState as exc:
                    raise NonFiniteState(str(exc), tick=k) from None

            # rate law reads the post-step handle, deadbanded
            handle_db = StationState(apply_deadband(st.pose, pp), st.twist)
            v_ref = velocity_reference(handle_db, pp)
            w_ref = rate_reference(handle_db, pp)

            # forward channel: current send stored first, then delivery
            slot = k & MASK
            rates_v[slot] = v_ref
            rates_w[slot] = w_ref
            fj = fwd_l[j]
            if fj >= 0:
                v_cmd = rates_v[fj & MASK]
                w_cmd = rates_w[fj & MASK]
            else:
                v_cmd = _Z3
                w_cmd = _Z3

            ref = integrate_references(ref, v_cmd, w_cmd, dt)

            # contact at the pre-step tip, then the vehicle step
            if wall is not None:
                tip_p, tip_v = tool_tip_state(veh, r_st)
                contact = contact_wrench(tip_p, tip_v, wall, veh)
            else:
                contact = _ZERO_CONTACT
            w_ext = external_wrench(contact, r_st)
            try:
                veh = impedance_step(veh, ref, w_ext, vp, dt)
            except NonFiniteState as exc:
                raise NonFiniteState(str(exc), tick=k) from None

            # feedback from the raw (undeadbanded) handle + measured contact
            w_rec = recentering_wrench(st, pp)
            w_int = interaction_feedback(contact, pp)
            w_fb = total_feedback(w_rec, w_int)
            wfb[slot] = w_fb

            if k % rec_every == 0:
                if written >= rec_out.shape[0]:
                    raise ValueError("rec_out has fewer rows than sampled ticks")
                sq, rq, vq = st.pose.orientation, ref.orientation, veh.orientation
                stp, stv, stw = st.pose.position, st.twist.linear, st.twist.angular
                rec_out[written, :] = (
                    k * dt,
                    stp.x, stp.y, stp.z, sq.w, sq.x, sq.y, sq.z,
                    stv.x, stv.y, stv.z, stw.x, stw.y, stw.z,
                    ref.position.x, ref.position.y, ref.position.z,
                    rq.w, rq.x, rq.y, rq.z,
                    ref.velocity.x, ref.velocity.y, ref.velocity.z,
                    ref.angular_rate.x, ref.angular_rate.y, ref.angular_rate.z,
                    veh.position.x, veh.position.y, veh.position.z,
                    vq.w, vq.x, vq.y, vq.z,
                    veh.velocity.x, veh.velocity.y, veh.velocity.z,
                    veh.angular_rate.x, veh.angular_rate.y, veh.angular_rate.z,
                    contact.force.x, contact.force.y, contact.force.z,
                    contact.torque.x, contact.torque.y, contact.torque.z,
                    w_rec.force.x, w_rec.force.y, w_rec.force.z,
                    w_rec.torque.x, w_rec.torque.y, w_rec.torque.z,
                    w_int.force.x, w_int.force.y, w_int.force.z,
                    w_int.torque.x, w_int.torque.y, w_int.torque.z,
                    w_fb.force.x, w_fb.force.y, w_fb.force.z,
                    w_fb.torque.x, w_fb.torque.y, w_fb.torque.z,
                    f_h.force.x, f_h.force.y, f_h.force.z,
                    f_h.torque.x, f_h.torque.y, f_h.torque.z,
                )
                written += 1

        self.station, self.reference, self.vehicle = st, ref, veh
        return written

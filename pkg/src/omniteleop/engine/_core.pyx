# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fused tick, a literal transcription of the pure kernel.

Every arithmetic expression below copies the reference implementation
operation for operation: same association order, no algebraic
rewriting, squares spelled x*x, reciprocal-multiplies kept where the
reference multiplies by a reciprocal and divisions kept where it
divides. Together with the build flag -ffp-contract=off (no
fused-multiply-add contraction) this makes the compiled run bitwise
identical to the pure one; the parity suite asserts that on raw bytes.

Any edit here must be mirrored from _pure.py, never invented locally.
"""

import numpy as np

from libc.math cimport atan2, cos, fabs, isfinite, sin, sqrt, tanh
from libc.stdint cimport int64_t

from ..errors import NonFiniteState
from ..geometry import Frame, Pose, Rotation, Twist, Vec3
from ..policy import ReferenceState
from ..records import ROW_WIDTH
from ..station import StationState
from ..vehicle import VehicleState
from ._pure import MASK, MODE_POSE, MODE_WRENCH, RING

cdef int64_t _MASK = MASK
cdef int _POSE = MODE_POSE
cdef int _ROW_WIDTH = ROW_WIDTH


cdef struct V3:
    double x
    double y
    double z

cdef struct Q4:
    double w
    double x
    double y
    double z


cdef inline V3 v3(double x, double y, double z):
    cdef V3 r
    r.x = x; r.y = y; r.z = z
    return r

cdef inline Q4 q4(double w, double x, double y, double z):
    cdef Q4 r
    r.w = w; r.x = x; r.y = y; r.z = z
    return r

cdef inline double v_norm(V3 a):
    return sqrt(a.x * a.x + a.y * a.y + a.z * a.z)

cdef inline double v_dot(V3 a, V3 b):
    return a.x * b.x + a.y * b.y + a.z * b.z

cdef inline V3 v_cross(V3 a, V3 b):
    return v3(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )

cdef inline V3 rotate_c(Q4 q, V3 v):
    cdef double tx = 2.0 * (q.y * v.z - q.z * v.y)
    cdef double ty = 2.0 * (q.z * v.x - q.x * v.z)
    cdef double tz = 2.0 * (q.x * v.y - q.y * v.x)
    return v3(
        v.x + q.w * tx + (q.y * tz - q.z * ty),
        v.y + q.w * ty + (q.z * tx - q.x * tz),
        v.z + q.w * tz + (q.x * ty - q.y * tx),
    )

cdef inline V3 rotate_inv_c(Q4 q, V3 v):
    return rotate_c(q4(q.w, -q.x, -q.y, -q.z), v)

cdef inline Q4 q_compose_c(Q4 a, Q4 b):
    cdef double w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    cdef double x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    cdef double y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    cdef double z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    if w < 0.0:
        w = -w; x = -x; y = -y; z = -z
    return q4(w, x, y, z)

cdef Q4 q_from_quat_c(double w, double x, double y, double z) except *:
    cdef double n = sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0 or not isfinite(n):
        raise ValueError("quaternion norm must be finite and nonzero")
    cdef double inv = 1.0 / n
    w = w * inv; x = x * inv; y = y * inv; z = z * inv
    if w < 0.0:
        w = -w; x = -x; y = -y; z = -z
    return q4(w, x, y, z)

cdef Q4 exp_so3_c(V3 aa) except *:
    cdef double theta = v_norm(aa)
    cdef double half = 0.5 * theta
    cdef double k
    if theta > 1e-9:
        k = sin(half) / theta
    else:
        k = 0.5
    return q_from_quat_c(cos(half), k * aa.x, k * aa.y, k * aa.z)

cdef Q4 integrate_rotation_c(Q4 r, V3 omega_body, double dt) except *:
    cdef Q4 dq = exp_so3_c(v3(omega_body.x * dt, omega_body.y * dt, omega_body.z * dt))
    cdef Q4 c = q_compose_c(r, dq)
    return q_from_quat_c(c.w, c.x, c.y, c.z)

cdef inline double q_angle_c(Q4 q):
    cdef double s = sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    return 2.0 * atan2(s, fabs(q.w))

cdef inline V3 skew_vee_c(Q4 q):
    # the off-diagonal matrix entries, materialized like the reference
    cdef double m01 = 2.0 * (q.x * q.y - q.w * q.z)
    cdef double m02 = 2.0 * (q.x * q.z + q.w * q.y)
    cdef double m10 = 2.0 * (q.x * q.y + q.w * q.z)
    cdef double m12 = 2.0 * (q.y * q.z - q.w * q.x)
    cdef double m20 = 2.0 * (q.x * q.z - q.w * q.y)
    cdef double m21 = 2.0 * (q.y * q.z + q.w * q.x)
    return v3(
        0.5 * (m21 - m12),
        0.5 * (m02 - m20),
        0.5 * (m10 - m01),
    )

cdef inline bint v_finite(V3 a):
    return isfinite(a.x + a.y + a.z)

cdef inline bint q_finite(Q4 q):
    return isfinite(q.w + q.x + q.y + q.z)


cdef class CoreEngine:
    """Drop-in replacement for the pure engine; see the module docstring."""

    cdef readonly double dt
    cdef readonly object station_params
    cdef readonly object policy_params
    cdef readonly object vehicle_params
    cdef readonly object wall

    cdef V3 st_p
    cdef Q4 st_q
    cdef V3 st_v
    cdef V3 st_w
    cdef V3 rf_p
    cdef Q4 rf_q
    cdef V3 rf_v
    cdef V3 rf_w
    cdef V3 vh_p
    cdef V3 vh_v
    cdef Q4 vh_q
    cdef V3 vh_w

    cdef double m_tot[6]
    cdef double d_tot[6]
    cdef double m_adm[6]
    cdef double d_adm[6]
    cdef double ws_radius, rot_limit, f_limit, t_limit
    cdef double v_max, om_max
    cdef double k_rec[6]
    cdef V3 pp_tool
    cdef double db_pos, db_rot
    cdef bint db_on
    cdef double m_v[6]
    cdef double d_v[6]
    cdef double k_v[6]
    cdef V3 r_st
    cdef bint has_wall
    cdef V3 w_pt, w_n
    cdef double w_kn, w_dn, w_mu, w_veps

    cdef double[:, ::1] _rv
    cdef double[:, ::1] _rw
    cdef double[:, ::1] _fb

    def __init__(
        self,
        double dt,
        station_params,
        policy_params,
        vehicle_params,
        wall,
        station_state,
        reference_state,
        vehicle_state,
    ):
        cdef int i
        if not 0.0 < dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01]")
        self.dt = dt
        self.station_params = station_params
        self.policy_params = policy_params
        self.vehicle_params = vehicle_params
        self.wall = wall

        mt = station_params.total_inertia()
        dt_ = station_params.total_damping()
        ma = station_params.admittance_inertia
        da = station_params.admittance_damping
        for i in range(6):
            self.m_tot[i] = mt[i]
            self.d_tot[i] = dt_[i]
            self.m_adm[i] = ma[i]
            self.d_adm[i] = da[i]
        self.ws_radius = station_params.workspace_radius
        self.rot_limit = station_params.rotation_limit
        self.f_limit = station_params.force_limit
        self.t_limit = station_params.torque_limit

        self.v_max = policy_params.v_max
        self.om_max = policy_params.omega_max
        kr = policy_params.recenter_stiffness
        for i in range(6):
            self.k_rec[i] = kr[i]
        t = policy_params.tool_offset
        self.pp_tool = v3(t.x, t.y, t.z)
        self.db_pos = policy_params.deadband_position
        self.db_rot = policy_params.deadband_rotation
        self.db_on = policy_params.deadband_enabled

        mv = vehicle_params.virtual_inertia
        dv = vehicle_params.virtual_damping
        kv = vehicle_params.virtual_stiffness
        for i in range(6):
            self.m_v[i] = mv[i]
            self.d_v[i] = dv[i]
            self.k_v[i] = kv[i]
        t = vehicle_params.tool_offset
        self.r_st = v3(t.x, t.y, t.z)

        self.has_wall = wall is not None
        if self.has_wall:
            self.w_pt = v3(wall.point.x, wall.point.y, wall.point.z)
            self.w_n = v3(wall.normal.x, wall.normal.y, wall.normal.z)
            self.w_kn = wall.normal_stiffness
            self.w_dn = wall.normal_damping
            self.w_mu = wall.friction
            self.w_veps = wall.v_eps

        p = station_state.pose.position
        q = station_state.pose.orientation
        self.st_p = v3(p.x, p.y, p.z)
        self.st_q = q4(q.w, q.x, q.y, q.z)
        p = station_state.twist.linear
        self.st_v = v3(p.x, p.y, p.z)
        p = station_state.twist.angular
        self.st_w = v3(p.x, p.y, p.z)

        p = reference_state.position
        q = reference_state.orientation
        self.rf_p = v3(p.x, p.y, p.z)
        self.rf_q = q4(q.w, q.x, q.y, q.z)
        p = reference_state.velocity
        self.rf_v = v3(p.x, p.y, p.z)
        p = reference_state.angular_rate
        self.rf_w = v3(p.x, p.y, p.z)

        p = vehicle_state.position
        q = vehicle_state.orientation
        self.vh_p = v3(p.x, p.y, p.z)
        self.vh_q = q4(q.w, q.x, q.y, q.z)
        p = vehicle_state.velocity
        self.vh_v = v3(p.x, p.y, p.z)
        p = vehicle_state.angular_rate
        self.vh_w = v3(p.x, p.y, p.z)

        self._rv = np.zeros((RING, 3))
        self._rw = np.zeros((RING, 3))
        self._fb = np.zeros((RING, 6))

    @property
    def station(self):
        return StationState(
            Pose(
                Vec3(self.st_p.x, self.st_p.y, self.st_p.z),
                Rotation(self.st_q.w, self.st_q.x, self.st_q.y, self.st_q.z),
            ),
            Twist(
                Vec3(self.st_v.x, self.st_v.y, self.st_v.z),
                Vec3(self.st_w.x, self.st_w.y, self.st_w.z),
                Frame.HANDLE,
            ),
        )

    @property
    def reference(self):
        return ReferenceState(
            Vec3(self.rf_p.x, self.rf_p.y, self.rf_p.z),
            Vec3(self.rf_v.x, self.rf_v.y, self.rf_v.z),
            Rotation(self.rf_q.w, self.rf_q.x, self.rf_q.y, self.rf_q.z),
            Vec3(self.rf_w.x, self.rf_w.y, self.rf_w.z),
        )

    @property
    def vehicle(self):
        return VehicleState(
            Vec3(self.vh_p.x, self.vh_p.y, self.vh_p.z),
            Vec3(self.vh_v.x, self.vh_v.y, self.vh_v.z),
            Rotation(self.vh_q.w, self.vh_q.x, self.vh_q.y, self.vh_q.z),
            Vec3(self.vh_w.x, self.vh_w.y, self.vh_w.z),
        )

    def run(
        self,
        modes,
        cmds,
        fwd_winner,
        ret_winner,
        first_tick,
        rec_every,
        rec_out,
    ):
        """Advance ``len(modes)`` ticks; see the pure engine for the contract."""
        cdef Py_ssize_t n = len(modes)
        if not (len(cmds) == len(fwd_winner) == len(ret_winner) == n):
            raise ValueError("modes, cmds, and winner arrays must share one length")
        if rec_every < 1:
            raise ValueError("rec_every must be >= 1")
        if first_tick < 0:
            raise ValueError("first_tick must be >= 0")
        if rec_out.ndim != 2 or rec_out.shape[1] != _ROW_WIDTH:
            raise ValueError(f"rec_out must be an (m, {ROW_WIDTH}) array")

        cdef const int64_t[::1] mv = np.ascontiguousarray(modes, dtype=np.int64)
        cdef const double[:, ::1] cv = np.ascontiguousarray(cmds, dtype=np.float64)
        cdef const int64_t[::1] fv = np.ascontiguousarray(fwd_winner, dtype=np.int64)
        cdef const int64_t[::1] rv_ = np.ascontiguousarray(ret_winner, dtype=np.int64)
        cdef double[:, ::1] out = rec_out
        cdef double[:, ::1] rates_v = self._rv
        cdef double[:, ::1] rates_w = self._rw
        cdef double[:, ::1] wfb = self._fb

        cdef double dt = self.dt
        cdef int64_t k0 = first_tick
        cdef int64_t rec_n = rec_every
        cdef Py_ssize_t written = 0, cap = rec_out.shape[0]

        # local state copies; written back only when the window completes,
        # matching the reference (a failed call leaves the old state)
        cdef V3 stp = self.st_p, stv = self.st_v, stw = self.st_w
        cdef Q4 stq = self.st_q
        cdef V3 rfp = self.rf_p, rfv = self.rf_v, rfw = self.rf_w
        cdef Q4 rfq = self.rf_q
        cdef V3 vhp = self.vh_p, vhv = self.vh_v, vhw = self.vh_w
        cdef Q4 vhq = self.vh_q

        cdef Py_ssize_t j
        cdef int64_t k, wj, fj, slot, sl
        cdef V3 fb_f, fb_t, fbh_f, fbh_t, fh_f, fh_t
        cdef V3 pos, rvec, al, aa, v_new, w_new, v_m, p_next, n_hat
        cdef Q4 r_next, q
        cdef V3 db_p, v_ref, w_ref, v_cmd, w_cmd, v_world
        cdef Q4 db_q
        cdef V3 cf, ct, tip_p, tip_v, f_w, v_t, cf_b, ct_b, lever, we_f, we_t
        cdef V3 dvec, e_p, e_r, e_v, e_w, tmp, a_lin, a_ang, a_world
        cdef Q4 rel
        cdef V3 rec_f, rec_t, int_f, int_t, wfb_f, wfb_t, sv
        cdef double s, pn, ang, out_r, rr, fn, tn, v_n, approach
        cdef double depth, f_n_mag, speed, ratio, f_t_mag, sn

        for j in range(n):
            k = k0 + j

            # return channel: wrench sent at winner tick, or silence
            wj = rv_[j]
            if wj >= 0:
                sl = wj & _MASK
                fb_f = v3(wfb[sl, 0], wfb[sl, 1], wfb[sl, 2])
                fb_t = v3(wfb[sl, 3], wfb[sl, 4], wfb[sl, 5])
            else:
                fb_f = v3(0.0, 0.0, 0.0)
                fb_t = v3(0.0, 0.0, 0.0)

            if mv[j] == _POSE:
                # clamp_pose, then pin the handle with zero twist
                pos = v3(cv[j, 0], cv[j, 1], cv[j, 2])
                rvec = v3(cv[j, 3], cv[j, 4], cv[j, 5])
                pn = v_norm(pos)
                if isfinite(self.ws_radius) and pn > self.ws_radius:
                    s = self.ws_radius / pn
                    pos = v3(s * pos.x, s * pos.y, s * pos.z)
                ang = v_norm(rvec)
                if ang > self.rot_limit:
                    s = self.rot_limit / ang
                    rvec = v3(s * rvec.x, s * rvec.y, s * rvec.z)
                if ang > 0.0:
                    q = exp_so3_c(rvec)
                else:
                    q = q4(1.0, 0.0, 0.0, 0.0)
                stp = pos
                stq = q
                stv = v3(0.0, 0.0, 0.0)
                stw = v3(0.0, 0.0, 0.0)
                # feedback re-expressed in the (new) handle frame
                fbh_f = rotate_inv_c(stq, fb_f)
                fbh_t = rotate_inv_c(stq, fb_t)
                # grasp wrench reconstruction at zero accel and zero twist
                fh_f = v3(
                    self.m_adm[0] * 0.0 + self.d_adm[0] * 0.0 - fbh_f.x,
                    self.m_adm[1] * 0.0 + self.d_adm[1] * 0.0 - fbh_f.y,
                    self.m_adm[2] * 0.0 + self.d_adm[2] * 0.0 - fbh_f.z,
                )
                fh_t = v3(
                    self.m_adm[3] * 0.0 + self.d_adm[3] * 0.0 - fbh_t.x,
                    self.m_adm[4] * 0.0 + self.d_adm[4] * 0.0 - fbh_t.y,
                    self.m_adm[5] * 0.0 + self.d_adm[5] * 0.0 - fbh_t.z,
                )
            else:
                # clamp_command
                cf = v3(cv[j, 0], cv[j, 1], cv[j, 2])
                ct = v3(cv[j, 3], cv[j, 4], cv[j, 5])
                fn = v_norm(cf)
                if fn > self.f_limit:
                    s = self.f_limit / fn
                    cf = v3(s * cf.x, s * cf.y, s * cf.z)
                tn = v_norm(ct)
                if tn > self.t_limit:
                    s = self.t_limit / tn
                    ct = v3(s * ct.x, s * ct.y, s * ct.z)
                # feedback in the pre-step handle frame
                fbh_f = rotate_inv_c(stq, fb_f)
                fbh_t = rotate_inv_c(stq, fb_t)
                # station_accel on the combined body
                al = v3(
                    (cf.x + fbh_f.x - self.d_tot[0] * stv.x) / self.m_tot[0],
                    (cf.y + fbh_f.y - self.d_tot[1] * stv.y) / self.m_tot[1],
                    (cf.z + fbh_f.z - self.d_tot[2] * stv.z) / self.m_tot[2],
                )
                aa = v3(
                    (ct.x + fbh_t.x - self.d_tot[3] * stw.x) / self.m_tot[3],
                    (ct.y + fbh_t.y - self.d_tot[4] * stw.y) / self.m_tot[4],
                    (ct.z + fbh_t.z - self.d_tot[5] * stw.z) / self.m_tot[5],
                )
                # grasp wrench from the pre-step state and that accel
                fh_f = v3(
                    self.m_adm[0] * al.x + self.d_adm[0] * stv.x - fbh_f.x,
                    self.m_adm[1] * al.y + self.d_adm[1] * stv.y - fbh_f.y,
                    self.m_adm[2] * al.z + self.d_adm[2] * stv.z - fbh_f.z,
                )
                fh_t = v3(
                    self.m_adm[3] * aa.x + self.d_adm[3] * stw.x - fbh_t.x,
                    self.m_adm[4] * aa.y + self.d_adm[4] * stw.y - fbh_t.y,
                    self.m_adm[5] * aa.z + self.d_adm[5] * stw.z - fbh_t.z,
                )
                # station_step: velocity first, then pose with the new velocity
                v_new = v3(stv.x + dt * al.x, stv.y + dt * al.y, stv.z + dt * al.z)
                w_new = v3(stw.x + dt * aa.x, stw.y + dt * aa.y, stw.z + dt * aa.z)
                v_m = rotate_c(stq, v_new)
                # _clamp_position: kill outward radial velocity at the sphere
                p_next = v3(stp.x + dt * v_m.x, stp.y + dt * v_m.y, stp.z + dt * v_m.z)
                if not ((not isfinite(self.ws_radius)) or v_norm(p_next) <= self.ws_radius):
                    pn = v_norm(stp)
                    if pn > 0.0:
                        s = 1.0 / pn
                        n_hat = v3(s * stp.x, s * stp.y, s * stp.z)
                    else:
                        s = 1.0 / v_norm(p_next)
                        n_hat = v3(s * p_next.x, s * p_next.y, s * p_next.z)
                    out_r = v_dot(v_m, n_hat)
                    if out_r > 0.0:
                        v_m = v3(
                            v_m.x - out_r * n_hat.x,
                            v_m.y - out_r * n_hat.y,
                            v_m.z - out_r * n_hat.z,
                        )
                        p_next = v3(
                            stp.x + dt * v_m.x, stp.y + dt * v_m.y, stp.z + dt * v_m.z
                        )
                    rr = v_norm(p_next)
                    if rr > self.ws_radius:
                        s = self.ws_radius / rr
                        p_next = v3(s * p_next.x, s * p_next.y, s * p_next.z)
                v_new = rotate_inv_c(stq, v_m)
                # _clamp_rotation: kill the rate that grows past the limit
                r_next = integrate_rotation_c(stq, w_new, dt)
                if q_angle_c(r_next) > self.rot_limit:
                    sn = sqrt(stq.x * stq.x + stq.y * stq.y + stq.z * stq.z)
                    if sn > 0.0:
                        n_hat = v3(stq.x / sn, stq.y / sn, stq.z / sn)
                        out_r = v_dot(w_new, n_hat)
                        if out_r > 0.0:
                            w_new = v3(
                                w_new.x - out_r * n_hat.x,
                                w_new.y - out_r * n_hat.y,
                                w_new.z - out_r * n_hat.z,
                            )
                            r_next = integrate_rotation_c(stq, w_new, dt)
                    ang = q_angle_c(r_next)
                    if ang > self.rot_limit:
                        sn = sqrt(
                            r_next.x * r_next.x + r_next.y * r_next.y + r_next.z * r_next.z
                        )
                        n_hat = v3(r_next.x / sn, r_next.y / sn, r_next.z / sn)
                        r_next = exp_so3_c(
                            v3(
                                self.rot_limit * n_hat.x,
                                self.rot_limit * n_hat.y,
                                self.rot_limit * n_hat.z,
                            )
                        )
                if not (
                    v_finite(p_next) and q_finite(r_next)
                    and v_finite(v_new) and v_finite(w_new)
                ):
                    raise NonFiniteState(
                        "station integration produced non-finite values", tick=k
                    )
                stp = p_next
                stq = r_next
                stv = v_new
                stw = w_new

            # rate law reads the post-step handle, deadbanded
            db_p = stp
            db_q = stq
            if self.db_on:
                if v_norm(db_p) < self.db_pos:
                    db_p = v3(0.0, 0.0, 0.0)
                if q_angle_c(db_q) < self.db_rot:
                    db_q = q4(1.0, 0.0, 0.0, 0.0)
            v_ref = v3(self.v_max * db_p.x, self.v_max * db_p.y, self.v_max * db_p.z)
            sv = skew_vee_c(db_q)
            w_ref = v3(self.om_max * sv.x, self.om_max * sv.y, self.om_max * sv.z)

            # forward channel: current send stored first, then delivery
            slot = k & _MASK
            rates_v[slot, 0] = v_ref.x
            rates_v[slot, 1] = v_ref.y
            rates_v[slot, 2] = v_ref.z
            rates_w[slot, 0] = w_ref.x
            rates_w[slot, 1] = w_ref.y
            rates_w[slot, 2] = w_ref.z
            fj = fv[j]
            if fj >= 0:
                sl = fj & _MASK
                v_cmd = v3(rates_v[sl, 0], rates_v[sl, 1], rates_v[sl, 2])
                w_cmd = v3(rates_w[sl, 0], rates_w[sl, 1], rates_w[sl, 2])
            else:
                v_cmd = v3(0.0, 0.0, 0.0)
                w_cmd = v3(0.0, 0.0, 0.0)

            # integrate_references
            v_world = rotate_c(rfq, v_cmd)
            rfp = v3(
                rfp.x + dt * v_world.x,
                rfp.y + dt * v_world.y,
                rfp.z + dt * v_world.z,
            )
            rfq = integrate_rotation_c(rfq, w_cmd, dt)
            rfv = v_world
            rfw = w_cmd

            # contact at the pre-step tip
            cf_b = v3(0.0, 0.0, 0.0)
            ct_b = v3(0.0, 0.0, 0.0)
            if self.has_wall:
                tmp = rotate_c(vhq, self.r_st)
                tip_p = v3(vhp.x + tmp.x, vhp.y + tmp.y, vhp.z + tmp.z)
                tmp = rotate_c(vhq, v_cross(vhw, self.r_st))
                tip_v = v3(vhv.x + tmp.x, vhv.y + tmp.y, vhv.z + tmp.z)
                dvec = v3(tip_p.x - self.w_pt.x, tip_p.y - self.w_pt.y, tip_p.z - self.w_pt.z)
                depth = -v_dot(dvec, self.w_n)
                if depth > 0.0:
                    v_n = v_dot(tip_v, self.w_n)
                    if v_n < 0.0:
                        approach = -v_n
                    else:
                        approach = 0.0
                    f_n_mag = self.w_kn * depth + self.w_dn * approach
                    f_w = v3(f_n_mag * self.w_n.x, f_n_mag * self.w_n.y, f_n_mag * self.w_n.z)
                    v_t = v3(
                        tip_v.x - v_n * self.w_n.x,
                        tip_v.y - v_n * self.w_n.y,
                        tip_v.z - v_n * self.w_n.z,
                    )
                    speed = v_norm(v_t)
                    if speed > 0.0 and self.w_mu > 0.0:
                        if self.w_veps > 0.0:
                            ratio = tanh(speed / self.w_veps)
                        else:
                            ratio = 1.0
                        f_t_mag = self.w_mu * f_n_mag * ratio
                        s = f_t_mag / speed
                        f_w = v3(f_w.x - s * v_t.x, f_w.y - s * v_t.y, f_w.z - s * v_t.z)
                    cf_b = rotate_inv_c(vhq, f_w)

            # external wrench: tip force moved to the body
            lever = v_cross(self.r_st, cf_b)
            we_f = cf_b
            we_t = v3(ct_b.x + lever.x, ct_b.y + lever.y, ct_b.z + lever.z)

            # impedance_step against the just-updated reference
            dvec = v3(vhp.x - rfp.x, vhp.y - rfp.y, vhp.z - rfp.z)
            e_p = rotate_inv_c(vhq, dvec)
            rel = q_compose_c(q4(rfq.w, -rfq.x, -rfq.y, -rfq.z), vhq)
            e_r = skew_vee_c(rel)
            dvec = v3(vhv.x - rfv.x, vhv.y - rfv.y, vhv.z - rfv.z)
            e_v = rotate_inv_c(vhq, dvec)
            tmp = rotate_inv_c(rel, rfw)
            e_w = v3(vhw.x - tmp.x, vhw.y - tmp.y, vhw.z - tmp.z)
            a_lin = v3(
                (we_f.x - self.d_v[0] * e_v.x - self.k_v[0] * e_p.x) / self.m_v[0],
                (we_f.y - self.d_v[1] * e_v.y - self.k_v[1] * e_p.y) / self.m_v[1],
                (we_f.z - self.d_v[2] * e_v.z - self.k_v[2] * e_p.z) / self.m_v[2],
            )
            a_ang = v3(
                (we_t.x - self.d_v[3] * e_w.x - self.k_v[3] * e_r.x) / self.m_v[3],
                (we_t.y - self.d_v[4] * e_w.y - self.k_v[4] * e_r.y) / self.m_v[4],
                (we_t.z - self.d_v[5] * e_w.z - self.k_v[5] * e_r.z) / self.m_v[5],
            )
            a_world = rotate_c(vhq, a_lin)
            v_new = v3(
                vhv.x + dt * a_world.x, vhv.y + dt * a_world.y, vhv.z + dt * a_world.z
            )
            w_new = v3(vhw.x + dt * a_ang.x, vhw.y + dt * a_ang.y, vhw.z + dt * a_ang.z)
            p_next = v3(vhp.x + dt * v_new.x, vhp.y + dt * v_new.y, vhp.z + dt * v_new.z)
            r_next = integrate_rotation_c(vhq, w_new, dt)
            if not (
                v_finite(p_next) and v_finite(v_new)
                and q_finite(r_next) and v_finite(w_new)
            ):
                raise NonFiniteState(
                    "vehicle integration produced non-finite values", tick=k
                )
            vhp = p_next
            vhv = v_new
            vhq = r_next
            vhw = w_new

            # feedback from the raw (undeadbanded) handle + measured contact
            rec_f = v3(
                -(self.k_rec[0] * stp.x),
                -(self.k_rec[1] * stp.y),
                -(self.k_rec[2] * stp.z),
            )
            sv = skew_vee_c(stq)
            rec_t = v3(
                -(self.k_rec[3] * sv.x),
                -(self.k_rec[4] * sv.y),
                -(self.k_rec[5] * sv.z),
            )
            int_f = cf_b
            tmp = v_cross(self.pp_tool, cf_b)
            int_t = v3(ct_b.x + tmp.x, ct_b.y + tmp.y, ct_b.z + tmp.z)
            wfb_f = v3(rec_f.x + int_f.x, rec_f.y + int_f.y, rec_f.z + int_f.z)
            wfb_t = v3(rec_t.x + int_t.x, rec_t.y + int_t.y, rec_t.z + int_t.z)
            wfb[slot, 0] = wfb_f.x
            wfb[slot, 1] = wfb_f.y
            wfb[slot, 2] = wfb_f.z
            wfb[slot, 3] = wfb_t.x
            wfb[slot, 4] = wfb_t.y
            wfb[slot, 5] = wfb_t.z

            if k % rec_n == 0:
                if written >= cap:
                    raise ValueError("rec_out has fewer rows than sampled ticks")
                out[written, 0] = k * dt
                out[written, 1] = stp.x
                out[written, 2] = stp.y
                out[written, 3] = stp.z
                out[written, 4] = stq.w
                out[written, 5] = stq.x
                out[written, 6] = stq.y
                out[written, 7] = stq.z
                out[written, 8] = stv.x
                out[written, 9] = stv.y
                out[written, 10] = stv.z
                out[written, 11] = stw.x
                out[written, 12] = stw.y
                out[written, 13] = stw.z
                out[written, 14] = rfp.x
                out[written, 15] = rfp.y
                out[written, 16] = rfp.z
                out[written, 17] = rfq.w
                out[written, 18] = rfq.x
                out[written, 19] = rfq.y
                out[written, 20] = rfq.z
                out[written, 21] = rfv.x
                out[written, 22] = rfv.y
                out[written, 23] = rfv.z
                out[written, 24] = rfw.x
                out[written, 25] = rfw.y
                out[written, 26] = rfw.z
                out[written, 27] = vhp.x
                out[written, 28] = vhp.y
                out[written, 29] = vhp.z
                out[written, 30] = vhq.w
                out[written, 31] = vhq.x
                out[written, 32] = vhq.y
                out[written, 33] = vhq.z
                out[written, 34] = vhv.x
                out[written, 35] = vhv.y
                out[written, 36] = vhv.z
                out[written, 37] = vhw.x
                out[written, 38] = vhw.y
                out[written, 39] = vhw.z
                out[written, 40] = cf_b.x
                out[written, 41] = cf_b.y
                out[written, 42] = cf_b.z
                out[written, 43] = ct_b.x
                out[written, 44] = ct_b.y
                out[written, 45] = ct_b.z
                out[written, 46] = rec_f.x
                out[written, 47] = rec_f.y
                out[written, 48] = rec_f.z
                out[written, 49] = rec_t.x
                out[written, 50] = rec_t.y
                out[written, 51] = rec_t.z
                out[written, 52] = int_f.x
                out[written, 53] = int_f.y
                out[written, 54] = int_f.z
                out[written, 55] = int_t.x
                out[written, 56] = int_t.y
                out[written, 57] = int_t.z
                out[written, 58] = wfb_f.x
                out[written, 59] = wfb_f.y
                out[written, 60] = wfb_f.z
                out[written, 61] = wfb_t.x
                out[written, 62] = wfb_t.y
                out[written, 63] = wfb_t.z
                out[written, 64] = fh_f.x
                out[written, 65] = fh_f.y
                out[written, 66] = fh_f.z
                out[written, 67] = fh_t.x
                out[written, 68] = fh_t.y
                out[written, 69] = fh_t.z
                written += 1

        self.st_p = stp
        self.st_q = stq
        self.st_v = stv
        self.st_w = stw
        self.rf_p = rfp
        self.rf_q = rfq
        self.rf_v = rfv
        self.rf_w = rfw
        self.vh_p = vhp
        self.vh_q = vhq
        self.vh_v = vhv
        self.vh_w = vhw
        return written

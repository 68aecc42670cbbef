"""Pure-Python kernels for the per-vehicle closed-loop derivative.

This module is the fallback twin of the compiled extension
``auvformation.kernels._core``.  Both expose the same functions with the
same array layouts; the test suite asserts they agree to machine
precision and ``benchmarks/bench_kernels.py`` compares their speed.

Array layouts (float64 throughout):

* parameter row, length 17::

      [m11, m22, m25, m33, m34, m44, m55,
       d11, d22, d25, d33, d34, d43, d44, d52, d55, W]

* per-vehicle state row, length 37::

      [eta(5), nu(5), V_hat_c(3), theta_hat_q(9), theta_hat_r(9),
       fil_u(2), fil_theta(2), fil_psi(2)]

  where eta = [x, y, z, theta, psi], nu = [u, v, w, q, r] and each
  filter block is (value, rate) of the second-order reference filter.

* component-terms row, length 29::

      [F_u, phi_u(3), X_v, Y_v, X_w, Y_w, G, F_q, phi_q(9), F_r, phi_r(9)]

* gain vector, length 14::

      [k_u, k_c, c_u, k_theta, k_q, k_d, lambda_q, c_q,
       k_psi, k_r, lambda_r, c_r, eps_smooth, omega_f]

  eps_smooth == 0 selects the exact sign function, otherwise
  sign(x) is replaced by tanh(x / eps_smooth).

Convention: the body-frame rate of change of the current velocity uses
the pitch/yaw rates only (the roll rate is outside the 5-DOF model), so
nu_c_dot = [r*v_c - q*w_c, -r*u_c, q*u_c, 0, 0].  The regressor blocks
fold these terms in; the matrix-form cross-check in
``auvformation.vehicle`` applies the same convention.
"""

from __future__ import annotations

import math

import numpy as np

# index helpers for the 37-wide state row
ETA = slice(0, 5)
NU = slice(5, 10)
VHAT = slice(10, 13)
THQ = slice(13, 22)
THR = slice(22, 31)
FIL_U = slice(31, 33)
FIL_TH = slice(33, 35)
FIL_PSI = slice(35, 37)

STATE_WIDTH = 37
TERMS_WIDTH = 29
N_PARAMS = 17
N_GAINS = 14


def _sgn(x: float, eps: float) -> float:
    if eps > 0.0:
        return math.tanh(x / eps)
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def _wrap(a: float) -> float:
    """Wrap angle to (-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))


def current_regressor(v_c) -> np.ndarray:
    """Quadratic regressor of the inertial current: [V, V_i^2, V_i V_j]."""
    vx, vy, vz = float(v_c[0]), float(v_c[1]), float(v_c[2])
    return np.array(
        [vx, vy, vz, vx * vx, vy * vy, vz * vz, vx * vy, vx * vz, vy * vz]
    )


def _phi_pair(ai, aj, vi, vj):
    """9-regressor of a product of relative velocities.

    Dotting the result with current_regressor(V_c) gives
    (vi - vi_c)*(vj - vj_c) - vi*vj, where vi_c = ai . V_c.
    """
    a1, a2, a3 = ai
    b1, b2, b3 = aj
    return (
        -vj * a1 - vi * b1,
        -vj * a2 - vi * b2,
        -vj * a3 - vi * b3,
        a1 * b1,
        a2 * b2,
        a3 * b3,
        a1 * b2 + a2 * b1,
        a1 * b3 + a3 * b1,
        a2 * b3 + a3 * b2,
    )


def component_terms_into(params, eta, nu, v_current, out) -> None:
    """Fill ``out`` (length 29) with the component-form terms at one state.

    F_u, F_q, F_r take the absolute velocities; every current effect is
    carried by the regressor blocks and by the u_c terms inside the
    sway/heave coefficients.
    """
    (m11, m22, m25, m33, m34, m44, m55,
     d11, d22, d25, d33, d34, d43, d44, d52, d55, W) = params

    theta = eta[3]
    psi = eta[4]
    u, v, w, q, r = nu[0], nu[1], nu[2], nu[3], nu[4]
    vx, vy, vz = v_current[0], v_current[1], v_current[2]

    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)

    # columns of the body-to-inertial rotation
    ru = (cp * ct, sp * ct, -st)
    rv = (-sp, cp, 0.0)
    rw = (cp * st, sp * st, ct)

    u_c = ru[0] * vx + ru[1] * vy + ru[2] * vz
    u_r = u - u_c

    det_vr = m22 * m55 - m25 * m25
    det_zq = m33 * m44 - m34 * m34

    out[0] = -(d11 * u + q * (m34 * q + m33 * w) - r * (m25 * r + m22 * v)) / m11

    cw = q * (m33 / m11 - 1.0)
    cv = r * (1.0 - m22 / m11)
    cu = d11 / m11
    out[1] = cw * rw[0] + cv * rv[0] + cu * ru[0]
    out[2] = cw * rw[1] + cv * rv[1] + cu * ru[1]
    out[3] = cw * rw[2] + cv * rv[2] + cu * ru[2]

    out[4] = -u_c - (m55 * (d25 + m11 * u_r) - m25 * (d55 + m25 * u_r)) / det_vr
    out[5] = -(d22 * m55 - m25 * (d52 - u_r * (m11 - m22))) / det_vr
    out[6] = u_c - (m44 * (d34 - m11 * u_r) - m34 * (d44 - m34 * u_r)) / det_zq
    out[7] = -(d33 * m44 - m34 * (d43 + u_r * (m11 - m33))) / det_zq
    out[8] = m34 * W * st / det_zq

    out[9] = (
        m34 * (d34 * q + d33 * w - q * u * (m11 - m33))
        - m33 * (d44 * q + d43 * w + W * st + u * w * (m11 - m33))
    ) / det_zq

    phi_u9 = (-ru[0], -ru[1], -ru[2], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    phi_v9 = (-rv[0], -rv[1], -rv[2], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    phi_w9 = (-rw[0], -rw[1], -rw[2], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    phi_uw = _phi_pair(ru, rw, u, w)
    phi_uv = _phi_pair(ru, rv, u, v)

    kq = m11 - m33
    for i in range(9):
        out[10 + i] = (
            m34 * (d33 * phi_w9[i] - phi_u9[i] * q * kq)
            - m33 * (d43 * phi_w9[i] + phi_uw[i] * kq)
        ) / det_zq

    out[19] = (
        m25 * (d25 * r + d22 * v + r * u * (m11 - m22))
        - m22 * (d55 * r + d52 * v - u * v * (m11 - m22))
    ) / det_vr

    kr = m11 - m22
    for i in range(9):
        out[20 + i] = (
            m25 * (d22 * phi_v9[i] + phi_u9[i] * r * kr)
            - m22 * (d52 * phi_v9[i] - phi_uv[i] * kr)
        ) / det_vr


def fleet_rhs(params, state, v_current, raw_cmd, gains, forces_in, out):
    """Time derivative of the stacked vehicle states.

    Parameters
    ----------
    params : (n, 17) parameter rows.
    state : (n, 37) per-vehicle state rows.
    v_current : (3,) inertial ocean current.
    raw_cmd : (n, 3) unfiltered guidance commands [u_raw, theta_raw, psi_raw]
        feeding the reference filters.
    gains : (14,) gain vector, see module docstring.
    forces_in : (n, 3) or None.  If given, these (f_u, t_q, t_r) are used
        (zero-order-hold mode); otherwise the autopilot laws are evaluated
        at the current state (continuous mode).
    out : (n, 37) output array, overwritten.

    Returns the applied forces as an (n, 3) array.
    """
    n = state.shape[0]
    (k_u, k_c, c_u, k_theta, k_q, k_d, lam_q, c_q,
     k_psi, k_r, lam_r, c_r, eps, om_f) = gains

    vx, vy, vz = float(v_current[0]), float(v_current[1]), float(v_current[2])
    theta_v = (vx, vy, vz, vx * vx, vy * vy, vz * vz,
               vx * vy, vx * vz, vy * vz)

    forces = np.empty((n, 3))
    terms = np.empty(TERMS_WIDTH)

    for i in range(n):
        row = state[i]
        prm = params[i]
        theta = row[3]
        psi = row[4]
        u, v, w, q, r = row[5], row[6], row[7], row[8], row[9]

        ct, st = math.cos(theta), math.sin(theta)
        cp, sp = math.cos(psi), math.sin(psi)
        if ct <= 0.0:
            raise FloatingPointError("pitch angle left the domain |theta| < pi/2")

        v_c = (-sp) * vx + cp * vy
        w_c = (cp * st) * vx + (sp * st) * vy + ct * vz

        component_terms_into(prm, row[ETA], row[NU], v_current, terms)

        f_u_terms = terms[0]
        phi_u = terms[1:4]
        x_v, y_v, x_w, y_w = terms[4], terms[5], terms[6], terms[7]
        g_theta = terms[8]
        f_q_terms = terms[9]
        phi_q = terms[10:19]
        f_r_terms = terms[19]
        phi_r = terms[20:29]

        # reference filters (critically damped second order)
        ud, ud_dot = row[31], row[32]
        thd, thd_dot = row[33], row[34]
        psd, psd_dot = row[35], row[36]
        ud_ddot = om_f * om_f * (raw_cmd[i, 0] - ud) - 2.0 * om_f * ud_dot
        thd_ddot = om_f * om_f * (raw_cmd[i, 1] - thd) - 2.0 * om_f * thd_dot
        psd_ddot = om_f * om_f * _wrap(raw_cmd[i, 2] - psd) - 2.0 * om_f * psd_dot

        # tracking errors
        u_t = u - ud
        th_t = theta - thd
        q_t = q - thd_dot
        s_q = q_t + lam_q * th_t
        ps_t = _wrap(psi - psd)
        ps_t_dot = r / ct - psd_dot
        s_r = ps_t_dot + lam_r * ps_t

        if forces_in is None:
            phi_u_vhat = (phi_u[0] * row[10] + phi_u[1] * row[11]
                          + phi_u[2] * row[12])
            f_u = (ud_dot - f_u_terms - phi_u_vhat
                   - k_u * u_t - k_c * _sgn(u_t, eps))
            phi_q_that = 0.0
            phi_r_that = 0.0
            for j in range(9):
                phi_q_that += phi_q[j] * row[13 + j]
                phi_r_that += phi_r[j] * row[22 + j]
            t_q = (thd_ddot - f_q_terms - phi_q_that - lam_q * q_t
                   - k_theta * th_t - k_q * s_q - k_d * _sgn(s_q, eps))
            t_r = (-f_r_terms - phi_r_that - r * (st / ct) * q
                   + ct * (psd_ddot - lam_r * ps_t_dot - k_psi * ps_t
                           - k_r * s_r - k_d * _sgn(s_r, eps)))
        else:
            f_u, t_q, t_r = forces_in[i, 0], forces_in[i, 1], forces_in[i, 2]

        forces[i, 0] = f_u
        forces[i, 1] = t_q
        forces[i, 2] = t_r

        o = out[i]
        # kinematics
        o[0] = u * cp * ct - v * sp + w * cp * st
        o[1] = u * ct * sp + v * cp + w * sp * st
        o[2] = -u * st + w * ct
        o[3] = q
        o[4] = r / ct

        # dynamics (component form)
        phi_u_vc = phi_u[0] * vx + phi_u[1] * vy + phi_u[2] * vz
        phi_q_vc = 0.0
        phi_r_vc = 0.0
        for j in range(9):
            phi_q_vc += phi_q[j] * theta_v[j]
            phi_r_vc += phi_r[j] * theta_v[j]
        o[5] = f_u + f_u_terms + phi_u_vc
        o[6] = x_v * r + y_v * (v - v_c)
        o[7] = x_w * q + y_w * (w - w_c) + g_theta
        o[8] = t_q + f_q_terms + phi_q_vc
        o[9] = t_r + f_r_terms + phi_r_vc

        # observers
        o[10] = c_u * phi_u[0] * u_t
        o[11] = c_u * phi_u[1] * u_t
        o[12] = c_u * phi_u[2] * u_t
        for j in range(9):
            o[13 + j] = c_q * phi_q[j] * s_q
            o[22 + j] = c_r * phi_r[j] * s_r

        # reference filter states
        o[31] = ud_dot
        o[32] = ud_ddot
        o[33] = thd_dot
        o[34] = thd_ddot
        o[35] = psd_dot
        o[36] = psd_ddot

    return forces

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``auvformation.kernels._pure``.

Same functions, same array layouts; see the pure module for the
documentation.  The test suite asserts bit-level agreement between the
two backends on random inputs.
"""

from libc.math cimport atan2, cos, sin, sqrt, tan, tanh

import numpy as np

STATE_WIDTH = 37
TERMS_WIDTH = 29
N_PARAMS = 17
N_GAINS = 14


cdef inline double _sgn(double x, double eps) nogil:
    if eps > 0.0:
        return tanh(x / eps)
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


cdef inline double _wrap(double a) nogil:
    return atan2(sin(a), cos(a))


cdef int _terms(const double* p, const double* eta, const double* nu,
                const double* vc, double* out) nogil:
    cdef double m11 = p[0], m22 = p[1], m25 = p[2], m33 = p[3]
    cdef double m34 = p[4], m44 = p[5], m55 = p[6]
    cdef double d11 = p[7], d22 = p[8], d25 = p[9], d33 = p[10]
    cdef double d34 = p[11], d43 = p[12], d44 = p[13], d52 = p[14]
    cdef double d55 = p[15], W = p[16]

    cdef double theta = eta[3], psi = eta[4]
    cdef double u = nu[0], v = nu[1], w = nu[2], q = nu[3], r = nu[4]
    cdef double vx = vc[0], vy = vc[1], vz = vc[2]

    cdef double ct = cos(theta), st = sin(theta)
    cdef double cp = cos(psi), sp = sin(psi)

    cdef double ru0 = cp * ct, ru1 = sp * ct, ru2 = -st
    cdef double rv0 = -sp, rv1 = cp, rv2 = 0.0
    cdef double rw0 = cp * st, rw1 = sp * st, rw2 = ct

    cdef double u_c = ru0 * vx + ru1 * vy + ru2 * vz
    cdef double u_r = u - u_c

    cdef double det_vr = m22 * m55 - m25 * m25
    cdef double det_zq = m33 * m44 - m34 * m34

    out[0] = -(d11 * u + q * (m34 * q + m33 * w) - r * (m25 * r + m22 * v)) / m11

    cdef double cw = q * (m33 / m11 - 1.0)
    cdef double cv = r * (1.0 - m22 / m11)
    cdef double cu = d11 / m11
    out[1] = cw * rw0 + cv * rv0 + cu * ru0
    out[2] = cw * rw1 + cv * rv1 + cu * ru1
    out[3] = cw * rw2 + cv * rv2 + cu * ru2

    out[4] = -u_c - (m55 * (d25 + m11 * u_r) - m25 * (d55 + m25 * u_r)) / det_vr
    out[5] = -(d22 * m55 - m25 * (d52 - u_r * (m11 - m22))) / det_vr
    out[6] = u_c - (m44 * (d34 - m11 * u_r) - m34 * (d44 - m34 * u_r)) / det_zq
    out[7] = -(d33 * m44 - m34 * (d43 + u_r * (m11 - m33))) / det_zq
    out[8] = m34 * W * st / det_zq

    out[9] = (
        m34 * (d34 * q + d33 * w - q * u * (m11 - m33))
        - m33 * (d44 * q + d43 * w + W * st + u * w * (m11 - m33))
    ) / det_zq

    cdef double phi_u9[9]
    cdef double phi_v9[9]
    cdef double phi_w9[9]
    cdef double phi_uw[9]
    cdef double phi_uv[9]
    cdef int i
    for i in range(9):
        phi_u9[i] = 0.0
        phi_v9[i] = 0.0
        phi_w9[i] = 0.0
    phi_u9[0] = -ru0; phi_u9[1] = -ru1; phi_u9[2] = -ru2
    phi_v9[0] = -rv0; phi_v9[1] = -rv1; phi_v9[2] = -rv2
    phi_w9[0] = -rw0; phi_w9[1] = -rw1; phi_w9[2] = -rw2

    phi_uw[0] = -w * ru0 - u * rw0
    phi_uw[1] = -w * ru1 - u * rw1
    phi_uw[2] = -w * ru2 - u * rw2
    phi_uw[3] = ru0 * rw0
    phi_uw[4] = ru1 * rw1
    phi_uw[5] = ru2 * rw2
    phi_uw[6] = ru0 * rw1 + ru1 * rw0
    phi_uw[7] = ru0 * rw2 + ru2 * rw0
    phi_uw[8] = ru1 * rw2 + ru2 * rw1

    phi_uv[0] = -v * ru0 - u * rv0
    phi_uv[1] = -v * ru1 - u * rv1
    phi_uv[2] = -v * ru2 - u * rv2
    phi_uv[3] = ru0 * rv0
    phi_uv[4] = ru1 * rv1
    phi_uv[5] = ru2 * rv2
    phi_uv[6] = ru0 * rv1 + ru1 * rv0
    phi_uv[7] = ru0 * rv2 + ru2 * rv0
    phi_uv[8] = ru1 * rv2 + ru2 * rv1

    cdef double kq = m11 - m33
    cdef double kr = m11 - m22
    for i in range(9):
        out[10 + i] = (
            m34 * (d33 * phi_w9[i] - phi_u9[i] * q * kq)
            - m33 * (d43 * phi_w9[i] + phi_uw[i] * kq)
        ) / det_zq

    out[19] = (
        m25 * (d25 * r + d22 * v + r * u * (m11 - m22))
        - m22 * (d55 * r + d52 * v - u * v * (m11 - m22))
    ) / det_vr

    for i in range(9):
        out[20 + i] = (
            m25 * (d22 * phi_v9[i] + phi_u9[i] * r * kr)
            - m22 * (d52 * phi_v9[i] - phi_uv[i] * kr)
        ) / det_vr
    return 0


def component_terms_into(double[::1] params, double[::1] eta, double[::1] nu,
                         double[::1] v_current, double[::1] out):
    """Fill ``out`` (length 29) with the component-form terms."""
    _terms(&params[0], &eta[0], &nu[0], &v_current[0], &out[0])


def fleet_rhs(double[:, ::1] params, double[:, ::1] state,
              double[::1] v_current, double[:, ::1] raw_cmd,
              double[::1] gains, forces_in, double[:, ::1] out):
    """Time derivative of the stacked vehicle states (see the pure twin)."""
    cdef Py_ssize_t n = state.shape[0]
    cdef double k_u = gains[0], k_c = gains[1], c_u = gains[2]
    cdef double k_theta = gains[3], k_q = gains[4], k_d = gains[5]
    cdef double lam_q = gains[6], c_q = gains[7]
    cdef double k_psi = gains[8], k_r = gains[9], lam_r = gains[10]
    cdef double c_r = gains[11], eps = gains[12], om_f = gains[13]

    cdef double vx = v_current[0], vy = v_current[1], vz = v_current[2]
    cdef double theta_v[9]
    theta_v[0] = vx; theta_v[1] = vy; theta_v[2] = vz
    theta_v[3] = vx * vx; theta_v[4] = vy * vy; theta_v[5] = vz * vz
    theta_v[6] = vx * vy; theta_v[7] = vx * vz; theta_v[8] = vy * vz

    forces = np.empty((n, 3))
    cdef double[:, ::1] forces_mv = forces
    cdef double[:, ::1] fin
    cdef bint use_forces = forces_in is not None
    if use_forces:
        fin = forces_in

    cdef double terms[29]
    cdef Py_ssize_t i, j
    cdef double theta, psi, u, v, w, q, r
    cdef double ct, st, cp, sp, v_c, w_c
    cdef double ud, ud_dot, thd, thd_dot, psd, psd_dot
    cdef double ud_ddot, thd_ddot, psd_ddot
    cdef double u_t, th_t, q_t, s_q, ps_t, ps_t_dot, s_r
    cdef double f_u, t_q, t_r
    cdef double phi_u_vhat, phi_q_that, phi_r_that
    cdef double phi_u_vc, phi_q_vc, phi_r_vc

    for i in range(n):
        theta = state[i, 3]
        psi = state[i, 4]
        u = state[i, 5]; v = state[i, 6]; w = state[i, 7]
        q = state[i, 8]; r = state[i, 9]

        ct = cos(theta); st = sin(theta)
        cp = cos(psi); sp = sin(psi)
        if ct <= 0.0:
            raise FloatingPointError(
                "pitch angle left the domain |theta| < pi/2"
            )

        v_c = -sp * vx + cp * vy
        w_c = cp * st * vx + sp * st * vy + ct * vz

        _terms(&params[i, 0], &state[i, 0], &state[i, 5], &v_current[0],
               &terms[0])

        ud = state[i, 31]; ud_dot = state[i, 32]
        thd = state[i, 33]; thd_dot = state[i, 34]
        psd = state[i, 35]; psd_dot = state[i, 36]
        ud_ddot = om_f * om_f * (raw_cmd[i, 0] - ud) - 2.0 * om_f * ud_dot
        thd_ddot = om_f * om_f * (raw_cmd[i, 1] - thd) - 2.0 * om_f * thd_dot
        psd_ddot = om_f * om_f * _wrap(raw_cmd[i, 2] - psd) - 2.0 * om_f * psd_dot

        u_t = u - ud
        th_t = theta - thd
        q_t = q - thd_dot
        s_q = q_t + lam_q * th_t
        ps_t = _wrap(psi - psd)
        ps_t_dot = r / ct - psd_dot
        s_r = ps_t_dot + lam_r * ps_t

        if not use_forces:
            phi_u_vhat = (terms[1] * state[i, 10] + terms[2] * state[i, 11]
                          + terms[3] * state[i, 12])
            f_u = (ud_dot - terms[0] - phi_u_vhat
                   - k_u * u_t - k_c * _sgn(u_t, eps))
            phi_q_that = 0.0
            phi_r_that = 0.0
            for j in range(9):
                phi_q_that += terms[10 + j] * state[i, 13 + j]
                phi_r_that += terms[20 + j] * state[i, 22 + j]
            t_q = (thd_ddot - terms[9] - phi_q_that - lam_q * q_t
                   - k_theta * th_t - k_q * s_q - k_d * _sgn(s_q, eps))
            t_r = (-terms[19] - phi_r_that - r * (st / ct) * q
                   + ct * (psd_ddot - lam_r * ps_t_dot - k_psi * ps_t
                           - k_r * s_r - k_d * _sgn(s_r, eps)))
        else:
            f_u = fin[i, 0]
            t_q = fin[i, 1]
            t_r = fin[i, 2]

        forces_mv[i, 0] = f_u
        forces_mv[i, 1] = t_q
        forces_mv[i, 2] = t_r

        out[i, 0] = u * cp * ct - v * sp + w * cp * st
        out[i, 1] = u * ct * sp + v * cp + w * sp * st
        out[i, 2] = -u * st + w * ct
        out[i, 3] = q
        out[i, 4] = r / ct

        phi_u_vc = terms[1] * vx + terms[2] * vy + terms[3] * vz
        phi_q_vc = 0.0
        phi_r_vc = 0.0
        for j in range(9):
            phi_q_vc += terms[10 + j] * theta_v[j]
            phi_r_vc += terms[20 + j] * theta_v[j]
        out[i, 5] = f_u + terms[0] + phi_u_vc
        out[i, 6] = terms[4] * r + terms[5] * (v - v_c)
        out[i, 7] = terms[6] * q + terms[7] * (w - w_c) + terms[8]
        out[i, 8] = t_q + terms[9] + phi_q_vc
        out[i, 9] = t_r + terms[19] + phi_r_vc

        out[i, 10] = c_u * terms[1] * u_t
        out[i, 11] = c_u * terms[2] * u_t
        out[i, 12] = c_u * terms[3] * u_t
        for j in range(9):
            out[i, 13 + j] = c_q * terms[10 + j] * s_q
            out[i, 22 + j] = c_r * terms[20 + j] * s_r

        out[i, 31] = ud_dot
        out[i, 32] = ud_ddot
        out[i, 33] = thd_dot
        out[i, 34] = thd_ddot
        out[i, 35] = psd_dot
        out[i, 36] = psd_ddot

    return forces

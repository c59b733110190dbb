# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Same contract as `_impl_py` (see its docstring for state layouts and the
model equations); this version keeps the RK4 rollout, cost, and adjoint
sweep in C loops so the receding-horizon solver can run at full rate.
"""

from libc.math cimport cos, sin

import numpy as np

BACKEND = "compiled"


cdef inline void _f9(const double* x, const double* u, double m, double g,
                     double tau, double drag, double* dx) noexcept nogil:
    cdef double cr = cos(x[6]), sr = sin(x[6])
    cdef double cp = cos(x[7]), sp = sin(x[7])
    cdef double cy = cos(x[8]), sy = sin(x[8])
    cdef double fm = u[2] / m
    dx[0] = x[3]
    dx[1] = x[4]
    dx[2] = x[5]
    dx[3] = fm * (cy * sp * cr + sy * sr) - drag * x[3]
    dx[4] = fm * (sy * sp * cr - cy * sr) - drag * x[4]
    dx[5] = fm * (cp * cr) - g - drag * x[5]
    dx[6] = (u[0] - x[6]) / tau
    dx[7] = (u[1] - x[7]) / tau
    dx[8] = u[3]


def plant_step(x_in, u_in, double m, double g, double tau_att, double drag,
               double dt, int substeps=1):
    """RK4-integrate the plant over `substeps` steps of size `dt` with input held."""
    x_arr = np.ascontiguousarray(x_in, dtype=np.float64).copy()
    u_arr = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef double[::1] xv = x_arr
    cdef double[::1] uv = u_arr
    cdef double x[9]
    cdef double xt[9]
    cdef double k1[9]
    cdef double k2[9]
    cdef double k3[9]
    cdef double k4[9]
    cdef int i, s
    for i in range(9):
        x[i] = xv[i]
    for s in range(substeps):
        _f9(x, &uv[0], m, g, tau_att, drag, k1)
        for i in range(9):
            xt[i] = x[i] + 0.5 * dt * k1[i]
        _f9(xt, &uv[0], m, g, tau_att, drag, k2)
        for i in range(9):
            xt[i] = x[i] + 0.5 * dt * k2[i]
        _f9(xt, &uv[0], m, g, tau_att, drag, k3)
        for i in range(9):
            xt[i] = x[i] + dt * k3[i]
        _f9(xt, &uv[0], m, g, tau_att, drag, k4)
        for i in range(9):
            x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    for i in range(9):
        xv[i] = x[i]
    return x_arr


cdef inline void _f8(const double* x, const double* u, double yaw, double m,
                     double g, double tau, double drag, double* dx) noexcept nogil:
    cdef double cr = cos(x[6]), sr = sin(x[6])
    cdef double cp = cos(x[7]), sp = sin(x[7])
    cdef double cy = cos(yaw), sy = sin(yaw)
    cdef double fm = u[2] / m
    dx[0] = x[3]
    dx[1] = x[4]
    dx[2] = x[5]
    dx[3] = fm * (cy * sp * cr + sy * sr) - drag * x[3]
    dx[4] = fm * (sy * sp * cr - cy * sr) - drag * x[4]
    dx[5] = fm * (cp * cr) - g - drag * x[5]
    dx[6] = (u[0] - x[6]) / tau
    dx[7] = (u[1] - x[7]) / tau


cdef inline void _f8_jac(const double* x, const double* u, double yaw, double m,
                         double tau, double drag, double* fx, double* fu) noexcept nogil:
    # fx is 8x8 row-major, fu is 8x3 row-major; both fully overwritten.
    cdef double cr = cos(x[6]), sr = sin(x[6])
    cdef double cp = cos(x[7]), sp = sin(x[7])
    cdef double cy = cos(yaw), sy = sin(yaw)
    cdef double fm = u[2] / m
    cdef int i
    for i in range(64):
        fx[i] = 0.0
    for i in range(24):
        fu[i] = 0.0
    fx[0 * 8 + 3] = 1.0
    fx[1 * 8 + 4] = 1.0
    fx[2 * 8 + 5] = 1.0
    fx[3 * 8 + 3] = -drag
    fx[4 * 8 + 4] = -drag
    fx[5 * 8 + 5] = -drag
    fx[3 * 8 + 6] = fm * (-cy * sp * sr + sy * cr)
    fx[4 * 8 + 6] = fm * (-sy * sp * sr - cy * cr)
    fx[5 * 8 + 6] = fm * (-cp * sr)
    fx[3 * 8 + 7] = fm * (cy * cp * cr)
    fx[4 * 8 + 7] = fm * (sy * cp * cr)
    fx[5 * 8 + 7] = fm * (-sp * cr)
    fx[6 * 8 + 6] = -1.0 / tau
    fx[7 * 8 + 7] = -1.0 / tau
    fu[3 * 3 + 2] = (cy * sp * cr + sy * sr) / m
    fu[4 * 3 + 2] = (sy * sp * cr - cy * sr) / m
    fu[5 * 3 + 2] = (cp * cr) / m
    fu[6 * 3 + 0] = 1.0 / tau
    fu[7 * 3 + 1] = 1.0 / tau


cdef inline void _mm88(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(8):
        for j in range(8):
            s = 0.0
            for k in range(8):
                s += a[i * 8 + k] * b[k * 8 + j]
            out[i * 8 + j] = s


cdef inline void _mm83(const double* a, const double* b, double* out) noexcept nogil:
    # (8x8) @ (8x3)
    cdef int i, j, k
    cdef double s
    for i in range(8):
        for j in range(3):
            s = 0.0
            for k in range(8):
                s += a[i * 8 + k] * b[k * 3 + j]
            out[i * 3 + j] = s


cdef inline double _quad8(const double* q, const double* e) noexcept nogil:
    cdef int i, j
    cdef double s = 0.0
    for i in range(8):
        for j in range(8):
            s += e[i] * q[i * 8 + j] * e[j]
    return s


cdef inline double _quad3(const double* r, const double* e) noexcept nogil:
    cdef int i, j
    cdef double s = 0.0
    for i in range(3):
        for j in range(3):
            s += e[i] * r[i * 3 + j] * e[j]
    return s


cdef void _rk4_step8(const double* x, const double* u, double yaw, double m,
                     double g, double tau, double drag, double dt,
                     double* x_next) noexcept nogil:
    cdef double k1[8]
    cdef double k2[8]
    cdef double k3[8]
    cdef double k4[8]
    cdef double xt[8]
    cdef int i
    _f8(x, u, yaw, m, g, tau, drag, k1)
    for i in range(8):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    _f8(xt, u, yaw, m, g, tau, drag, k2)
    for i in range(8):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    _f8(xt, u, yaw, m, g, tau, drag, k3)
    for i in range(8):
        xt[i] = x[i] + dt * k3[i]
    _f8(xt, u, yaw, m, g, tau, drag, k4)
    for i in range(8):
        x_next[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


cdef void _rk4_step8_jac(const double* x, const double* u, double yaw, double m,
                         double g, double tau, double drag, double dt,
                         double* x_next, double* phi_x, double* phi_u) noexcept nogil:
    # Exact sensitivities of the discrete RK4 map, chained stage by stage.
    cdef double k1[8]
    cdef double k2[8]
    cdef double k3[8]
    cdef double k4[8]
    cdef double x2[8]
    cdef double x3[8]
    cdef double x4[8]
    cdef double a1[64]
    cdef double a2[64]
    cdef double a3[64]
    cdef double a4[64]
    cdef double b1[24]
    cdef double b2[24]
    cdef double b3[24]
    cdef double b4[24]
    cdef double k1x[64]
    cdef double k2x[64]
    cdef double k3x[64]
    cdef double k4x[64]
    cdef double k2u[24]
    cdef double k3u[24]
    cdef double k4u[24]
    cdef double tmp[64]
    cdef double tmpu[24]
    cdef int i, j

    _f8(x, u, yaw, m, g, tau, drag, k1)
    _f8_jac(x, u, yaw, m, tau, drag, a1, b1)
    for i in range(8):
        x2[i] = x[i] + 0.5 * dt * k1[i]
    _f8(x2, u, yaw, m, g, tau, drag, k2)
    _f8_jac(x2, u, yaw, m, tau, drag, a2, b2)
    for i in range(8):
        x3[i] = x[i] + 0.5 * dt * k2[i]
    _f8(x3, u, yaw, m, g, tau, drag, k3)
    _f8_jac(x3, u, yaw, m, tau, drag, a3, b3)
    for i in range(8):
        x4[i] = x[i] + dt * k3[i]
    _f8(x4, u, yaw, m, g, tau, drag, k4)
    _f8_jac(x4, u, yaw, m, tau, drag, a4, b4)

    # state sensitivities
    for i in range(64):
        k1x[i] = a1[i]
    for i in range(8):
        for j in range(8):
            tmp[i * 8 + j] = (1.0 if i == j else 0.0) + 0.5 * dt * k1x[i * 8 + j]
    _mm88(a2, tmp, k2x)
    for i in range(8):
        for j in range(8):
            tmp[i * 8 + j] = (1.0 if i == j else 0.0) + 0.5 * dt * k2x[i * 8 + j]
    _mm88(a3, tmp, k3x)
    for i in range(8):
        for j in range(8):
            tmp[i * 8 + j] = (1.0 if i == j else 0.0) + dt * k3x[i * 8 + j]
    _mm88(a4, tmp, k4x)
    for i in range(64):
        phi_x[i] = (dt / 6.0) * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
    for i in range(8):
        phi_x[i * 8 + i] += 1.0

    # input sensitivities (k1u == b1)
    for i in range(24):
        tmpu[i] = 0.5 * dt * b1[i]
    _mm83(a2, tmpu, k2u)
    for i in range(24):
        k2u[i] += b2[i]
        tmpu[i] = 0.5 * dt * k2u[i]
    _mm83(a3, tmpu, k3u)
    for i in range(24):
        k3u[i] += b3[i]
        tmpu[i] = dt * k3u[i]
    _mm83(a4, tmpu, k4u)
    for i in range(24):
        k4u[i] += b4[i]
        phi_u[i] = (dt / 6.0) * (b1[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i])

    for i in range(8):
        x_next[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def rollout(x0, double yaw, utraj, xref, uref, qmat, rmat, pmat,
            double m, double g, double tau_att, double drag, double dt):
    """Horizon rollout; returns (states (N+1, 8), cost)."""
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[:, ::1] uv = np.ascontiguousarray(utraj, dtype=np.float64)
    cdef double[:, ::1] xrefv = np.ascontiguousarray(xref, dtype=np.float64)
    cdef double[:, ::1] urefv = np.ascontiguousarray(uref, dtype=np.float64)
    cdef double[:, ::1] qv = np.ascontiguousarray(qmat, dtype=np.float64)
    cdef double[:, ::1] rv = np.ascontiguousarray(rmat, dtype=np.float64)
    cdef double[:, ::1] pv = np.ascontiguousarray(pmat, dtype=np.float64)
    cdef int n_steps = uv.shape[0]
    xs_arr = np.empty((n_steps + 1, 8), dtype=np.float64)
    cdef double[:, ::1] xs = xs_arr
    cdef double ex[8]
    cdef double eu[3]
    cdef double cost = 0.0
    cdef int i, k
    for i in range(8):
        xs[0, i] = x0v[i]
    with nogil:
        for k in range(n_steps):
            for i in range(8):
                ex[i] = xs[k, i] - xrefv[k, i]
            for i in range(3):
                eu[i] = uv[k, i] - urefv[k, i]
            cost += (_quad8(&qv[0, 0], ex) + _quad3(&rv[0, 0], eu)) * dt
            _rk4_step8(&xs[k, 0], &uv[k, 0], yaw, m, g, tau_att, drag, dt, &xs[k + 1, 0])
        for i in range(8):
            ex[i] = xs[n_steps, i] - xrefv[n_steps, i]
        cost += _quad8(&pv[0, 0], ex)
    return xs_arr, cost


def rollout_gradient(x0, double yaw, utraj, xref, uref, qmat, rmat, pmat,
                     double m, double g, double tau_att, double drag, double dt):
    """Adjoint gradient of the rollout cost; returns (grad (N, 3), cost, states)."""
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[:, ::1] uv = np.ascontiguousarray(utraj, dtype=np.float64)
    cdef double[:, ::1] xrefv = np.ascontiguousarray(xref, dtype=np.float64)
    cdef double[:, ::1] urefv = np.ascontiguousarray(uref, dtype=np.float64)
    cdef double[:, ::1] qv = np.ascontiguousarray(qmat, dtype=np.float64)
    cdef double[:, ::1] rv = np.ascontiguousarray(rmat, dtype=np.float64)
    cdef double[:, ::1] pv = np.ascontiguousarray(pmat, dtype=np.float64)
    cdef int n_steps = uv.shape[0]
    xs_arr = np.empty((n_steps + 1, 8), dtype=np.float64)
    grad_arr = np.empty((n_steps, 3), dtype=np.float64)
    phix_arr = np.empty((n_steps, 64), dtype=np.float64)
    phiu_arr = np.empty((n_steps, 24), dtype=np.float64)
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] gv = grad_arr
    cdef double[:, ::1] phix = phix_arr
    cdef double[:, ::1] phiu = phiu_arr
    cdef double ex[8]
    cdef double eu[3]
    cdef double lam[8]
    cdef double lam_next[8]
    cdef double cost = 0.0
    cdef double s
    cdef int i, j, k
    for i in range(8):
        xs[0, i] = x0v[i]
    with nogil:
        for k in range(n_steps):
            for i in range(8):
                ex[i] = xs[k, i] - xrefv[k, i]
            for i in range(3):
                eu[i] = uv[k, i] - urefv[k, i]
            cost += (_quad8(&qv[0, 0], ex) + _quad3(&rv[0, 0], eu)) * dt
            _rk4_step8_jac(&xs[k, 0], &uv[k, 0], yaw, m, g, tau_att, drag, dt,
                           &xs[k + 1, 0], &phix[k, 0], &phiu[k, 0])
        for i in range(8):
            ex[i] = xs[n_steps, i] - xrefv[n_steps, i]
        cost += _quad8(&pv[0, 0], ex)

        # lam_N = 2 P e_N
        for i in range(8):
            s = 0.0
            for j in range(8):
                s += pv[i, j] * ex[j]
            lam[i] = 2.0 * s
        for k in range(n_steps - 1, -1, -1):
            for i in range(8):
                ex[i] = xs[k, i] - xrefv[k, i]
            for i in range(3):
                eu[i] = uv[k, i] - urefv[k, i]
            # grad_k = 2 dt R eu + phi_u^T lam
            for j in range(3):
                s = 0.0
                for i in range(3):
                    s += rv[j, i] * eu[i]
                s *= 2.0 * dt
                for i in range(8):
                    s += phiu[k, i * 3 + j] * lam[i]
                gv[k, j] = s
            # lam_k = 2 dt Q ex + phi_x^T lam
            for j in range(8):
                s = 0.0
                for i in range(8):
                    s += qv[j, i] * ex[i]
                s *= 2.0 * dt
                for i in range(8):
                    s += phix[k, i * 8 + j] * lam[i]
                lam_next[j] = s
            for j in range(8):
                lam[j] = lam_next[j]
    return grad_arr, cost, xs_arr

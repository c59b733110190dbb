"""Pure-NumPy fallback for the hot simulation kernels.

Mirrors the API of the compiled extension `_impl_cy`:

  * `plant_step`        -- RK4 integration of the 9-state multirotor plant
  * `rollout`           -- horizon rollout of the 8-state prediction model + cost
  * `rollout_gradient`  -- same rollout with the adjoint gradient of the cost

State layouts
    plant x9 : [px, py, pz, vx, vy, vz, roll, pitch, yaw]
    mpc   x8 : [px, py, pz, vx, vy, vz, roll, pitch]   (yaw is a frozen parameter)
    plant u4 : [roll_cmd, pitch_cmd, thrust, yaw_rate_cmd]
    mpc   u3 : [roll_cmd, pitch_cmd, thrust]

Model
    p'    = v
    v'    = (F/m) * n(roll, pitch, yaw) - (0, 0, g) - drag * v
    roll'  = (roll_cmd - roll) / tau_att
    pitch' = (pitch_cmd - pitch) / tau_att
    yaw'   = yaw_rate_cmd                       (plant only)

with n the body z-axis in world coordinates under the ZYX convention.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def _thrust_axis(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            cy * sp * cr + sy * sr,
            sy * sp * cr - cy * sr,
            cp * cr,
        ]
    )


def _f9(x: np.ndarray, u: np.ndarray, m: float, g: float, tau_att: float, drag: float) -> np.ndarray:
    dx = np.empty(9)
    dx[0:3] = x[3:6]
    n = _thrust_axis(x[6], x[7], x[8])
    dx[3:6] = (u[2] / m) * n - drag * x[3:6]
    dx[5] -= g
    dx[6] = (u[0] - x[6]) / tau_att
    dx[7] = (u[1] - x[7]) / tau_att
    dx[8] = u[3]
    return dx


def plant_step(
    x: np.ndarray,
    u: np.ndarray,
    m: float,
    g: float,
    tau_att: float,
    drag: float,
    dt: float,
    substeps: int = 1,
) -> np.ndarray:
    """RK4-integrate the plant over `substeps` steps of size `dt` with input held."""
    x = np.asarray(x, dtype=float).copy()
    u = np.asarray(u, dtype=float)
    for _ in range(substeps):
        k1 = _f9(x, u, m, g, tau_att, drag)
        k2 = _f9(x + 0.5 * dt * k1, u, m, g, tau_att, drag)
        k3 = _f9(x + 0.5 * dt * k2, u, m, g, tau_att, drag)
        k4 = _f9(x + dt * k3, u, m, g, tau_att, drag)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _f8(x, u, yaw, m, g, tau_att, drag):
    dx = np.empty(8)
    dx[0:3] = x[3:6]
    n = _thrust_axis(x[6], x[7], yaw)
    dx[3:6] = (u[2] / m) * n - drag * x[3:6]
    dx[5] -= g
    dx[6] = (u[0] - x[6]) / tau_att
    dx[7] = (u[1] - x[7]) / tau_att
    return dx


def _f8_jac(x, u, yaw, m, g, tau_att, drag):
    """Analytic Jacobians (df/dx, df/du) of the 8-state prediction model."""
    roll, pitch = x[6], x[7]
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    n = np.array([cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr])
    dn_droll = np.array([-cy * sp * sr + sy * cr, -sy * sp * sr - cy * cr, -cp * sr])
    dn_dpitch = np.array([cy * cp * cr, sy * cp * cr, -sp * cr])

    fx = np.zeros((8, 8))
    fx[0:3, 3:6] = np.eye(3)
    fx[3:6, 3:6] = -drag * np.eye(3)
    fx[3:6, 6] = (u[2] / m) * dn_droll
    fx[3:6, 7] = (u[2] / m) * dn_dpitch
    fx[6, 6] = -1.0 / tau_att
    fx[7, 7] = -1.0 / tau_att

    fu = np.zeros((8, 3))
    fu[3:6, 2] = n / m
    fu[6, 0] = 1.0 / tau_att
    fu[7, 1] = 1.0 / tau_att
    return fx, fu


def _mpc_step(x, u, yaw, m, g, tau_att, drag, dt):
    k1 = _f8(x, u, yaw, m, g, tau_att, drag)
    k2 = _f8(x + 0.5 * dt * k1, u, yaw, m, g, tau_att, drag)
    k3 = _f8(x + 0.5 * dt * k2, u, yaw, m, g, tau_att, drag)
    k4 = _f8(x + dt * k3, u, yaw, m, g, tau_att, drag)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _mpc_step_with_jac(x, u, yaw, m, g, tau_att, drag, dt):
    """One RK4 step plus exact sensitivities of the discrete map."""
    eye = np.eye(8)

    k1 = _f8(x, u, yaw, m, g, tau_att, drag)
    a1, b1 = _f8_jac(x, u, yaw, m, g, tau_att, drag)
    x2 = x + 0.5 * dt * k1
    k2 = _f8(x2, u, yaw, m, g, tau_att, drag)
    a2, b2 = _f8_jac(x2, u, yaw, m, g, tau_att, drag)
    x3 = x + 0.5 * dt * k2
    k3 = _f8(x3, u, yaw, m, g, tau_att, drag)
    a3, b3 = _f8_jac(x3, u, yaw, m, g, tau_att, drag)
    x4 = x + dt * k3
    k4 = _f8(x4, u, yaw, m, g, tau_att, drag)
    a4, b4 = _f8_jac(x4, u, yaw, m, g, tau_att, drag)

    k1x = a1
    k2x = a2 @ (eye + 0.5 * dt * k1x)
    k3x = a3 @ (eye + 0.5 * dt * k2x)
    k4x = a4 @ (eye + dt * k3x)
    phi_x = eye + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)

    k1u = b1
    k2u = a2 @ (0.5 * dt * k1u) + b2
    k3u = a3 @ (0.5 * dt * k2u) + b3
    k4u = a4 @ (dt * k3u) + b4
    phi_u = (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)

    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x_next, phi_x, phi_u


def rollout(x0, yaw, utraj, xref, uref, qmat, rmat, pmat, m, g, tau_att, drag, dt):
    """Roll the prediction model out over the horizon.

    Returns (states (N+1, 8), cost). The cost is the left-Riemann sum of the
    stage terms times dt plus the terminal term.
    """
    utraj = np.asarray(utraj, dtype=float)
    n_steps = utraj.shape[0]
    xs = np.empty((n_steps + 1, 8))
    xs[0] = x0
    cost = 0.0
    for k in range(n_steps):
        ex = xs[k] - xref[k]
        eu = utraj[k] - uref[k]
        cost += (ex @ qmat @ ex + eu @ rmat @ eu) * dt
        xs[k + 1] = _mpc_step(xs[k], utraj[k], yaw, m, g, tau_att, drag, dt)
    et = xs[n_steps] - xref[n_steps]
    cost += et @ pmat @ et
    return xs, float(cost)


def rollout_gradient(x0, yaw, utraj, xref, uref, qmat, rmat, pmat, m, g, tau_att, drag, dt):
    """Adjoint gradient of the rollout cost with respect to the input trajectory.

    Returns (grad (N, 3), cost, states (N+1, 8)).
    """
    utraj = np.asarray(utraj, dtype=float)
    n_steps = utraj.shape[0]
    xs = np.empty((n_steps + 1, 8))
    xs[0] = x0
    phis_x = np.empty((n_steps, 8, 8))
    phis_u = np.empty((n_steps, 8, 3))
    cost = 0.0
    for k in range(n_steps):
        ex = xs[k] - xref[k]
        eu = utraj[k] - uref[k]
        cost += (ex @ qmat @ ex + eu @ rmat @ eu) * dt
        xs[k + 1], phis_x[k], phis_u[k] = _mpc_step_with_jac(
            xs[k], utraj[k], yaw, m, g, tau_att, drag, dt
        )
    et = xs[n_steps] - xref[n_steps]
    cost += et @ pmat @ et

    grad = np.empty((n_steps, 3))
    lam = 2.0 * (pmat @ et)
    for k in range(n_steps - 1, -1, -1):
        ex = xs[k] - xref[k]
        eu = utraj[k] - uref[k]
        grad[k] = 2.0 * dt * (rmat @ eu) + phis_u[k].T @ lam
        lam = 2.0 * dt * (qmat @ ex) + phis_x[k].T @ lam
    return grad, float(cost), xs

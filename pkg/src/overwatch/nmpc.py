"""Receding-horizon nonlinear position controller.

Each control tick solves a finite-horizon optimal-control problem --
quadratic penalties on state and input error around a reference, the
multirotor prediction model as dynamics constraint, and a box on the
inputs -- and emits the first input of the optimized sequence.

The solver is single-shooting projected gradient descent: adjoint
gradients from the kernel rollout, per-channel step preconditioning,
backtracking line search with sufficient-decrease acceptance, and box
projection. It is deterministic (no randomness, no wall clock) and warm
starts from the previous solution shifted by one step.

Yaw is not part of the optimized input vector; a proportional rate
command on the yaw channel rides alongside (`yaw_rate_command`).

Penalty weights, horizon and rates are tuning defaults, not measured
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .dynamics import ControlInput, MavParams
from .se3 import wrap_angle

N_STATES = 8
N_INPUTS = 3


def _check_psd(mat: np.ndarray, name: str, strict: bool) -> None:
    if mat.shape != (mat.shape[0], mat.shape[0]) or not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh(mat)
    if strict and eig.min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    if not strict and eig.min() < -1e-9:
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass
class MpcConfig:
    """Penalties, horizon, step, input box and solver knobs."""

    q_state: np.ndarray = field(
        default_factory=lambda: np.diag([6.0, 6.0, 40.0, 6.0, 6.0, 8.0, 2.0, 2.0])
    )
    r_input: np.ndarray = field(default_factory=lambda: np.diag([85.0, 85.0, 0.12]))
    p_terminal: Optional[np.ndarray] = None  # defaults to 5 * q_state
    horizon: int = 20
    dt: float = 0.05  # s
    u_min: np.ndarray = field(
        default_factory=lambda: np.array([-math.radians(30.0), -math.radians(30.0), 0.0])
    )
    u_max: np.ndarray = field(
        default_factory=lambda: np.array([math.radians(30.0), math.radians(30.0), 2.0 * 2.9 * 9.81])
    )
    max_iters: int = 60
    tol: float = 1e-8  # relative cost-decrease convergence threshold
    step_scale: np.ndarray = field(default_factory=lambda: np.array([0.02, 0.02, 6.5]))

    def __post_init__(self):
        self.q_state = np.asarray(self.q_state, dtype=float)
        self.r_input = np.asarray(self.r_input, dtype=float)
        if self.p_terminal is None:
            self.p_terminal = 5.0 * self.q_state
        self.p_terminal = np.asarray(self.p_terminal, dtype=float)
        self.u_min = np.asarray(self.u_min, dtype=float).reshape(N_INPUTS)
        self.u_max = np.asarray(self.u_max, dtype=float).reshape(N_INPUTS)
        self.step_scale = np.asarray(self.step_scale, dtype=float).reshape(N_INPUTS)
        _check_psd(self.q_state, "q_state", strict=False)
        _check_psd(self.p_terminal, "p_terminal", strict=False)
        _check_psd(self.r_input, "r_input", strict=True)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if np.any(self.u_max < self.u_min):
            raise ValueError("empty input box")

    @staticmethod
    def for_params(params: MavParams, **overrides) -> "MpcConfig":
        """Config with the input box derived from the vehicle limits."""
        cfg = MpcConfig(**overrides)
        if "u_min" not in overrides:
            cfg.u_min = np.array([-params.att_limit, -params.att_limit, params.thrust_min])
        if "u_max" not in overrides:
            cfg.u_max = np.array([params.att_limit, params.att_limit, params.thrust_max])
        return cfg


@dataclass
class ReferenceTrajectory:
    """Per-step state targets (N+1) and steady-state inputs (N)."""

    x_ref: np.ndarray  # (N+1, 8)
    u_ref: np.ndarray  # (N, 3)

    def __post_init__(self):
        self.x_ref = np.asarray(self.x_ref, dtype=float)
        self.u_ref = np.asarray(self.u_ref, dtype=float)
        if self.x_ref.shape[0] != self.u_ref.shape[0] + 1:
            raise ValueError("need N+1 state targets for N input targets")
        if self.x_ref.shape[1] != N_STATES or self.u_ref.shape[1] != N_INPUTS:
            raise ValueError("bad reference dimensions")

    @staticmethod
    def hold_position(position, cfg: MpcConfig, params: MavParams) -> "ReferenceTrajectory":
        """Constant setpoint repeated over the horizon (hover at `position`)."""
        x = np.zeros((cfg.horizon + 1, N_STATES))
        x[:, 0:3] = np.asarray(position, dtype=float)
        u = np.zeros((cfg.horizon, N_INPUTS))
        u[:, 2] = params.hover_thrust
        return ReferenceTrajectory(x, u)


def cost(x_traj: np.ndarray, u_traj: np.ndarray, ref: ReferenceTrajectory,
         cfg: MpcConfig) -> float:
    """Discrete objective: stage state/input penalties times dt plus terminal term."""
    x_traj = np.asarray(x_traj, dtype=float)
    u_traj = np.asarray(u_traj, dtype=float)
    n = cfg.horizon
    if x_traj.shape != (n + 1, N_STATES) or u_traj.shape != (n, N_INPUTS):
        raise ValueError("trajectory lengths do not match the configured horizon")
    ex = x_traj[:n] - ref.x_ref[:n]
    eu = u_traj - ref.u_ref
    stage = np.einsum("ki,ij,kj->", ex, cfg.q_state, ex) + np.einsum(
        "ki,ij,kj->", eu, cfg.r_input, eu
    )
    et = x_traj[n] - ref.x_ref[n]
    return float(stage * cfg.dt + et @ cfg.p_terminal @ et)


def gradient(x0: np.ndarray, ref: ReferenceTrajectory, cfg: MpcConfig,
             u_traj: np.ndarray, yaw: float, params: MavParams) -> np.ndarray:
    """Adjoint gradient of the rolled-out cost with respect to the input trajectory."""
    g, _, _ = _kernels.rollout_gradient(
        np.asarray(x0, dtype=float), yaw, np.asarray(u_traj, dtype=float),
        ref.x_ref, ref.u_ref, cfg.q_state, cfg.r_input, cfg.p_terminal,
        params.mass, params.gravity, params.tau_att, params.drag, cfg.dt,
    )
    return g


@dataclass
class SolveResult:
    input: ControlInput  # first input of the optimized sequence
    u_traj: np.ndarray  # (N, 3)
    x_traj: np.ndarray  # (N+1, 8) predicted under u_traj
    cost: float
    iterations: int
    degraded: bool  # True when the iteration budget ran out before convergence


class NmpcController:
    """One solver instance per controlled vehicle; owns a private warm start."""

    def __init__(self, cfg: MpcConfig, params: MavParams):
        self.cfg = cfg
        self.params = params
        self._warm: Optional[np.ndarray] = None

    def reset(self) -> None:
        self._warm = None

    def _project(self, u: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(u, self.cfg.u_min), self.cfg.u_max)

    def solve(self, x0: np.ndarray, yaw: float, ref: ReferenceTrajectory) -> SolveResult:
        """Minimize the horizon cost over the input sequence from state `x0`.

        The start iterate is the better of the shifted previous solution
        and the zero-correction initialization u = u_ref, so the returned
        cost never exceeds the u_ref rollout's.
        """
        cfg, params = self.cfg, self.params
        x0 = np.asarray(x0, dtype=float)
        if not np.all(np.isfinite(x0)):
            raise ValueError("non-finite initial state")

        def run(u):
            return _kernels.rollout(
                x0, yaw, u, ref.x_ref, ref.u_ref, cfg.q_state, cfg.r_input,
                cfg.p_terminal, params.mass, params.gravity, params.tau_att,
                params.drag, cfg.dt,
            )

        u = self._project(ref.u_ref.copy())
        xs, best = run(u)
        if self._warm is not None:
            u_w = self._project(self._warm)
            xs_w, cost_w = run(u_w)
            if cost_w < best:
                u, xs, best = u_w, xs_w, cost_w

        alpha = 1.0
        u_prev = g_prev = None
        iters = 0
        converged = False
        for _ in range(cfg.max_iters):
            iters += 1
            g, cost_here, _ = _kernels.rollout_gradient(
                x0, yaw, u, ref.x_ref, ref.u_ref, cfg.q_state, cfg.r_input,
                cfg.p_terminal, params.mass, params.gravity, params.tau_att,
                params.drag, cfg.dt,
            )
            if u_prev is not None:
                # Barzilai-Borwein step length in the preconditioned metric
                s = (u - u_prev).ravel()
                y = (g - g_prev).ravel()
                sy = float(s @ y)
                if sy > 1e-18:
                    ss = float(s @ (s.reshape(-1, N_INPUTS) / cfg.step_scale).ravel())
                    alpha = min(max(ss / sy, 1e-4), 1e4)
            u_prev, g_prev = u, g
            step = g * cfg.step_scale
            accepted = False
            a = alpha
            while a >= 1e-12:
                u_c = self._project(u - a * step)
                xs_c, cost_c = run(u_c)
                d = (u_c - u).ravel()
                move = float(d @ d)
                if cost_c <= cost_here - 1e-4 * move / max(a, 1e-12):
                    accepted = True
                    break
                a *= 0.5
            if not accepted:
                # no admissible step improves the cost: stationary to precision
                converged = True
                break
            decrease = best - cost_c
            u, xs, best = u_c, xs_c, cost_c
            if decrease <= cfg.tol * max(1.0, abs(best)):
                converged = True
                break

        self._warm = np.vstack([u[1:], u[-1:]])
        first = ControlInput(float(u[0, 0]), float(u[0, 1]), float(u[0, 2]))
        return SolveResult(first, u, xs, best, iters, degraded=not converged)


def yaw_rate_command(yaw: float, yaw_setpoint: float, gain: float = 1.5,
                     limit: float = 1.0) -> float:
    """Proportional yaw-rate command toward the setpoint, rate-limited."""
    rate = gain * wrap_angle(yaw_setpoint - yaw)
    return min(max(rate, -limit), limit)

"""Compare the compiled kernels against the pure-NumPy fallback.

Times the three hot entry points on representative workloads and cross
checks that both backends agree numerically. Run via `overwatch bench`
or `python benchmarks/bench_kernels.py`.
"""

import time

import numpy as np

from overwatch._kernels import _impl_py as pyk

try:
    from overwatch._kernels import _impl_cy as cyk
except ImportError:
    cyk = None

M, G, TAU, DRAG = 2.9, 9.81, 0.15, 0.05
DT_PLANT, DT_MPC, HORIZON = 0.01, 0.05, 20


def _problem(seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(0, 0.5, 8)
    u = rng.normal(0, 0.2, (HORIZON, 3))
    u[:, 2] += M * G
    xref = np.zeros((HORIZON + 1, 8))
    uref = np.zeros((HORIZON, 3))
    uref[:, 2] = M * G
    q = np.diag([6.0, 6, 40, 6, 6, 8, 2, 2])
    r = np.diag([85.0, 85, 0.12])
    return x0, 0.3, u, xref, uref, q, r, 5 * q


def _time(fn, reps):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def main():
    args = _problem()
    x9 = np.zeros(9)
    u4 = np.array([0.05, -0.03, M * G, 0.1])

    cases = {
        "plant_step (5 substeps)": lambda impl: impl.plant_step(
            x9, u4, M, G, TAU, DRAG, DT_PLANT, 5),
        f"rollout (N={HORIZON})": lambda impl: impl.rollout(
            *args, M, G, TAU, DRAG, DT_MPC),
        f"rollout_gradient (N={HORIZON})": lambda impl: impl.rollout_gradient(
            *args, M, G, TAU, DRAG, DT_MPC),
    }

    print(f"{'kernel':<28} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, call in cases.items():
        t_py = _time(lambda: call(pyk), 200)
        if cyk is None:
            print(f"{name:<28} {t_py * 1e6:>10.1f}us {'n/a':>12} {'n/a':>9}")
            continue
        t_cy = _time(lambda: call(cyk), 2000)
        print(f"{name:<28} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
              f"{t_py / t_cy:>8.1f}x")

    if cyk is not None:
        _, cost_py = pyk.rollout(*args, M, G, TAU, DRAG, DT_MPC)
        _, cost_cy = cyk.rollout(*args, M, G, TAU, DRAG, DT_MPC)
        g_py, _, _ = pyk.rollout_gradient(*args, M, G, TAU, DRAG, DT_MPC)
        g_cy, _, _ = cyk.rollout_gradient(*args, M, G, TAU, DRAG, DT_MPC)
        print(f"\nagreement: |cost diff| = {abs(cost_py - cost_cy):.2e}, "
              f"max |grad diff| = {np.abs(g_py - g_cy).max():.2e}")


if __name__ == "__main__":
    main()

"""Resolution ladder for E[(min label ^ 0)^2 | height] three ways.

Target is 3*H exactly.  Arms:
  chol  - brute-force Gaussian min over the recorded grid tree (no sweep code)
  tips  - kernel sweep, grid-tip minimum
  marks - kernel sweep, tip minimum refined with per-segment bridge minima

Uses a small fixed height so Cholesky stays feasible at fine resolution.
"""
import time

import numpy as np
from numba import njit

from halfplane_lab.snake import _snake_core, _bes3_leg


@njit
def _zeta_seeded(seed, height, hs):
    np.random.seed(seed)
    buf1 = np.empty(1 << 22)
    buf2 = np.empty(1 << 22)
    n1 = _bes3_leg(height, hs, buf1)
    n2 = _bes3_leg(height, hs, buf2)
    z = np.empty(n1 + n2)
    for i in range(n1):
        z[i] = buf1[i]
    for i in range(n2):
        z[n1 + i] = buf2[n2 - 1 - i]
    return z


@njit
def tree_cov(zeta):
    n = zeta.shape[0]
    c = np.empty((n, n))
    for i in range(n):
        running = zeta[i]
        c[i, i] = zeta[i]
        for j in range(i + 1, n):
            if zeta[j] < running:
                running = zeta[j]
            c[i, j] = running
            c[j, i] = running
    return c


@njit
def kernel_batch(seed0, n, height, hs, dlh):
    acc_t = 0.0
    acc_m = 0.0
    for i in range(n):
        zeta, tip, pmin, m, wsf, status = _snake_core(
            seed0 + i, 0.0, height, hs, dlh, 50_000_000
        )
        t = tip.min()
        if t > 0.0:
            t = 0.0
        acc_t += t * t
        v = min(wsf, 0.0)
        acc_m += v * v
    return acc_t / n, acc_m / n


def main():
    height = 0.125
    target = 3.0 * height
    dlh = 0.02 * height
    rungs = [
        (1.74e-4, 30, 700),
        (4.34e-5, 25, 700),
        (1.09e-5, 20, 700),
        (2.71e-6, 12, 700),
    ]
    print(f"H={height}, target E[(min^0)^2] = {target:.4f}")
    rng = np.random.default_rng(303)
    for hs, n_zeta, n_lab in rungs:
        t0 = time.time()
        accs = []
        npts = 0
        for rep in range(n_zeta):
            zeta = _zeta_seeded(int(rng.integers(1, 2**31 - 1)), height, hs)
            n = len(zeta)
            npts = n
            c = tree_cov(zeta) + 1e-12 * np.eye(n)
            L = np.linalg.cholesky(c)
            g = rng.standard_normal((n_lab, n))
            mins = np.minimum((g @ L.T).min(axis=1), 0.0)
            accs.append(np.mean(mins**2))
        chol_m = float(np.mean(accs))
        chol_se = float(np.std(accs, ddof=1) / np.sqrt(len(accs)))

        nk = n_zeta * n_lab
        tips_m, marks_m = kernel_batch(
            int(rng.integers(1, 2**30)), nk, height, hs, dlh
        )
        dt = time.time() - t0
        print(
            f"hs={hs:8.2e} (~{npts:5d} pts): chol={chol_m:.4f} +- {chol_se:.4f}"
            f"  tips={tips_m:.4f}  marks={marks_m:.4f}  [{dt:.0f}s]"
        )


if __name__ == "__main__":
    main()

"""Lifetime-only law checks against Ito-excursion facts.

1. Var(duration | height=1) = 4/45.
2. Occupation profile at level a given height 1: 4a(1-a).
3. Unconditioned on height (given max > a): local time at a ~ Exp(mean 2a),
   and the number of components of {zeta > a} reaching a+b has mean a/b and
   P(0) = b/(a+b).
"""
import time

import numpy as np
from numba import njit

from halfplane_lab.snake import _bes3_leg


@njit
def _zeta(height, hs, buf1, buf2, out):
    n1 = _bes3_leg(height, hs, buf1)
    if n1 < 0:
        return -1
    n2 = _bes3_leg(height, hs, buf2)
    if n2 < 0:
        return -1
    n = n1 + n2
    if n > out.shape[0]:
        return -1
    for i in range(n1):
        out[i] = buf1[i]
    for i in range(n2):
        out[n1 + i] = buf2[n2 - 1 - i]
    return n


@njit
def fixed_height_stats(seed, n_rep, height, hs, levels, band):
    np.random.seed(seed)
    buf1 = np.empty(1 << 22)
    buf2 = np.empty(1 << 22)
    out = np.empty(1 << 23)
    sig = np.empty(n_rep)
    occ = np.zeros((n_rep, levels.shape[0]))
    for r in range(n_rep):
        n = _zeta(height, hs, buf1, buf2, out)
        sig[r] = n * hs
        for j in range(levels.shape[0]):
            a = levels[j]
            cnt = 0
            for i in range(n):
                if a < out[i] <= a + band:
                    cnt += 1
            occ[r, j] = cnt * hs / band
    return sig, occ


@njit
def mixed_height_stats(seed, n_rep, eps, hs_rel, a, b, band):
    np.random.seed(seed)
    buf1 = np.empty(1 << 22)
    buf2 = np.empty(1 << 22)
    out = np.empty(1 << 23)
    lt = np.empty(n_rep)
    counts = np.empty(n_rep, dtype=np.int64)
    kept = 0
    attempts = 0
    while kept < n_rep:
        attempts += 1
        h = eps / np.random.random()
        if h <= a:
            continue
        hs = hs_rel * h * h
        n = _zeta(h, hs, buf1, buf2, out)
        # local time via band occupation
        cnt = 0
        for i in range(n):
            if a < out[i] <= a + band:
                cnt += 1
        lt[kept] = cnt * hs / band
        # components of {zeta > a} that reach a+b
        m = 0
        inside = False
        reached = False
        for i in range(n):
            if out[i] > a:
                if not inside:
                    inside = True
                    reached = False
                if out[i] >= a + b:
                    reached = True
            else:
                if inside and reached:
                    m += 1
                inside = False
        if inside and reached:
            m += 1
        counts[kept] = m
        kept += 1
    return lt, counts, attempts


def main():
    t0 = time.time()
    levels = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    sig, occ = fixed_height_stats(11, 20000, 1.0, 2.5e-4, levels, 0.02)
    print(f"E[sigma|H=1]  = {sig.mean():.4f} (target 0.6667)")
    v = sig.var(ddof=1)
    se_v = v * np.sqrt(2.0 / (len(sig) - 1))
    print(f"Var[sigma|H=1]= {v:.5f} +- {se_v:.5f} (target {4/45:.5f})")
    for j, a in enumerate(levels):
        m = occ[:, j].mean()
        se = occ[:, j].std(ddof=1) / np.sqrt(len(occ))
        print(f"  occ level {a:.2f}: {m:.4f} +- {se:.4f} (target {4*a*(1-a):.4f})")
    print(f"[{time.time()-t0:.1f}s]")

    t0 = time.time()
    a, b = 0.5, 0.25
    lt, counts, attempts = mixed_height_stats(12, 8000, 0.01, 2.5e-4, a, b, 0.02)
    print(f"\ngiven max>0.5 (n={len(lt)}, attempts={attempts}):")
    print(f"E[L_a]   = {lt.mean():.4f} +- {lt.std(ddof=1)/np.sqrt(len(lt)):.4f} (target {2*a:.3f})")
    print(f"E[count] = {counts.mean():.4f} +- {counts.std(ddof=1)/np.sqrt(len(counts)):.4f} (target {a/b:.3f})")
    print(f"P(count=0) = {(counts==0).mean():.4f} (target {b/(a+b):.4f})")
    print(f"[{time.time()-t0:.1f}s]")


if __name__ == "__main__":
    main()

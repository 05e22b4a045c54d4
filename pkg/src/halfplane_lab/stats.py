"""Statistical verification harness.

Every Monte Carlo experiment reduces to a handful of comparisons: a sample
against a closed-form law (KS), an empirical Laplace transform against a
formula (z-scores), independence of components (distance correlation with a
permutation null), moments against targets, and resolution ladders against an
extrapolated limit.  The uniform acceptance rule everywhere is

    |estimate - oracle| <= tol_se * stderr + bias_budget

with the bias budget stated by the producing experiment, never invented here.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as _sps

__all__ = [
    "EmpiricalSummary",
    "ks_test",
    "empirical_lt",
    "independence_test",
    "moment_check",
    "distance_correlation",
    "refinement_extrapolate",
    "acceptance_line",
    "report_digest",
]


@dataclass
class EmpiricalSummary:
    """Compact record of one validated sample."""

    n: int
    mean: float
    variance: float
    lt_points: list = field(default_factory=list)
    ks: Optional[tuple] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for _, _, se in self.lt_points:
            if se < 0:
                raise ValueError("stderr must be >= 0")
        if self.ks is not None and not (0.0 <= self.ks[1] <= 1.0):
            raise ValueError("p_value must lie in [0,1]")


def summarize(sample, lt_args=(), cdf=None, extra=None) -> EmpiricalSummary:
    x = np.asarray(sample, dtype=float)
    lt = empirical_lt(x, lt_args) if len(lt_args) else []
    ks = ks_test(x, cdf) if cdf is not None else None
    return EmpiricalSummary(
        n=len(x),
        mean=float(x.mean()),
        variance=float(x.var(ddof=1)) if len(x) > 1 else 0.0,
        lt_points=lt,
        ks=ks,
        extra=dict(extra or {}),
    )


def ks_test(sample, cdf: Callable[[np.ndarray], np.ndarray]):
    """One-sample Kolmogorov-Smirnov statistic with asymptotic p-value."""
    x = np.asarray(sample, dtype=float)
    if len(x) < 10:
        raise ValueError("need at least 10 points")
    if np.all(x == x[0]):
        raise ValueError("degenerate sample: all values equal")
    stat, p = _sps.kstest(x, cdf)
    return float(stat), float(p)


def ks_two_sample(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 10 or len(b) < 10:
        raise ValueError("need at least 10 points per sample")
    if np.all(a == a[0]) and np.all(b == b[0]):
        raise ValueError("degenerate samples")
    res = _sps.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def empirical_lt(sample, args: Sequence[float]):
    """Empirical Laplace transform E[exp(-arg X)] with standard errors.

    Returns a list of (arg, estimate, stderr) in the order given.
    """
    x = np.asarray(sample, dtype=float)
    if np.any(x < 0):
        raise ValueError("sample must be nonnegative")
    out = []
    n = len(x)
    for a in args:
        if a < 0:
            raise ValueError("args must be >= 0")
        if a == 0.0:
            out.append((0.0, 1.0, 0.0))
            continue
        v = np.exp(-a * x)
        se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append((float(a), float(v.mean()), se))
    return out


def _dcor_stat(a: np.ndarray, b: np.ndarray) -> float:
    # doubly centered distance matrices; biased dCor, fine for permutation use
    da = np.abs(a[:, None] - a[None, :])
    db = np.abs(b[:, None] - b[None, :])
    da = da - da.mean(axis=0) - da.mean(axis=1)[:, None] + da.mean()
    db = db - db.mean(axis=0) - db.mean(axis=1)[:, None] + db.mean()
    dcov2 = (da * db).mean()
    va = (da * da).mean()
    vb = (db * db).mean()
    if va <= 0 or vb <= 0:
        return 0.0
    return math.sqrt(max(dcov2, 0.0) / math.sqrt(va * vb))


def distance_correlation(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return _dcor_stat(a, b)


def independence_test(
    columns,
    names=None,
    n_permutations: int = 200,
    rng=None,
    max_points: int = 2000,
):
    """Pairwise distance-correlation tests with permutation p-values.

    Samples are subsampled to max_points first: the distance matrices are
    quadratic in n and the permutation null needs hundreds of replicates.
    Permutation testing is used instead of an asymptotic null because the
    transformed hull samples are heavy tailed.
    """
    cols = [np.asarray(c, dtype=float) for c in columns]
    n = len(cols[0])
    for c in cols:
        if len(c) != n:
            raise ValueError("length mismatch between columns")
    if n < 100:
        raise ValueError("need at least 100 points")
    gen = rng.generator if hasattr(rng, "generator") else (rng or np.random.default_rng(0))
    if n > max_points:
        idx = gen.choice(n, size=max_points, replace=False)
        cols = [c[idx] for c in cols]
        n = max_points
    if names is None:
        names = [f"col{i}" for i in range(len(cols))]
    pairs = []
    for i in range(len(cols)):
        for j in range(i + 1, len(cols)):
            stat = _dcor_stat(cols[i], cols[j])
            exceed = 0
            for _ in range(n_permutations):
                perm = gen.permutation(n)
                if _dcor_stat(cols[i][perm], cols[j]) >= stat:
                    exceed += 1
            p = (exceed + 1.0) / (n_permutations + 1.0)
            pairs.append(
                {"pair": (names[i], names[j]), "statistic": float(stat), "p_value": float(p)}
            )
    return {"n": n, "n_permutations": n_permutations, "pairs": pairs}


def moment_check(sample, p: int, target: float, tol_se: float = 3.0, bias_budget: float = 0.0):
    """Compare the p-th sample moment to target within tol_se standard errors."""
    if p < 1:
        raise ValueError("p must be >= 1")
    x = np.asarray(sample, dtype=float) ** p
    n = len(x)
    est = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    dev = abs(est - target)
    z = dev / se if se > 0 else math.inf * (dev > 0)
    ok = dev <= tol_se * se + bias_budget
    return {
        "p": p,
        "estimate": est,
        "stderr": se,
        "target": float(target),
        "z": float(z),
        "bias_budget": float(bias_budget),
        "pass": bool(ok),
    }


def refinement_extrapolate(estimates, stderrs, ratio: float = 4.0 ** -0.25):
    """Geometric extrapolation of a resolution ladder.

    estimates are ordered coarse to fine, each level refining the step by the
    same factor.  The limit is taken as

        L = e_last + (e_last - e_prev) * ratio / (1 - ratio)

    with `ratio` the assumed per-level error contraction.  The contraction is
    an empirical choice; the returned budget covers both the applied
    correction and the spread against the observed contraction ratio, so a
    wrong assumption widens the budget instead of silently biasing the
    answer.
    """
    e = [float(v) for v in estimates]
    s = [float(v) for v in stderrs]
    if len(e) < 2 or len(e) != len(s):
        raise ValueError("need matched estimates/stderrs, at least two levels")
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie in (0,1)")
    d_last = e[-1] - e[-2]
    corr = d_last * ratio / (1.0 - ratio)
    limit = e[-1] + corr
    se = math.hypot(s[-1] / (1.0 - ratio), s[-2] * ratio / (1.0 - ratio))
    budget = abs(corr)
    fitted = None
    if len(e) >= 3:
        d_prev = e[-2] - e[-3]
        if d_prev != 0.0 and d_last / d_prev > 0:
            fitted = d_last / d_prev
            if 0.0 < fitted < 1.0:
                alt = e[-1] + d_last * fitted / (1.0 - fitted)
                budget = abs(corr) + abs(alt - limit)
    return {
        "limit": float(limit),
        "stderr": float(se),
        "budget": float(budget),
        "levels": e,
        "level_stderrs": s,
        "ratio": float(ratio),
        "fitted_ratio": None if fitted is None else float(fitted),
    }


def acceptance_line(
    name: str,
    estimate: float,
    stderr: float,
    oracle: float,
    bias_budget: float = 0.0,
    tol_se: float = 3.0,
):
    """One pass/fail record in the uniform '3 s.e. + budget' convention."""
    dev = abs(estimate - oracle)
    ok = dev <= tol_se * stderr + bias_budget
    return {
        "name": name,
        "estimate": float(estimate),
        "stderr": float(stderr),
        "oracle": float(oracle),
        "bias_budget": float(bias_budget),
        "tol_se": float(tol_se),
        "pass": bool(ok),
    }


def report_digest(obj) -> str:
    """Stable digest of a report payload for the JSON outputs."""
    payload = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(payload).hexdigest()[:16]

"""Low-level stochastic drivers: RNG streams, Bessel paths, stable variates,
and the spectrally negative Levy process behind the perimeter spine.

Bessel processes of integer dimension are advanced by exact squared-Bessel
transitions (noncentral chi-squared), so the only discretization effects are
in hitting/last-passage detection, which uses a Brownian-bridge crossing
correction.  Dimension -1, which has no exact transition, uses Euler-Maruyama
with state-adaptive steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

__all__ = [
    "RngStream",
    "SamplePath",
    "LevyXiConfig",
    "bessel_path",
    "last_passage_time",
    "gamma_sample",
    "stable_increment",
    "levy_xi_path",
    "poisson_points",
]

_U32 = 0xFFFFFFFF


class RngStream:
    """Deterministic RNG stream keyed by (seed, stream_id).

    Two streams with different ids derived from the same seed are statistically
    independent (seed-sequence spawning).  `substream(k)` derives a child
    stream; children with distinct k are independent of each other and of the
    parent's future output.
    """

    def __init__(self, seed: int, stream_id: int = 0, _key: tuple[int, ...] | None = None):
        if seed < 0:
            raise ValueError("seed must be >= 0")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = _key if _key is not None else (self.stream_id,)
        if any(k < 0 or k > _U32 for k in key):
            raise ValueError("stream ids must fit in 32 bits")
        self._key = key
        self.generator = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=key))

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, _key=self._key + (int(k),))

    def integers(self, *args, **kw):
        return self.generator.integers(*args, **kw)

    def __repr__(self):  # pragma: no cover
        return f"RngStream(seed={self.seed}, key={self._key})"


@dataclass
class SamplePath:
    """A discretized path: times, values, and free-form metadata."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal shape")


# ---------------------------------------------------------------------------
# Bessel processes


def _besq_step(gen: np.random.Generator, x: np.ndarray, h: np.ndarray, dim: float) -> np.ndarray:
    """Exact squared-Bessel transition over elementwise step h."""
    nonc = x / h
    return h * gen.noncentral_chisquare(dim, nonc)


def bessel_path(dim: int, x0: float, grid: Sequence[float], rng: RngStream, barrier: float | None = None) -> SamplePath:
    """Sample a Bessel path of dimension 5, 3 or -1 on the given time grid.

    Dimensions 5 and 3 use exact squared-Bessel transitions, so the grid can
    be arbitrarily coarse without bias at the grid times.  Dimension -1
    (drift -1/x) is Euler-Maruyama with substeps capped at 0.1 x^2; it
    requires `barrier` in (0, x0) and the path is frozen at the barrier from
    the first hitting time on (meta["hit_time"], bridge-corrected).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with >= 2 points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    gen = rng.generator
    if dim in (3, 5):
        if x0 < 0:
            raise ValueError("x0 must be >= 0")
        vals = np.empty(len(grid))
        vals[0] = x0
        x = x0 * x0
        for k in range(1, len(grid)):
            h = grid[k] - grid[k - 1]
            x = float(_besq_step(gen, np.asarray(x), np.asarray(h), float(dim)))
            vals[k] = math.sqrt(x)
        return SamplePath(grid, vals, {"dim": dim})
    if dim == -1:
        if barrier is None or not (0.0 < barrier < x0):
            raise ValueError("dim=-1 needs barrier in (0, x0)")
        vals = np.empty(len(grid))
        vals[0] = x0
        x = x0
        hit_time = math.inf
        for k in range(1, len(grid)):
            if hit_time < math.inf:
                vals[k] = barrier
                continue
            t0, t1 = grid[k - 1], grid[k]
            t = t0
            while t < t1 - 1e-15:
                h = min(t1 - t, 0.1 * x * x)
                xn = x + (-1.0 / x) * h + math.sqrt(h) * gen.standard_normal()
                if xn <= 0.0:
                    raise RuntimeError("dim=-1 path crossed zero before the barrier; reduce the grid step")
                t += h
                if xn <= barrier:
                    frac = (x - barrier) / max(x - xn, 1e-300)
                    hit_time = t - h + frac * h
                    x = barrier
                    break
                # Brownian-bridge probability of an unseen dip below the barrier
                if math.exp(-2.0 * (x - barrier) * (xn - barrier) / h) > gen.random():
                    hit_time = t - 0.5 * h
                    x = barrier
                    break
                x = xn
            vals[k] = x
        return SamplePath(grid, vals, {"dim": dim, "barrier": barrier, "hit_time": hit_time})
    raise ValueError("dim must be one of 5, 3, -1")


def _spine_batch(
    r: float,
    tol: float,
    n: int,
    rng: RngStream,
    base_step: float | None = None,
    f: Callable[[np.ndarray], np.ndarray] | None = None,
    record: bool = False,
    record_stride: int = 8,
    coarse_kappa: float = 1.0 / 12.0,
    fine_mult: float = 2.0,
):
    """Vectorized last-passage engine for the hull spine (Bessel(5) from 0).

    Runs n independent Bessel(5) paths with exact squared-Bessel steps until
    they first exceed M = (r/sqrt3) tol^{-1/3}; the last time at or below
    l = r/sqrt3 is the swallowed-length variable.  Steps are `base_step` while
    R < fine_mult*l and grow like coarse_kappa*(R-l)^2 above; dips between
    grid points are caught with a Brownian-bridge correction.

    Returns dict with arrays: tau (last passage), end_time, integral (trapezoid
    of f along the path up to tau, if f given), and optionally per-path
    recorded (times, values) lists at `record_stride` fine-step resolution.

    Truncation: the path may return below l after exceeding M with probability
    ~ (l/M)^3 = tol; that tail is the documented bias budget of tau.
    """
    if r <= 0 or not (0 < tol < 1) or n < 1:
        raise ValueError("need r > 0, tol in (0,1), n >= 1")
    gen = rng.generator
    ell = r / math.sqrt(3.0)
    big_m = ell * tol ** (-1.0 / 3.0)
    m2 = big_m * big_m
    if base_step is None:
        base_step = 5e-4 * r * r
    x_hi = fine_mult * ell

    x = np.zeros(n)  # squared radius
    t = np.zeros(n)
    below = np.ones(n, dtype=bool)  # currently at or below ell
    tau = np.zeros(n)
    i_acc = np.zeros(n)
    i_tau = np.zeros(n)
    end_time = np.zeros(n)
    active_idx = np.arange(n)
    rec_t: list[np.ndarray] = []
    rec_v: list[np.ndarray] = []
    rec_i: list[np.ndarray] = []
    step_no = 0

    while active_idx.size:
        xs = x[active_idx]
        ts = t[active_idx]
        rs = np.sqrt(xs)
        h = np.where(rs < x_hi, base_step, np.maximum(base_step, coarse_kappa * (rs - ell) ** 2))
        xn = _besq_step(gen, xs, h, 5.0)
        rn = np.sqrt(xn)

        if f is not None:
            contrib = 0.5 * h * (f(rs) + f(rn))
        else:
            contrib = None

        was_below = below[active_idx]
        now_below = rn <= ell
        up = was_below & ~now_below
        stay_above = ~was_below & ~now_below

        # bridge dip for steps staying above the level
        if np.any(stay_above):
            d0 = rs[stay_above] - ell
            d1 = rn[stay_above] - ell
            pdip = np.exp(-2.0 * d0 * d1 / h[stay_above])
            dip = gen.random(pdip.shape) < pdip
            dip_full = np.zeros(len(active_idx), dtype=bool)
            dip_full[np.flatnonzero(stay_above)[dip]] = True
        else:
            dip_full = np.zeros(len(active_idx), dtype=bool)

        # last-passage snapshots
        if np.any(up):
            idx = active_idx[up]
            frac = (ell - rs[up]) / np.maximum(rn[up] - rs[up], 1e-300)
            tau[idx] = ts[up] + frac * h[up]
            if contrib is not None:
                i_tau[idx] = i_acc[idx] + frac * contrib[up]
        if np.any(dip_full):
            idx = active_idx[dip_full]
            tau[idx] = ts[dip_full] + 0.5 * h[dip_full]
            if contrib is not None:
                i_tau[idx] = i_acc[idx] + 0.5 * contrib[dip_full]

        if contrib is not None:
            i_acc[active_idx] += contrib
        x[active_idx] = xn
        t[active_idx] = ts + h
        below[active_idx] = now_below

        if record and step_no % record_stride == 0:
            rec_i.append(active_idx.copy())
            rec_t.append(t[active_idx].copy())
            rec_v.append(np.sqrt(xn))

        done = xn >= m2
        if np.any(done):
            idx = active_idx[done]
            end_time[idx] = t[idx]
            active_idx = active_idx[~done]
        step_no += 1

    out = {"tau": tau, "end_time": end_time, "ell": ell, "big_m": big_m, "base_step": base_step}
    if f is not None:
        out["integral"] = i_tau
    if record:
        # reassemble ragged per-path histories
        times = [[0.0] for _ in range(n)]
        values = [[0.0] for _ in range(n)]
        for idxs, ts_, vs_ in zip(rec_i, rec_t, rec_v):
            for j, tt, vv in zip(idxs, ts_, vs_):
                times[j].append(tt)
                values[j].append(vv)
        out["paths"] = [
            (np.asarray(tt), np.asarray(vv)) for tt, vv in zip(times, values)
        ]
    return out


def last_passage_time(r: float, tol: float, rng: RngStream, base_step: float | None = None) -> tuple[float, SamplePath]:
    """Last time a Bessel(5) spine from 0 sits at r/sqrt(3), plus the path.

    The path is simulated until it first exceeds M = (r/sqrt3) tol^{-1/3};
    beyond that point a return below the level has probability ~ tol, which is
    the truncation budget recorded in meta.
    """
    out = _spine_batch(r, tol, 1, rng, base_step=base_step, record=True, record_stride=1)
    tt, vv = out["paths"][0]
    meta = {"level": out["ell"], "exceed_level": out["big_m"], "tol": tol, "tau": float(out["tau"][0])}
    return float(out["tau"][0]), SamplePath(tt, vv, meta)


# ---------------------------------------------------------------------------
# Elementary variates


def gamma_sample(shape: float, scale: float, rng: RngStream, size=None):
    """Gamma(shape, scale) draws."""
    if shape <= 0 or scale <= 0:
        raise ValueError("shape and scale must be > 0")
    return rng.generator.gamma(shape, scale, size=size)


def stable_increment(alpha: float, skew: float, dt: float, rng: RngStream, size=None):
    """Strictly stable increment over time dt, Chambers-Mallows-Stuck method.

    Parameterization: the returned variate X satisfies, for skew beta and
    0 < alpha <= 2 (alpha != 1),
        E exp(i u X) = exp(-dt |u|^alpha (1 - i beta sgn(u) tan(pi alpha/2))),
    i.e. scale sigma = dt^{1/alpha}.  alpha = 2 gives N(0, 2 dt); alpha = 3/2,
    beta = 1 is spectrally positive with E exp(-l X) = exp(dt sqrt(2) l^{3/2});
    alpha = 1/2, beta = 1 is the subordinator with E exp(-l X) =
    exp(-dt sqrt(2) l^{1/2}).
    """
    if not (0.0 < alpha <= 2.0):
        raise ValueError("alpha must be in (0, 2]")
    if not (-1.0 <= skew <= 1.0):
        raise ValueError("skew must be in [-1, 1]")
    if np.any(np.asarray(dt) <= 0):
        raise ValueError("dt must be > 0")
    gen = rng.generator
    if alpha == 2.0:
        return gen.normal(0.0, np.sqrt(2.0 * dt), size=size)
    u = gen.uniform(-0.5 * math.pi, 0.5 * math.pi, size=size)
    w = gen.exponential(1.0, size=size)
    if alpha == 1.0:
        half_pi = 0.5 * math.pi
        x = (2.0 / math.pi) * (
            (half_pi + skew * u) * np.tan(u)
            - skew * np.log((half_pi * w * np.cos(u)) / (half_pi + skew * u))
        )
        sigma = dt
        return sigma * x + (2.0 / math.pi) * skew * sigma * np.log(sigma)
    ta = math.tan(0.5 * math.pi * alpha)
    b = math.atan(skew * ta) / alpha
    s = (1.0 + (skew * ta) ** 2) ** (0.5 / alpha)
    x = (
        s
        * np.sin(alpha * (u + b))
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos(u - alpha * (u + b)) / w) ** ((1.0 - alpha) / alpha)
    )
    return np.asarray(dt) ** (1.0 / alpha) * x


# ---------------------------------------------------------------------------
# Spinal Levy process


@dataclass
class LevyXiConfig:
    """Discretization of the perimeter spinal Levy process.

    step  -- time grid step of the returned path
    eps   -- small-jump cutoff: jumps in (-eps, 0) are replaced according to mode
    mode  -- "gaussian_correction" (matched Brownian motion with drift) or
             "drift_only" (small jumps dropped entirely)
    """

    step: float = 2e-3
    eps: float = 1e-3
    mode: str = "gaussian_correction"

    def validate(self) -> None:
        if self.step <= 0 or self.eps <= 0:
            raise ValueError("step and eps must be > 0")
        if self.mode not in ("gaussian_correction", "drift_only"):
            raise ValueError("mode must be gaussian_correction or drift_only")


_LK_DRIFT = 4.0 * math.sqrt(2.0 / (3.0 * math.pi))
_LK_NORM = 1.0 / math.sqrt(6.0 * math.pi)
_xi_param_cache: dict[float, dict] = {}


def _xi_params(eps: float) -> dict:
    """Rate, compensator and small-jump variance for cutoff eps (cached).

    In u = 1 - e^y coordinates the jump density is _LK_NORM (3-u) u^{-5/2} on
    (0, 1); the cutoff keeps u > u_eps = 1 - e^{-eps}.
    """
    if eps in _xi_param_cache:
        return _xi_param_cache[eps]
    u_eps = -math.expm1(-eps)
    # rate: int_{u_eps}^1 (3-u) u^{-5/2} du = 2(u^{-3/2}-1) - 2(u^{-1/2}-1) evaluated down
    rate = _LK_NORM * (2.0 * (u_eps ** -1.5 - 1.0) - 2.0 * (u_eps ** -0.5 - 1.0))
    # compensator: int (1-e^y) pi(dy) over kept jumps = int u (3-u) u^{-5/2} du
    comp = _LK_NORM * (6.0 * (u_eps ** -0.5 - 1.0) - 2.0 * (1.0 - math.sqrt(u_eps)))
    # small-jump second moment: int_{-eps}^0 y^2 pi(y) dy, u = v^2 substitution
    def integrand(v):
        v2 = v * v
        ly = math.log1p(-v2)
        return 2.0 * ly * ly * (3.0 - v2) / (v2 * v2)

    var_small, _ = quad(integrand, 0.0, math.sqrt(u_eps), epsabs=1e-13, epsrel=1e-11, limit=200)
    var_small *= _LK_NORM
    # third absolute moment of small jumps, for the correction-bias budget
    def integrand3(v):
        v2 = v * v
        ly = -math.log1p(-v2)
        return 2.0 * ly ** 3 * (3.0 - v2) / (v2 * v2)

    m3_small, _ = quad(integrand3, 0.0, math.sqrt(u_eps), epsabs=1e-13, epsrel=1e-11, limit=200)
    m3_small *= _LK_NORM
    params = {
        "u_eps": u_eps,
        "rate": rate,
        "comp": comp,
        "var_small": var_small,
        "m3_small": m3_small,
    }
    _xi_param_cache[eps] = params
    return params


def _xi_jump_sizes(count: int, u_eps: float, gen: np.random.Generator) -> np.ndarray:
    """Jump sizes y < 0 with density prop. to (3-u) u^{-5/2} in u = 1-e^y coords.

    Proposal u^{-5/2} by inverse CDF, acceptance (3-u)/3 >= 2/3.
    """
    out = np.empty(count)
    filled = 0
    a = u_eps ** -1.5
    while filled < count:
        todo = count - filled
        m = int(todo * 1.6) + 16
        uu = (a - gen.random(m) * (a - 1.0)) ** (-2.0 / 3.0)
        keep = gen.random(m) * 3.0 < (3.0 - uu)
        got = uu[keep][:todo]
        out[filled : filled + got.size] = got
        filled += got.size
    return np.log1p(-out)


def _xi_increment_block(
    n_paths: int, n_steps: int, h: float, cfg: LevyXiConfig, gen: np.random.Generator
) -> np.ndarray:
    """(n_paths, n_steps) i.i.d. increments of the truncated/corrected process."""
    p = _xi_params(cfg.eps)
    drift = _LK_DRIFT + p["comp"]
    if cfg.mode == "gaussian_correction":
        drift -= 0.5 * p["var_small"]
    inc = np.full((n_paths, n_steps), drift * h)
    if cfg.mode == "gaussian_correction":
        inc += math.sqrt(p["var_small"] * h) * gen.standard_normal((n_paths, n_steps))
    counts = gen.poisson(p["rate"] * h, size=(n_paths, n_steps))
    total = int(counts.sum())
    if total:
        sizes = _xi_jump_sizes(total, p["u_eps"], gen)
        flat = np.zeros(counts.size)
        np.add.at(flat, np.repeat(np.arange(counts.size), counts.ravel()), sizes)
        inc += flat.reshape(counts.shape)
    return inc


def levy_xi_path(horizon: float, cfg: LevyXiConfig, rng: RngStream) -> SamplePath:
    """One path of the spinal Levy process on [0, horizon] at cfg.step resolution.

    The process has Laplace exponent psi_levy: E exp(q xi_t) = exp(t psi(q)).
    Jumps below cfg.eps in magnitude are replaced per cfg.mode; with
    gaussian_correction the residual error in the exponent is
    |q^3 - q|/6 * m3_small (meta["budget_coeff"]), of order eps^{3/2}.
    """
    cfg.validate()
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    n_steps = int(math.ceil(horizon / cfg.step))
    inc = _xi_increment_block(1, n_steps, cfg.step, cfg, rng.generator)[0]
    times = np.arange(n_steps + 1) * cfg.step
    vals = np.concatenate([[0.0], np.cumsum(inc)])
    p = _xi_params(cfg.eps)
    meta = {
        "eps": cfg.eps,
        "mode": cfg.mode,
        "rate": p["rate"],
        "budget_coeff": p["m3_small"] / 6.0,
    }
    return SamplePath(times, vals, meta)


def poisson_points(
    intensity: Callable[[np.ndarray], np.ndarray],
    bound: float,
    interval: tuple[float, float],
    rng: RngStream,
) -> np.ndarray:
    """Inhomogeneous Poisson points on [a, b] by thinning under `bound`.

    Raises if the intensity exceeds the bound anywhere it is evaluated.
    """
    a, b = interval
    if not (b > a) or bound < 0:
        raise ValueError("need b > a and bound >= 0")
    gen = rng.generator
    n = gen.poisson(bound * (b - a))
    if n == 0:
        return np.empty(0)
    ts = np.sort(gen.uniform(a, b, size=n))
    lam = np.asarray(intensity(ts), dtype=float)
    if np.any(lam > bound * (1.0 + 1e-9)):
        raise ValueError("intensity exceeds the stated bound")
    keep = gen.random(n) * bound < lam
    return ts[keep]

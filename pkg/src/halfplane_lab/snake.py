"""Brownian snake excursions: conditioned sampling, truncation, exit measure.

A snake excursion is represented by its lifetime path zeta_s on a uniform
s-grid together with the tip label W_hat_s.  Sampling follows the excursion
measure normalized so the mass of {max zeta > e} is 1/(2e):

* the height H of the lifetime excursion is drawn from P(H > h) = e/h, h >= e
  (the conditioned height law);
* given H, the lifetime is a Brownian excursion conditioned to have maximum H,
  built from two independent Bessel(3) first-passage legs run to level H and
  glued back to back;
* labels are Brownian along the branches of the genealogical tree.  The
  contour is swept once; a stack holds the ancestral line of the current tip
  as nodes spaced `dlh` apart in height.  Descents retract the stack (with
  exact Gaussian bridge interpolation at partial pops), ascents extend it with
  fresh Gaussian increments.  Node labels realize the tree-indexed Gaussian
  field exactly in law at the stored resolution.

Each stack segment additionally carries an exact sample of the Brownian
bridge minimum between its two node labels, so level-crossing detection
(minimal label, truncation, exit bands) does not degrade with the node
spacing: crossings are resolved at the law level, not the grid level.  When a
segment is split by a partial retraction, the old minimum mark is discarded
and both halves get fresh conditionally-correct marks, which keeps every
retained statistic exact in law.  The one remaining resolution effect is the
s-grid itself: subtrees that live entirely between two contour grid times are
never seen.  Estimators sensitive to this (hitting probabilities, exit
masses) should be run at two or three duration resolutions and extrapolated.

Per grid point the kernel reports the minimum over the tip's full historical
path (bridge dips included); truncation and exit-measure estimation are pure
array operations on that output, deterministic given a trajectory.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .sampler import RngStream

__all__ = [
    "SnakeSampleConfig",
    "SnakeTrajectory",
    "sample_snake",
    "w_star",
    "truncate",
    "exit_measure_estimate",
    "excursion_minima",
    "dump_trajectory_csv",
]


@dataclass
class SnakeSampleConfig:
    """Resolution knobs for conditioned snake sampling.

    eps_height          -- height conditioning threshold e: only excursions
                           with max lifetime > e are sampled; estimators
                           renormalize by the conditioned mass 1/(2e).
    tree_resolution     -- branch (height) step of the label walk relative to
                           the sampled height H.  Node labels are exact in law
                           at any spacing and segment minimum marks keep
                           crossing detection exact, so this mainly controls
                           how finely the tip curve is resolved.
    label_step          -- absolute branch step override: if set, the height
                           step is label_step^2 regardless of H.
    duration_resolution -- s-grid step relative to H^2.  The one knob with a
                           law-level bias: subtrees living entirely between
                           grid times are invisible.
    """

    eps_height: float = 0.01
    tree_resolution: float = 0.02
    label_step: float | None = None
    duration_resolution: float = 1e-3

    def validate(self) -> None:
        if self.eps_height <= 0 or self.tree_resolution <= 0 or self.duration_resolution <= 0:
            raise ValueError("eps_height, tree_resolution, duration_resolution must be > 0")
        if self.label_step is not None and self.label_step <= 0:
            raise ValueError("label_step must be > 0 when given")


@dataclass
class SnakeTrajectory:
    """Discretized snake: uniform s-grid, lifetime, tip label, and metadata.

    meta carries (when kernel-built): w_star_fine (min over every tree
    segment's bridge-minimum mark, finer than the grid tips), path_min (per
    grid point, min over the tip's full historical path), height, ds,
    label_step, mass.
    """

    s: np.ndarray
    zeta: np.ndarray
    tip: np.ndarray
    x0: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)
        self.tip = np.asarray(self.tip, dtype=float)
        if not (self.s.shape == self.zeta.shape == self.tip.shape):
            raise ValueError("s, zeta, tip must have equal shape")
        if np.any(self.zeta < 0):
            raise ValueError("zeta must be >= 0")

    @property
    def duration(self) -> float:
        return float(self.meta.get("sigma", self.s[-1] if len(self.s) else 0.0))


@njit(cache=True)
def _bes3_leg_chunk(height, hs, buf, i0, r0):
    """Continue a Bessel(3) first-passage leg from radius r0, writing grid
    values into buf starting at index i0.

    Returns (next_index, current_radius, done).  done=False means the buffer
    filled up; the caller must grow it and call again with the returned state.
    Never restart a leg on overflow: redrawing conditions on fitting the
    buffer and biases lifetimes short.

    Each grid value uses the 3-d Gaussian representation of the squared
    process, so it is exact in law.  Crossings between grid points are caught
    with the Brownian bridge excursion probability; without this the detected
    passage time is late by O(sqrt(hs)), which shows up as a duration bias in
    every tree.
    """
    n = i0
    r = r0
    cap = buf.shape[0]
    sq = math.sqrt(hs)
    while True:
        if n >= cap - 1:
            return n, r, False
        buf[n] = r
        n += 1
        a = r + sq * np.random.standard_normal()
        b = sq * np.random.standard_normal()
        c = sq * np.random.standard_normal()
        nxt = math.sqrt(a * a + b * b + c * c)
        if nxt >= height:
            break
        # bridge upcrossing of the barrier within the step
        if np.random.random() < math.exp(-2.0 * (height - r) * (height - nxt) / hs):
            break
        r = nxt
    buf[n] = height
    n += 1
    return n, r, True


@njit(cache=True)
def _bes3_leg(height, hs, buf):
    """One whole first-passage leg into a caller-sized buffer.

    Returns the count, or -1 if buf cannot hold the leg.  Kept for
    diagnostics that preallocate generously; sampling paths that must never
    reject go through _bes3_leg_chunk resumption instead.
    """
    n, r, done = _bes3_leg_chunk(height, hs, buf, 0, 0.0)
    if not done:
        return -1
    return n


@njit(cache=True)
def _bes3_leg_grow(height, hs, max_pts):
    """First-passage leg with resumable buffer growth.

    Returns (buf, count); count is -1 only if max_pts was exceeded.
    """
    cap = 8192
    buf = np.empty(cap)
    i, r, done = _bes3_leg_chunk(height, hs, buf, 0, 0.0)
    while not done:
        if 2 * cap > max_pts:
            return buf, -1
        nb = np.empty(2 * cap)
        nb[:i] = buf[:i]
        buf = nb
        cap = 2 * cap
        i, r, done = _bes3_leg_chunk(height, hs, buf, i, r)
    return buf, i


@njit(cache=True, inline="always")
def _bridge_min(a, b, dh):
    # exact minimum of a Brownian bridge from a to b over height-gap dh
    u = np.random.random()
    d = a - b
    return 0.5 * (a + b - math.sqrt(d * d - 2.0 * dh * math.log(u)))


@njit(cache=True)
def _snake_labels(x0, zeta, dlh):
    """Label sweep along a given lifetime grid.

    Returns (tip, path_min, w_star_fine).  Uses numba's module RNG; callers
    seed it.
    """
    n = zeta.shape[0]
    tip = np.empty(n)
    pmin = np.empty(n)

    # ancestral-line stack: nodes at strictly increasing heights.  Entry i>0
    # describes the segment (h[i-1], h[i]): its top label, its bridge-min
    # mark, and the running min of marks 1..i.
    scap = int(np.max(zeta) / dlh) + 64
    st_h = np.empty(scap)
    st_lab = np.empty(scap)
    st_mark = np.empty(scap)
    st_amin = np.empty(scap)
    st_h[0] = 0.0
    st_lab[0] = x0
    st_mark[0] = np.inf
    st_amin[0] = np.inf
    top = 0
    w_star_fine = x0  # marks fold in as their segments retire

    tip[0] = x0
    pmin[0] = np.inf
    prev = zeta[0]

    for k in range(1, n):
        z = zeta[k]
        if z < prev:
            # retract to height z
            while top > 0 and st_h[top] > z:
                if st_h[top - 1] >= z:
                    # segment fully above z: retire it
                    if st_mark[top] < w_star_fine:
                        w_star_fine = st_mark[top]
                    top -= 1
                else:
                    # segment straddles z: split, retire the upper half
                    h_lo = st_h[top - 1]
                    h_hi = st_h[top]
                    a = st_lab[top - 1]
                    b = st_lab[top]
                    frac = (z - h_lo) / (h_hi - h_lo)
                    mean = a + frac * (b - a)
                    var = (z - h_lo) * (h_hi - z) / (h_hi - h_lo)
                    lab = mean + math.sqrt(var) * np.random.standard_normal()
                    m_hi = _bridge_min(lab, b, h_hi - z)
                    if m_hi < w_star_fine:
                        w_star_fine = m_hi
                    m_lo = _bridge_min(a, lab, z - h_lo)
                    st_h[top] = z
                    st_lab[top] = lab
                    st_mark[top] = m_lo
                    st_amin[top] = min(st_amin[top - 1], m_lo)
                    break
        elif z > prev:
            # extend from height prev to z in steps of dlh
            h_cur = st_h[top]
            lab = st_lab[top]
            while h_cur < z:
                dh = z - h_cur
                if dh > dlh:
                    dh = dlh
                nxt = lab + math.sqrt(dh) * np.random.standard_normal()
                mark = _bridge_min(lab, nxt, dh)
                lab = nxt
                h_cur += dh
                top += 1
                if top >= scap:
                    scap *= 2
                    nh = np.empty(scap)
                    nl = np.empty(scap)
                    nk = np.empty(scap)
                    nm = np.empty(scap)
                    for i in range(top):
                        nh[i] = st_h[i]
                        nl[i] = st_lab[i]
                        nk[i] = st_mark[i]
                        nm[i] = st_amin[i]
                    st_h, st_lab, st_mark, st_amin = nh, nl, nk, nm
                st_h[top] = h_cur
                st_lab[top] = lab
                st_mark[top] = mark
                st_amin[top] = min(st_amin[top - 1], mark)
        tip[k] = st_lab[top]
        pmin[k] = st_amin[top]
        prev = z

    # the contour ends at the root so every segment has retired already;
    # flush defensively for degenerate grids
    while top > 0:
        if st_mark[top] < w_star_fine:
            w_star_fine = st_mark[top]
        top -= 1

    return tip, pmin, w_star_fine


@njit(cache=True)
def _snake_core(seed, x0, height, hs, dlh, max_pts):
    """Lifetime legs glued at the peak, then the label sweep.

    Returns (zeta, tip, path_min, n, w_star_fine, status).  status != 0 means
    the point budget was exceeded.
    """
    np.random.seed(seed)

    leg1, n1 = _bes3_leg_grow(height, hs, max_pts)
    if n1 < 0:
        return np.empty(0), np.empty(0), np.empty(0), 0, 0.0, 1
    leg2, n2 = _bes3_leg_grow(height, hs, max_pts)
    if n2 < 0:
        return np.empty(0), np.empty(0), np.empty(0), 0, 0.0, 1

    n = n1 + n2
    if n > max_pts:
        return np.empty(0), np.empty(0), np.empty(0), 0, 0.0, 1
    zeta = np.empty(n)
    for i in range(n1):
        zeta[i] = leg1[i]
    for i in range(n2):
        zeta[n1 + i] = leg2[n2 - 1 - i]

    tip, pmin, w_star_fine = _snake_labels(x0, zeta, dlh)
    return zeta, tip, pmin, n, w_star_fine, 0


def sample_snake(x0: float, cfg: SnakeSampleConfig, rng: RngStream) -> SnakeTrajectory:
    """One snake excursion from x0 conditioned on lifetime height > cfg.eps_height.

    The conditioned height law is P(H > h) = eps_height / h; estimators under
    the unconditioned excursion measure multiply by the mass 1/(2 eps_height),
    recorded in meta["mass"].
    """
    cfg.validate()
    gen = rng.generator
    height = cfg.eps_height / gen.random()
    return _sample_given_height(x0, height, cfg, rng)


def _sample_given_height(
    x0: float, height: float, cfg: SnakeSampleConfig, rng: RngStream
) -> SnakeTrajectory:
    gen = rng.generator
    hs = cfg.duration_resolution * height * height
    if cfg.label_step is not None:
        dlh = cfg.label_step ** 2
    else:
        dlh = cfg.tree_resolution * height
    seed = int(gen.integers(0, 2**31 - 1))
    max_pts = int(2e7)
    zeta, tip, pmin, n, wsf, status = _snake_core(seed, x0, height, hs, dlh, max_pts)
    if status != 0:
        raise RuntimeError("snake point budget exceeded; increase duration_resolution")
    s = np.arange(n) * hs
    meta = {
        "height": height,
        "ds": hs,
        "sigma": n * hs,
        "w_star_fine": float(wsf),
        "path_min": pmin,
        "label_step": math.sqrt(dlh),
        "mass": 1.0 / (2.0 * cfg.eps_height),
        "eps_height": cfg.eps_height,
    }
    return SnakeTrajectory(s, zeta, tip, x0, meta)


def w_star(traj: SnakeTrajectory) -> float:
    """Minimum tip label over the grid.

    Kernel-built trajectories carry a finer minimum over every tree segment's
    bridge-minimum mark in meta["w_star_fine"]; quantitative estimators should
    prefer it.
    """
    return float(np.min(traj.tip))


def _path_min_from_tips(zeta: np.ndarray, tip: np.ndarray) -> np.ndarray:
    """Historical-path minimum per grid point from (zeta, tip) alone.

    The ancestors of grid point k are the running-minimum records of zeta
    scanning left from k; their tips are the ancestral labels.  A monotone
    stack yields all of them in one pass.  Fallback for hand-built
    trajectories without kernel metadata; coarser than the kernel's value
    (within-branch dips between recorded tips are not seen).
    """
    n = len(zeta)
    out = np.full(n, np.inf)
    st_z = np.empty(n + 1)
    st_m = np.empty(n + 1)
    top = -1
    for k in range(n):
        while top >= 0 and st_z[top] >= zeta[k]:
            top -= 1
        anc = st_m[top] if top >= 0 else np.inf
        out[k] = min(anc, tip[k])
        top += 1
        st_z[top] = zeta[k]
        st_m[top] = min(tip[k], st_m[top - 1] if top > 0 else np.inf)
    return out


def _path_min(traj: SnakeTrajectory) -> np.ndarray:
    cached = traj.meta.get("path_min")
    if cached is not None and len(cached) == len(traj.zeta):
        return np.asarray(cached, dtype=float)
    return _path_min_from_tips(traj.zeta, traj.tip)


def truncate(traj: SnakeTrajectory, y: float) -> SnakeTrajectory:
    """Restrict the snake to paths stopped at their first passage of level y.

    Keeps grid times whose tip path has stayed strictly above y, reindexed by
    cumulative retained time.  Crossings are detected from the branch label
    walk (bridge minima included when kernel metadata is present), so the
    stopped endpoint is resolved to within one label-walk step.  Idempotent:
    kept points carry their historical minima along.
    """
    if y >= traj.x0:
        raise ValueError("truncation level must be below the starting label")
    pmin = _path_min(traj)
    keep = pmin > y
    ds = traj.meta.get("ds", traj.s[1] - traj.s[0] if len(traj.s) > 1 else 0.0)
    idx = np.flatnonzero(keep)
    new_s = np.arange(len(idx)) * ds
    meta = dict(traj.meta)
    meta["path_min"] = pmin[idx]
    meta["sigma"] = len(idx) * ds
    meta["truncated_at"] = y
    meta.pop("w_star_fine", None)  # refers to the full tree, drop
    return SnakeTrajectory(new_s, traj.zeta[idx], traj.tip[idx], traj.x0, meta)


def exit_measure_estimate(
    traj: SnakeTrajectory, y: float, eps: float | None = None, richardson: bool = True
) -> float:
    """Occupation-density estimate of the exit mass at level y.

    eps^{-2} Leb{s : tip path never reached y, tip < y + eps}; with
    richardson=True the two-point extrapolation 2 Z_{eps/2} - Z_eps removes
    the leading band-width bias.  eps defaults to 10x the trajectory's label
    resolution; a warning is issued when eps < 3x that resolution.
    """
    label_step = traj.meta.get("label_step", 0.0)
    if eps is None:
        if not label_step:
            raise ValueError("eps required for trajectories without label_step metadata")
        eps = 10.0 * label_step
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if label_step and eps < 3.0 * label_step:
        warnings.warn(
            "exit-measure eps below 3x label resolution; estimate unreliable", RuntimeWarning
        )
    ds = traj.meta.get("ds", traj.s[1] - traj.s[0] if len(traj.s) > 1 else 0.0)
    pmin = _path_min(traj)
    no_hit = pmin > y

    def occ(e):
        band = no_hit & (traj.tip < y + e)
        return ds * float(np.count_nonzero(band)) / (e * e)

    if not richardson:
        return occ(eps)
    return 2.0 * occ(0.5 * eps) - occ(eps)


def excursion_minima(traj: SnakeTrajectory, level: float) -> np.ndarray:
    """Minimum historical label of each excursion of the snake below `level`.

    An excursion below `level` is a maximal run of grid times whose tip path
    has already reached `level`; its minimum is the deepest historical label
    seen on the run.  Returns the minima in contour order.  Together with
    exit_measure_estimate this exposes the branching structure at the level:
    counts of deep excursions given the exit mass.
    """
    pmin = _path_min(traj)
    below = pmin <= level
    if not below.any():
        return np.empty(0)
    d = np.diff(below.astype(np.int8))
    starts = np.flatnonzero(d == 1) + 1
    ends = np.flatnonzero(d == -1) + 1
    if below[0]:
        starts = np.r_[0, starts]
    if below[-1]:
        ends = np.r_[ends, len(below)]
    return np.array([float(pmin[a:b].min()) for a, b in zip(starts, ends)])


def dump_trajectory_csv(traj: SnakeTrajectory, path: str) -> None:
    """Write (s, zeta, tip) columns as CSV with a schema header comment."""
    arr = np.column_stack([traj.s, traj.zeta, traj.tip])
    with open(path, "w") as fh:
        fh.write("# schema=1\n")
        fh.write("s,zeta,tip\n")
        np.savetxt(fh, arr, delimiter=",", fmt="%.12g")

"""Closed-form laws for half-plane hull statistics.

Every simulation experiment in this package is checked against one of the
formulas collected here.  The main objects:

* hitting_prob(x, y)      -- mass of snake paths started at x reaching level y.
* exit_lt(x, r, lam)      -- truncated-exit Laplace functional on {min label > 0}.
* g_mu(mu, x)             -- occupation-time exponent for snakes staying positive.
* big_G(r, mu, nu)        -- joint transform of one swallowed boundary length and
                             its volume component.
* joint_hull_lt(params)   -- joint Laplace transform of (perimeter, two boundary
                             lengths, volume) of the hull at radius r.
* beta_density(r, t)      -- density of a swallowed boundary length (equivalently
                             1/beta ~ Gamma(3/2, rate r^2/6)).
* psi_levy / psi_levy_lk  -- cumulant function of the perimeter spinal Levy
                             process, in Gamma-ratio and Levy-Khintchine form.
* csbp_* / h_func         -- branching process with immigration driving the
                             backward perimeter construction.
* two_point_perimeter_lt, cond_backward_lt, moments_ssmp -- perimeter process
                             marginals and conditional transforms.

Numerical conventions.  All coth-based expressions are evaluated through the
helpers `_zcoth` and `_cothsq_excess`, which switch to a power series for small
arguments so the mu -> 0 limits are exact rather than 0/0.  Gamma ratios use
log-gamma.  Out-of-range transform values raise NumericalConsistencyError
instead of being clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

__all__ = [
    "NumericalConsistencyError",
    "HullLawParams",
    "PerimeterLawParams",
    "psi_levy",
    "psi_levy_lk",
    "csbp_mechanisms",
    "u_lambda",
    "csbp_imm_lt",
    "h_func",
    "hitting_prob",
    "exit_lt",
    "g_mu",
    "big_G",
    "joint_hull_lt",
    "beta_density",
    "gamma_lt",
    "perimeter_lt",
    "volume_given_perimeter_lt",
    "two_point_perimeter_lt",
    "cond_backward_lt",
    "moments_ssmp",
    "appendix_F_f",
    "tec_formu_value",
]


class NumericalConsistencyError(ValueError):
    """A closed-form evaluation left its proven range (transform in [0,1], etc.)."""


# series switchover for z*coth(z)-type helpers; below this the series with
# terms through z^8 is accurate to ~1e-18 relative
_COTH_SMALL = 0.1


def _zcoth(z: float) -> float:
    """z*coth(z), analytic at 0 (value 1)."""
    if z < 0:
        raise ValueError("z must be >= 0")
    if z < _COTH_SMALL:
        z2 = z * z
        # 1 + z^2/3 - z^4/45 + 2 z^6/945 - z^8/4725
        return 1.0 + z2 * (1.0 / 3.0 + z2 * (-1.0 / 45.0 + z2 * (2.0 / 945.0 - z2 / 4725.0)))
    return z / math.tanh(z)


def _cothsq_excess(z: float) -> float:
    """coth(z)^2 - 1/z^2 - 2/3, analytic at 0 (value 0).

    The subtraction removes both the double pole and the constant so callers
    can reassemble coth^2 terms without cancellation for small z.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    if z < _COTH_SMALL:
        z2 = z * z
        # z^2/15 - 2 z^4/189 + z^6/675
        return z2 * (1.0 / 15.0 + z2 * (-2.0 / 189.0 + z2 / 675.0))
    c = 1.0 / math.tanh(z)
    return (c * c) - 1.0 / (z * z) - 2.0 / 3.0


def psi_levy(q: float) -> float:
    """Cumulant function of the perimeter spine: sqrt(8/3) q Gamma(q+1)/Gamma(q+1/2).

    Uses log-gamma so large q (> 50) does not overflow.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    if q == 0.0:
        return 0.0
    return math.sqrt(8.0 / 3.0) * q * math.exp(gammaln(q + 1.0) - gammaln(q + 0.5))


# drift of the Levy-Khintchine form; also equals psi_levy(1) exactly
_LK_DRIFT = 4.0 * math.sqrt(2.0 / (3.0 * math.pi))
_LK_NORM = 1.0 / math.sqrt(6.0 * math.pi)


def _lk_integrand_v(v: float, q: float) -> float:
    # After u = 1 - e^y and u = v^2 the jump integral becomes
    #   int_0^1 2 ((1-v^2)^q - 1 + q v^2) (3 - v^2) v^-4 dv
    # with the integrand analytic at v = 0 (value 3 q (q-1)).
    v2 = v * v
    if v < 1e-2:
        # binomial series of (1-u)^q - 1 + q u in u = v^2, from u^2 on
        c2 = 0.5 * q * (q - 1.0)
        c3 = -q * (q - 1.0) * (q - 2.0) / 6.0
        c4 = q * (q - 1.0) * (q - 2.0) * (q - 3.0) / 24.0
        core = v2 * v2 * (c2 + v2 * (c3 + v2 * c4))
    else:
        core = math.expm1(q * math.log1p(-v2)) + q * v2
    return 2.0 * core * (3.0 - v2) / (v2 * v2)


def psi_levy_lk(q: float, quad_tol: float = 1e-10) -> float:
    """Same cumulant via its Levy-Khintchine representation (drift + jump integral).

    Independent of psi_levy: evaluates
        4 sqrt(2/(3 pi)) q + (6 pi)^{-1/2} int_{-inf}^0 (e^{qy} - 1 + q(1-e^y))
                              (2+e^y)(1-e^y)^{-5/2} e^y dy
    by adaptive quadrature after substituting u = 1-e^y, u = v^2, which makes
    the integrand bounded at the origin.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    if q == 0.0:
        return 0.0
    val, err = quad(_lk_integrand_v, 0.0, 1.0, args=(q,), epsabs=quad_tol, epsrel=1e-12, limit=200)
    if err > max(quad_tol * 10.0, 1e-8 * max(1.0, abs(val))):
        raise NumericalConsistencyError(f"LK quadrature error {err:.3e} above tolerance")
    return _LK_DRIFT * q + _LK_NORM * val


def csbp_mechanisms(lam: float) -> tuple[float, float]:
    """Branching and immigration mechanisms (sqrt(8/3) lam^{3/2}, sqrt(8/3) lam^{1/2})."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    c = math.sqrt(8.0 / 3.0)
    return c * lam ** 1.5, c * math.sqrt(lam)


def u_lambda(lam: float, s: float) -> float:
    """Flow of the branching ODE u' = -sqrt(8/3) u^{3/2}, u(0) = lam.

    Closed form (lam^{-1/2} + s sqrt(2/3))^{-2}; returns 0 for lam = 0.
    """
    if lam < 0 or s < 0:
        raise ValueError("lam and s must be >= 0")
    if lam == 0.0:
        return 0.0
    return (lam ** -0.5 + s * math.sqrt(2.0 / 3.0)) ** -2.0


def csbp_imm_lt(x: float, s: float, lam: float) -> float:
    """E_x[exp(-lam Y_s)] for the branching process with immigration.

    Equals (1 + s sqrt(2 lam / 3))^{-2} exp(-x u_lambda(lam, s)).
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if lam == 0.0:
        return 1.0
    out = (1.0 + s * math.sqrt(2.0 * lam / 3.0)) ** -2.0 * math.exp(-x * u_lambda(lam, s))
    if not 0.0 <= out <= 1.0:
        raise NumericalConsistencyError(f"csbp_imm_lt left [0,1]: {out}")
    return out


def h_func(a: float, x: float) -> float:
    """Space-time harmonic weight a^{-2} exp(-3x/(2a^2)); E_x[h_a(Y_s)] = h_{a+s}(x)."""
    if a <= 0 or x < 0:
        raise ValueError("need a > 0 and x >= 0")
    return math.exp(-1.5 * x / (a * a)) / (a * a)


def hitting_prob(x: float, y: float) -> float:
    """Excursion mass of snake paths from x whose labels reach y < x: 3/(2(x-y)^2)."""
    if not y < x:
        raise ValueError("need y < x")
    d = x - y
    return 1.5 / (d * d)


def exit_lt(x: float, r: float, lam: float) -> float:
    """Excursion-measure transform of the level-r exit mass on {min label > 0}.

    N_x((1 - e^{-lam Z_r}) 1{min > 0})
      = (3/2) [ (x - r + (2 lam/3 + r^{-2})^{-1/2})^{-2} - x^{-2} ],  0 < r < x.
    """
    if not (0.0 < r < x):
        raise ValueError("need 0 < r < x")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    shift = (2.0 * lam / 3.0 + r ** -2.0) ** -0.5
    out = 1.5 * ((x - r + shift) ** -2.0 - x ** -2.0)
    if out < -1e-15:
        raise NumericalConsistencyError(f"exit_lt negative: {out}")
    return max(out, 0.0)


def g_mu(mu: float, x: float) -> float:
    """Occupation exponent sqrt(mu/2)(3 coth((2 mu)^{1/4} x)^2 - 2) - 3/(2 x^2).

    Rewritten as 3 sqrt(mu/2) * (coth(z)^2 - z^{-2} - 2/3) with z = (2 mu)^{1/4} x,
    which is exact and analytic in mu at 0 (g_0 = 0, g_mu ~ mu x^2 / 5).
    """
    if mu < 0 or x <= 0:
        raise ValueError("need mu >= 0 and x > 0")
    if mu == 0.0:
        return 0.0
    z = (2.0 * mu) ** 0.25 * x
    out = 3.0 * math.sqrt(mu / 2.0) * _cothsq_excess(z)
    if out < 0.0:
        raise NumericalConsistencyError(f"g_mu negative: {out}")
    return out


def big_G(r: float, mu: float, nu: float) -> float:
    """Joint transform G_r(mu, nu) of one swallowed length and its outer volume part.

    G_r(mu, nu) = r exp(-r sqrt(2/3) sqrt(sqrt(2 mu) + nu))
                    * ( (2 mu)^{1/4} coth((2 mu)^{1/4} r) + sqrt(2/3) sqrt(sqrt(2 mu) + nu) )
    with the mu -> 0 limit (1 + r sqrt(2 nu / 3)) exp(-r sqrt(2 nu / 3)).
    """
    if r <= 0 or mu < 0 or nu < 0:
        raise ValueError("need r > 0, mu >= 0, nu >= 0")
    a = (2.0 * mu) ** 0.25
    root = math.sqrt(2.0 / 3.0) * math.sqrt(math.sqrt(2.0 * mu) + nu)
    # a*coth(a*r) -> 1/r as mu -> 0; evaluate as zcoth(a r)/r
    acoth = _zcoth(a * r) / r
    out = r * math.exp(-r * root) * (acoth + root)
    if not 0.0 < out <= 1.0 + 1e-12:
        raise NumericalConsistencyError(f"big_G left (0,1]: {out}")
    return min(out, 1.0)


@dataclass
class HullLawParams:
    """Arguments of the joint hull transform at radius r.

    lam    -- perimeter variable (total exit mass Z_r)
    nu1    -- first swallowed boundary length
    nu2    -- second swallowed boundary length
    mu     -- volume variable (all three volume components)
    """

    r: float
    lam: float = 0.0
    nu1: float = 0.0
    nu2: float = 0.0
    mu: float = 0.0

    def validate(self) -> None:
        if self.r <= 0:
            raise ValueError("r must be > 0")
        for name in ("lam", "nu1", "nu2", "mu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def joint_hull_lt(p: HullLawParams) -> float:
    """E[exp(-lam Z - nu1 beta - nu2 gamma - mu V)] for the radius-r hull.

    Equals G_r(mu, nu1) G_r(mu, nu2) / D with
        D = (2/3) lam r^2 + sqrt(2 mu) r^2 (coth((2 mu)^{1/4} r)^2 - 2/3).
    Writing z = (2 mu)^{1/4} r, the mu-part of D is exactly
    1 + z^2 (coth(z)^2 - z^{-2} - 2/3), so D -> (2/3) lam r^2 + 1 as mu -> 0
    and the formula degenerates to the exponential perimeter transform.
    """
    p.validate()
    r = p.r
    z = (2.0 * p.mu) ** 0.25 * r
    denom = (2.0 / 3.0) * p.lam * r * r + 1.0 + z * z * _cothsq_excess(z)
    out = big_G(r, p.mu, p.nu1) * big_G(r, p.mu, p.nu2) / denom
    if not 0.0 < out <= 1.0 + 1e-12:
        raise NumericalConsistencyError(f"joint_hull_lt left (0,1]: {out}")
    return min(out, 1.0)


def beta_density(r: float, t) -> np.ndarray | float:
    """Density of a swallowed boundary length: 3^{-3/2} r^3 / sqrt(2 pi) t^{-5/2} e^{-r^2/(6t)}.

    Equivalent statement: the reciprocal is Gamma with shape 3/2 and rate r^2/6.
    Accepts scalar or array t; density is 0 for t <= 0.
    """
    if r <= 0:
        raise ValueError("r must be > 0")
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    tp = t_arr[pos]
    c = r ** 3 / (3.0 ** 1.5 * math.sqrt(2.0 * math.pi))
    out[pos] = c * tp ** -2.5 * np.exp(-r * r / (6.0 * tp))
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def gamma_lt(r: float, lam: float) -> float:
    """Laplace transform of a swallowed boundary length: (1 + r s) e^{-r s}, s = sqrt(2 lam/3)."""
    if r <= 0 or lam < 0:
        raise ValueError("need r > 0 and lam >= 0")
    s = math.sqrt(2.0 * lam / 3.0)
    return (1.0 + r * s) * math.exp(-r * s)


def perimeter_lt(r: float, lam: float) -> float:
    """Laplace transform of the hull perimeter Z_r: exponential with mean 2 r^2/3."""
    if r <= 0 or lam < 0:
        raise ValueError("need r > 0 and lam >= 0")
    return 1.0 / (1.0 + 2.0 * lam * r * r / 3.0)


def volume_given_perimeter_lt(r: float, lam: float, mu: float) -> float:
    """E[exp(-lam Z - mu V0)] where V0 is the inner volume component.

    (3/(2 r^2)) / (lam + sqrt(mu/2)(3 coth((2 mu)^{1/4} r)^2 - 2)); the
    denominator is lam + g_mu(r) + 3/(2 r^2), assembled without cancellation.
    """
    if r <= 0 or lam < 0 or mu < 0:
        raise ValueError("need r > 0, lam >= 0, mu >= 0")
    base = 1.5 / (r * r)
    out = base / (lam + g_mu(mu, r) + base)
    if not 0.0 < out <= 1.0:
        raise NumericalConsistencyError(f"volume_given_perimeter_lt left (0,1]: {out}")
    return out


@dataclass
class PerimeterLawParams:
    """Self-similar perimeter process parameters: start x >= 0 and horizon t > 0."""

    x: float = 0.0
    t: float = 1.0

    def validate(self) -> None:
        if self.x < 0 or self.t <= 0:
            raise ValueError("need x >= 0 and t > 0")


def two_point_perimeter_lt(t: float, lam1: float, lam2: float) -> float:
    """E[exp(-(3/2) lam1 Z_1 - (3/2) lam2 Z_{1+t})] from the zero entrance law.

    Closed form (1 + lam1 + lam2 (1 + t sqrt(1 + lam1))^2)^{-1}, valid for all
    nonnegative arguments.
    """
    if t < 0 or lam1 < 0 or lam2 < 0:
        raise ValueError("arguments must be >= 0")
    out = 1.0 / (1.0 + lam1 + lam2 * (1.0 + t * math.sqrt(1.0 + lam1)) ** 2)
    return out


def cond_backward_lt(s: float, t: float, z: float, lam: float) -> float:
    """E[exp(-lam Z_s) | Z on [t, infty)] as a function of Z_t = z, for 0 < s <= t.

    [t / (s + (t-s)(1 + 2 lam s^2/3)^{1/2})]^2
      * exp(-(3z/2)[(t - s + (2 lam/3 + s^{-2})^{-1/2})^{-2} - t^{-2}]).
    """
    if not (0.0 < s <= t):
        raise ValueError("need 0 < s <= t")
    if z < 0 or lam < 0:
        raise ValueError("z and lam must be >= 0")
    b = math.sqrt(1.0 + 2.0 * lam * s * s / 3.0)
    pref = (t / (s + (t - s) * b)) ** 2
    shift = (2.0 * lam / 3.0 + s ** -2.0) ** -0.5
    expo = -1.5 * z * ((t - s + shift) ** -2.0 - t ** -2.0)
    out = pref * math.exp(expo)
    if not 0.0 <= out <= 1.0 + 1e-12:
        raise NumericalConsistencyError(f"cond_backward_lt left [0,1]: {out}")
    return min(out, 1.0)


def moments_ssmp(x: float, t: float, p: int) -> float:
    """p-th moment of the self-similar perimeter process started from x at time t.

    sum_{k=0}^{2p} (2/3)^{k/2} C(2p, k) p! / Gamma(p + 1 - k/2) x^{p - k/2} t^k.
    At x = 0 only the k = 2p term survives: p! (2/3)^p t^{2p}.
    """
    if p < 1 or int(p) != p:
        raise ValueError("p must be a positive integer")
    if x < 0 or t < 0:
        raise ValueError("x and t must be >= 0")
    p = int(p)
    if x == 0.0:
        return math.factorial(p) * (2.0 / 3.0) ** p * t ** (2 * p)
    total = 0.0
    logfac_p = gammaln(p + 1.0)
    for k in range(2 * p + 1):
        log_term = (
            0.5 * k * math.log(2.0 / 3.0)
            + gammaln(2 * p + 1.0)
            - gammaln(k + 1.0)
            - gammaln(2 * p - k + 1.0)
            + logfac_p
            - gammaln(p + 1.0 - 0.5 * k)
            + (p - 0.5 * k) * math.log(x)
        )
        total += math.exp(log_term) * (t ** k if t > 0 or k == 0 else 0.0)
    return total


def appendix_F_f(s: float, a: float, nu: float) -> tuple[float, float]:
    """The pair (f(s), F(s)) solving F'' = 2 f F used to identify big_G.

    f(s) = nu + a^2 (3 coth(a sqrt(3) s)^2 - 2)
    F(s) = exp(-s sqrt(2 (a^2 + nu))) (a coth(a sqrt(3) s) + sqrt((2/3)(a^2 + nu)))
    and r F(r / sqrt(3)) = big_G(r, a^4/2, nu).
    """
    if s <= 0 or a < 0 or nu < 0:
        raise ValueError("need s > 0, a >= 0, nu >= 0")
    z = a * math.sqrt(3.0) * s
    root3s = math.sqrt(3.0) * s
    # a coth(a sqrt3 s) = zcoth(z) / (sqrt3 s), finite as a -> 0
    acoth = _zcoth(z) / root3s
    # a^2 (3 coth(z)^2 - 2) = 3 a^2 (coth^2 - 1/z^2 - 2/3) + 3 a^2/z^2 with z = a root3s,
    # and 3 a^2/z^2 = 1/s^2 exactly, so the a -> 0 limit needs no branch
    f_val = nu + 3.0 * a * a * _cothsq_excess(z) + 1.0 / (s * s)
    F_val = math.exp(-s * math.sqrt(2.0 * (a * a + nu))) * (acoth + math.sqrt((2.0 / 3.0) * (a * a + nu)))
    return f_val, F_val


def tec_formu_value(x: float, y: float, c: float) -> float:
    """Reversed-spine exponential functional value (y/x)(x-c)/(y-c), 0 <= c < x < y."""
    if not (0.0 <= c < x < y):
        raise ValueError("need 0 <= c < x < y")
    return (y / x) * (x - c) / (y - c)

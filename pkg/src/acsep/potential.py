"""Singular double-well potential, its monotone split, and regularizations.

The potential F lives on (-1, 1), blows up in derivative at the
endpoints, and is semiconvex: F'' >= -C_F.  Everything downstream
works with the monotone part

    beta(r) = F'(r) + C_F * r,

its resolvent J_lam = (I + lam*beta)^(-1), the Yosida approximation
beta_lam = (I - J_lam)/lam, and the regularized potential

    F_lam(r) = F(0) + int_0^r beta_lam - (C_F/2) r^2.

The built-in logarithmic kind is

    F(r) = (theta/2)[(1+r)ln(1+r) + (1-r)ln(1-r)] + (theta0/2)(1-r^2),

with 0 < theta < theta0 and C_F = theta0 - theta.  All evaluations
are exactly odd/even in floating point (log1p differences), which the
solver's sign-flip equivariance relies on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Points with |r| beyond this are treated as "at the barrier": potential
# and barrier evaluations reject them instead of clamping, so separation
# failures surface as errors rather than silently saturated numbers.
DOMAIN_GUARD = 1.0 - 1e-15

# Largest representable point strictly inside (-1, 1); resolvent outputs
# may legitimately live between DOMAIN_GUARD and this.
_R_SAT = float(np.nextafter(1.0, 0.0))

_RESOLVENT_TOL = 1e-12
_RESOLVENT_MAX_ITER = 100


class PotentialKind(enum.Enum):
    LOGARITHMIC = "logarithmic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PotentialSpec:
    """Double-well potential with logarithmic temperature theta.

    For the logarithmic kind only (theta, theta0) matter and c_f is
    derived as theta0 - theta.  A custom kind supplies callables for
    F, F' and F'' (vectorized over numpy arrays) plus its own c_f;
    ``beta_antideriv`` may be given when a closed form for
    int_0^r beta exists, otherwise the Moreau envelope falls back to
    adaptive quadrature.
    """

    theta: float = 1.0
    theta0: float = 2.0
    c_f: float = 1.0
    kind: PotentialKind = PotentialKind.LOGARITHMIC
    f: Optional[Callable] = None
    df: Optional[Callable] = None
    d2f: Optional[Callable] = None
    beta_antideriv: Optional[Callable] = None

    @staticmethod
    def logarithmic(theta: float, theta0: float) -> "PotentialSpec":
        if not 0.0 < theta < theta0:
            raise ValueError(
                f"logarithmic potential needs 0 < theta < theta0, got ({theta}, {theta0})"
            )
        return PotentialSpec(theta=theta, theta0=theta0, c_f=theta0 - theta,
                             kind=PotentialKind.LOGARITHMIC)

    @staticmethod
    def custom(f, df, d2f, c_f, beta_antideriv=None) -> "PotentialSpec":
        return PotentialSpec(theta=0.0, theta0=0.0, c_f=float(c_f),
                             kind=PotentialKind.CUSTOM, f=f, df=df, d2f=d2f,
                             beta_antideriv=beta_antideriv)


@dataclass(frozen=True)
class StationaryInterval:
    """[r_F, R_F]: outside it, F' pushes back toward the wells."""

    r_low: float
    r_high: float


@dataclass(frozen=True)
class Barrier:
    """Concentration gauge G_s(r) = (1 - r^2)^(-sigma)."""

    sigma: int

    def __post_init__(self):
        if int(self.sigma) < 1 or self.sigma != int(self.sigma):
            raise ValueError(f"barrier exponent must be a positive integer, got {self.sigma}")


def _as_float_array(r):
    r = np.asarray(r, dtype=float)
    return r, (r.ndim == 0)


def _check_domain(r):
    if np.any(np.abs(r) >= DOMAIN_GUARD) or not np.all(np.isfinite(r)):
        bad = np.max(np.abs(r[np.isfinite(r)])) if np.any(np.isfinite(r)) else np.nan
        raise ValueError(
            f"evaluation outside (-1, 1): max |r| = {bad!r} (guard {DOMAIN_GUARD!r})"
        )


def eval_F(spec: PotentialSpec, r):
    """Potential value F(r); domain error at or beyond the barriers."""
    r, scalar = _as_float_array(r)
    _check_domain(r)
    if spec.kind is PotentialKind.LOGARITHMIC:
        ent = (1.0 + r) * np.log1p(r) + (1.0 - r) * np.log1p(-r)
        out = 0.5 * spec.theta * ent + 0.5 * spec.theta0 * (1.0 - r * r)
    else:
        out = np.asarray(spec.f(r), dtype=float)
    return float(out) if scalar else out


def eval_dF(spec: PotentialSpec, r):
    """F'(r) = (theta/2) ln((1+r)/(1-r)) - theta0 * r for the log kind."""
    r, scalar = _as_float_array(r)
    _check_domain(r)
    if spec.kind is PotentialKind.LOGARITHMIC:
        out = 0.5 * spec.theta * (np.log1p(r) - np.log1p(-r)) - spec.theta0 * r
    else:
        out = np.asarray(spec.df(r), dtype=float)
    return float(out) if scalar else out


def eval_d2F(spec: PotentialSpec, r):
    r, scalar = _as_float_array(r)
    _check_domain(r)
    if spec.kind is PotentialKind.LOGARITHMIC:
        out = spec.theta / (1.0 - r * r) - spec.theta0
    else:
        out = np.asarray(spec.d2f(r), dtype=float)
    return float(out) if scalar else out


def beta(spec: PotentialSpec, r):
    """Monotone part beta(r) = F'(r) + C_F r, exactly odd in fp."""
    r, scalar = _as_float_array(r)
    _check_domain(r)
    if spec.kind is PotentialKind.LOGARITHMIC:
        out = 0.5 * spec.theta * (np.log1p(r) - np.log1p(-r)) - spec.theta * r
    else:
        out = np.asarray(spec.df(r), dtype=float) + spec.c_f * r
    return float(out) if scalar else out


def beta_prime(spec: PotentialSpec, r):
    r, scalar = _as_float_array(r)
    if spec.kind is PotentialKind.LOGARITHMIC:
        rr = r * r
        out = spec.theta * rr / (1.0 - rr)
    else:
        out = np.asarray(spec.d2f(r), dtype=float) + spec.c_f
    return float(out) if scalar else out


def beta_antideriv(spec: PotentialSpec, r):
    """hat{beta}(r) = int_0^r beta; closed form for the log kind."""
    r, scalar = _as_float_array(r)
    _check_domain(r)
    if spec.kind is PotentialKind.LOGARITHMIC:
        ent = (1.0 + r) * np.log1p(r) + (1.0 - r) * np.log1p(-r)
        out = 0.5 * spec.theta * ent - 0.5 * spec.theta * r * r
    elif spec.beta_antideriv is not None:
        out = np.asarray(spec.beta_antideriv(r), dtype=float)
    else:
        from scipy.integrate import quad

        flat = np.atleast_1d(r).ravel()
        vals = np.array([quad(lambda s: beta(spec, s), 0.0, x, limit=200)[0] for x in flat])
        out = vals.reshape(np.shape(r))
    return float(out) if scalar else out


def _beta_unguarded(spec, x):
    # resolvent iterates may sit between DOMAIN_GUARD and the last
    # representable point below 1; beta is still finite there
    if spec.kind is PotentialKind.LOGARITHMIC:
        return 0.5 * spec.theta * (np.log1p(x) - np.log1p(-x)) - spec.theta * x
    return np.asarray(spec.df(x), dtype=float) + spec.c_f * x


def _beta_prime_unguarded(spec, x):
    if spec.kind is PotentialKind.LOGARITHMIC:
        xx = x * x
        return spec.theta * xx / (1.0 - xx)
    return np.asarray(spec.d2f(x), dtype=float) + spec.c_f


def resolvent(spec: PotentialSpec, lam, r, x0=None, tol=_RESOLVENT_TOL,
              polish: bool = True):
    """J_lam(r): the unique x in (-1, 1) with x + lam*beta(x) = r.

    Safeguarded Newton (bisection bracket on (-1, 1), Newton steps when
    they stay inside).  ``lam`` may be an array broadcastable against
    ``r`` and must be positive.  When the true root is closer to +-1
    than one ulp the nearest representable point is returned; this is
    the saturated regime |r| >> 1 where beta_lam(r) ~ (r -+ 1)/lam.

    With ``polish`` (the default) iteration continues until the bracket
    collapses to a few ulps, so the Yosida identity beta_lam = beta o
    J_lam holds to ~1e-16/lam; the time stepper turns this off and
    stops at a residual of 1e-13*(1+|r|), which is all it needs.

    Raises RuntimeError when an interior root fails to reach ``tol``
    within the iteration cap, which indicates a misconfigured spec.
    """
    r, scalar = _as_float_array(r)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("resolvent requires lam > 0")
    lam_b, r_b = np.broadcast_arrays(lam, r)
    shape = r_b.shape

    hi = np.full(shape, _R_SAT)
    lo = -hi
    # saturated tails: phi has no sign change inside the representable bracket
    phi_hi = hi + lam_b * _beta_unguarded(spec, hi) - r_b
    phi_lo = lo + lam_b * _beta_unguarded(spec, lo) - r_b
    sat_hi = phi_hi <= 0.0
    sat_lo = phi_lo >= 0.0

    if x0 is None:
        x = np.clip(r_b, -(1.0 - 1e-2), 1.0 - 1e-2)
    else:
        x = np.clip(np.broadcast_to(np.asarray(x0, dtype=float), shape), lo, hi).copy()
    x = np.where(sat_hi, hi, np.where(sat_lo, lo, x))

    phi = x + lam_b * _beta_unguarded(spec, x) - r_b
    tol_arr = tol * (1.0 + np.abs(r_b))
    # two ways to converge: a small-enough residual, or a bracket
    # collapsed to a few ulps (near the barriers, beta' blows up and
    # the achievable residual is lam * beta' * ulp(x), far above any
    # fixed tolerance, while x itself is at full precision)
    width_tol = 4e-16
    phi_target = 0.0 if polish else 0.1 * tol_arr
    done = sat_hi | sat_lo | (np.abs(phi) <= phi_target)
    for _ in range(_RESOLVENT_MAX_ITER):
        if done.all():
            break
        pos = phi > 0.0
        hi = np.where(~done & pos, x, hi)
        lo = np.where(~done & ~pos, x, lo)
        dphi = 1.0 + lam_b * _beta_prime_unguarded(spec, x)
        cand = x - phi / dphi
        inside = (cand > lo) & (cand < hi) & np.isfinite(cand)
        x_new = np.where(inside, cand, 0.5 * (lo + hi))
        x = np.where(done, x, x_new)
        phi = np.where(done, phi, x + lam_b * _beta_unguarded(spec, x) - r_b)
        done = done | (np.abs(phi) <= phi_target) | (hi - lo <= width_tol)

    interior_bad = (~(sat_hi | sat_lo) & (np.abs(phi) > tol_arr)
                    & (hi - lo > width_tol))
    if np.any(interior_bad):
        raise RuntimeError(
            f"resolvent failed to converge: worst residual {np.max(np.abs(phi[interior_bad]))!r}"
        )
    return float(x) if scalar else x


def yosida_beta(spec: PotentialSpec, lam, r, x0=None):
    """beta_lam(r) = (r - J_lam(r)) / lam, the Lipschitz surrogate of beta."""
    r, scalar = _as_float_array(r)
    j = resolvent(spec, lam, r, x0=x0)
    out = (r - j) / lam
    return float(out) if scalar else out


def yosida_pair(spec: PotentialSpec, lam, r, x0=None):
    """(J_lam(r), beta_lam(r), beta_lam'(r)) in one resolvent solve.

    beta_lam'(r) = beta'(J)/(1 + lam*beta'(J)) by implicit differentiation;
    the solver uses all three per Newton iteration (coarse, unpolished
    resolvent target: the step residual tolerance dominates).
    """
    r = np.asarray(r, dtype=float)
    j = resolvent(spec, lam, r, x0=x0, polish=False)
    bl = (r - j) / lam
    bpj = _beta_prime_unguarded(spec, j)
    blp = bpj / (1.0 + lam * bpj)
    return j, bl, blp


def moreau_F(spec: PotentialSpec, lam, r):
    """Regularized potential F_lam(r) = F(0) + hat{beta}_lam(r) - (C_F/2) r^2.

    The Moreau envelope is evaluated through the resolvent:
    hat{beta}_lam(r) = hat{beta}(J_lam(r)) + (lam/2) * beta_lam(r)^2.
    """
    r, scalar = _as_float_array(r)
    j = resolvent(spec, lam, r)
    bl = (r - j) / lam
    env = beta_antideriv(spec, j) + 0.5 * lam * bl * bl
    out = eval_F(spec, np.zeros(())) + env - 0.5 * spec.c_f * r * r
    return float(out) if scalar else out


def barrier_G(barrier: Barrier, r):
    """(G_s, G_s', G_s'') at r, with G_s(r) = (1-r^2)^(-sigma).

    G_s'(r)  = 2 s r / (1-r^2)^(s+1)
    G_s''(r) = 2 s ((2s+1) r^2 + 1) / (1-r^2)^(s+2)
    """
    r, scalar = _as_float_array(r)
    _check_domain(r)
    s = int(barrier.sigma)
    w = 1.0 - r * r
    g = w ** (-s)
    g1 = 2.0 * s * r * w ** (-(s + 1))
    g2 = 2.0 * s * ((2.0 * s + 1.0) * r * r + 1.0) * w ** (-(s + 2))
    if scalar:
        return float(g), float(g1), float(g2)
    return g, g1, g2


def stationary_points(spec: PotentialSpec, tol: float = 1e-10) -> StationaryInterval:
    """Wells of the logarithmic potential: r_F = -r*, R_F = +r*.

    r* is the positive root of (theta/2) ln((1+r)/(1-r)) = theta0 * r,
    bracketed by bisection and polished by Newton.  Custom kinds must
    supply their own interval.
    """
    if spec.kind is not PotentialKind.LOGARITHMIC:
        raise ValueError("stationary_points only knows the logarithmic kind")

    def dF(x):
        return 0.5 * spec.theta * (math.log1p(x) - math.log1p(-x)) - spec.theta0 * x

    lo, hi = 1e-14, _R_SAT
    if dF(lo) >= 0.0 or dF(hi) <= 0.0:
        raise RuntimeError("failed to bracket the positive well: degenerate potential")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if dF(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    x = 0.5 * (lo + hi)
    for _ in range(8):  # Newton polish well past the bisection tolerance
        d2 = spec.theta / (1.0 - x * x) - spec.theta0
        step = dF(x) / d2
        x_new = x - step
        if not (lo <= x_new <= hi):
            break
        x = x_new
        if abs(step) < 1e-17:
            break
    return StationaryInterval(r_low=-x, r_high=x)


def validate_potential(spec: PotentialSpec, n_samples: int = 10_000,
                       divergence_threshold: float = 5.0):
    """Sampled checks of the structural assumptions on F.

    F(0) finite, F'(0) = 0, F'' >= -c_f on a Chebyshev grid, and F'
    diverging with the right signs at +-(1 - 1e-8).  Sampling cannot
    certify a pathological custom F; it rejects the honest mistakes.
    """
    if spec.kind is PotentialKind.LOGARITHMIC and not 0.0 < spec.theta < spec.theta0:
        raise ValueError("logarithmic potential needs 0 < theta < theta0")
    f0 = eval_F(spec, 0.0)
    if not np.isfinite(f0):
        raise ValueError("F(0) is not finite")
    if abs(eval_dF(spec, 0.0)) > 1e-12:
        raise ValueError("F'(0) != 0")
    k = np.arange(n_samples, dtype=float)
    grid = np.cos(np.pi * k / (n_samples - 1)) * (1.0 - 1e-8)
    d2 = eval_d2F(spec, grid)
    if np.min(d2) < -spec.c_f - 1e-9 * (1.0 + abs(spec.c_f)):
        raise ValueError(
            f"semiconvexity violated: min F'' = {np.min(d2)!r} < -c_f = {-spec.c_f!r}"
        )
    edge = 1.0 - 1e-8
    if eval_dF(spec, edge) < divergence_threshold:
        raise ValueError("F' does not diverge to +inf at r -> 1-")
    if eval_dF(spec, -edge) > -divergence_threshold:
        raise ValueError("F' does not diverge to -inf at r -> -1+")
    return True

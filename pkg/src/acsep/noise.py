"""Degenerate multiplicative noise: coefficient family, constants, increments.

The diffusion acts mode by mode: mode k of the (truncated) cylindrical
Wiener process drives the field through a scalar coefficient h_k(u(x)).
The built-in power family

    h_k(r) = (1 - r^2)^(sigma + 3) / (k + 1)

vanishes with sigma+2 derivatives at the barriers, which is what turns
the noise off where the potential blows up.  The operator actually used
by the solver is the resolvent composition H_lam(v) = H(J_lam(v)), so
coefficients are never evaluated outside [-1, 1].

Mode truncation: sums over k are cut at n_modes; the omitted energy of
the assumption constants decays like 1/(k+1)^2 and its analytic tail
bound is reported alongside the truncated values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from . import rng
from .potential import PotentialKind, PotentialSpec, eval_d2F, resolvent


class NoiseKind(enum.Enum):
    POWER = "power_family"
    CUSTOM = "custom"


@dataclass(frozen=True)
class NoiseSpec:
    """Coefficient family (h_k), truncation level, and noise intensity.

    ``epsilon`` multiplies increments as sqrt(epsilon); epsilon = 0
    reproduces the deterministic equation through the same code path.
    """

    sigma: int = 3
    n_modes: int = 16
    epsilon: float = 1.0
    kind: NoiseKind = NoiseKind.POWER
    custom_h: Optional[Callable] = None  # (k, r) -> array, CUSTOM only

    def __post_init__(self):
        if self.sigma < 1 or self.n_modes < 1:
            raise ValueError("need sigma >= 1 and n_modes >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.kind is NoiseKind.CUSTOM and self.custom_h is None:
            raise ValueError("custom noise kind needs the custom_h callable")


@dataclass(frozen=True)
class WienerIncrement:
    """One step's worth of mode increments, each Gaussian(0, dt)."""

    dt: float
    values: np.ndarray


@dataclass(frozen=True)
class NoiseConstants:
    """Truncated assumption constants and analytic tail bounds.

    c_h, c_h_sigma are the square roots of the truncated sums defining
    C_H^2 and C_{H,sigma}^2.  The *_sq_tail fields bound the omitted
    k >= n_modes contribution to the squared sums (power family only).
    """

    c_h: float
    c_h_sigma: float
    c_h_sq_tail: float
    c_h_sigma_sq_tail: float
    profile_deriv_sups: tuple  # ||psi^(n)||_inf, n = 0..sigma+2 (power family)
    f2h2_sup: float            # ||F'' h_0^2||_inf


def power_exponent(spec: NoiseSpec) -> int:
    return int(spec.sigma) + 3


def power_profile(spec: NoiseSpec, r):
    """Shared spatial profile psi(r) = (1 - r^2)^(sigma+3) of the power family."""
    r = np.asarray(r, dtype=float)
    return (1.0 - r * r) ** power_exponent(spec)


def mode_coeffs(spec: NoiseSpec) -> np.ndarray:
    return 1.0 / (1.0 + np.arange(spec.n_modes, dtype=float))


def eval_h(spec: NoiseSpec, k: int, r):
    """Coefficient h_k(r) on [-1, 1]; index error for k >= n_modes."""
    if not 0 <= k < spec.n_modes:
        raise IndexError(f"mode {k} outside truncation 0..{spec.n_modes - 1}")
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > 1.0):
        raise ValueError("h_k is only defined on [-1, 1]")
    if spec.kind is NoiseKind.POWER:
        out = power_profile(spec, r) / (k + 1.0)
    else:
        out = np.asarray(spec.custom_h(k, r), dtype=float)
    return float(out) if out.ndim == 0 else out


def _poly_sup(poly: Polynomial) -> float:
    """Exact sup of |poly| on [-1, 1]: endpoints plus real critical points."""
    cands = [-1.0, 1.0]
    dp = poly.deriv()
    if dp.degree() >= 1:
        roots = dp.roots()
        real = roots[np.abs(roots.imag) < 1e-9].real
        cands.extend(float(x) for x in real if -1.0 <= x <= 1.0)
    return float(np.max(np.abs(poly(np.array(cands)))))


def profile_derivative_sups(spec: NoiseSpec) -> np.ndarray:
    """||psi^(n)||_inf on [-1, 1] for n = 0..sigma+2 (power family).

    psi is a polynomial, so each sup is attained at an endpoint or a
    real root of the next derivative; no sampling error.
    """
    m = power_exponent(spec)
    psi = Polynomial([1.0, 0.0, -1.0]) ** m
    sups = []
    d = psi
    for _ in range(int(spec.sigma) + 3):
        sups.append(_poly_sup(d))
        d = d.deriv()
    return np.array(sups)


def _f2h2_sup(spec: NoiseSpec, potential: PotentialSpec) -> float:
    """sup over [-1, 1] of |F''(r) psi(r)^2| (the k = 0 coefficient).

    For the logarithmic kind substitute s = 1 - r^2 in [0, 1]:
    F'' psi^2 = theta s^(2m-1) - theta0 s^(2m), whose interior critical
    point is s* = (2m-1) theta / (2m theta0).
    """
    m = power_exponent(spec)
    if potential.kind is PotentialKind.LOGARITHMIC:
        th, th0 = potential.theta, potential.theta0

        def val(s):
            return th * s ** (2 * m - 1) - th0 * s ** (2 * m)

        s_star = (2 * m - 1) * th / (2 * m * th0)
        cands = [0.0, 1.0] + ([s_star] if 0.0 < s_star < 1.0 else [])
        return float(max(abs(val(s)) for s in cands))
    grid = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, 200_001)
    return float(np.max(np.abs(eval_d2F(potential, grid) * power_profile(spec, grid) ** 2)))


def noise_constants(spec: NoiseSpec, potential: PotentialSpec) -> NoiseConstants:
    """Truncated C_H and C_{H,sigma} with analytic tail bounds.

    C_H^2 sums ||h_k||_{W^{1,inf}}^2 + ||F'' h_k^2||_inf over modes,
    C_{H,sigma}^2 sums ||h_k||_{W^{sigma+2,inf}}^2, with the Sobolev
    norm taken as the sum of the derivative sup-norms (the convention
    under which the concrete family's constants are finite term by
    term with 1/(k+1)^2 decay).
    """
    ks = np.arange(spec.n_modes, dtype=float)
    if spec.kind is NoiseKind.POWER:
        sups = profile_derivative_sups(spec)
        f2h2 = _f2h2_sup(spec, potential)
        w1 = sups[0] + sups[1]
        per_mode_ch = w1**2 / (ks + 1.0) ** 2 + f2h2 / (ks + 1.0) ** 2
        ws = float(np.sum(sups))
        per_mode_chs = ws**2 / (ks + 1.0) ** 2
        # sum_{k >= K} 1/(k+1)^2 = sum_{j > K} 1/j^2 < 1/K
        tail_factor = 1.0 / spec.n_modes
        ch_tail = (w1**2 + f2h2) * tail_factor
        chs_tail = ws**2 * tail_factor
        return NoiseConstants(
            c_h=float(np.sqrt(np.sum(per_mode_ch))),
            c_h_sigma=float(np.sqrt(np.sum(per_mode_chs))),
            c_h_sq_tail=float(ch_tail),
            c_h_sigma_sq_tail=float(chs_tail),
            profile_deriv_sups=tuple(float(s) for s in sups),
            f2h2_sup=f2h2,
        )
    # custom family: sampled sup-norms, finite differences for h_k'
    grid = np.linspace(-1.0, 1.0, 100_001)
    hgrid = grid[1] - grid[0]
    ch_sq = 0.0
    chs_sq = 0.0
    terms = []
    for k in range(spec.n_modes):
        hk = eval_h(spec, k, grid)
        dk = np.gradient(hk, hgrid)
        sup0, sup1 = np.max(np.abs(hk)), np.max(np.abs(dk))
        inner_mask = np.abs(grid) < 1.0 - 1e-9
        f2 = eval_d2F(potential, grid[inner_mask])
        f2h2_k = np.max(np.abs(f2 * hk[inner_mask] ** 2))
        term = (sup0 + sup1) ** 2 + f2h2_k
        ch_sq += term
        chs_sq += (sup0 + sup1) ** 2  # higher derivatives not sampled
        terms.append(term)
    if len(terms) >= 4 and terms[-1] > terms[len(terms) // 2]:
        raise ValueError("custom noise family does not decay: assumption violated")
    return NoiseConstants(
        c_h=float(np.sqrt(ch_sq)),
        c_h_sigma=float(np.sqrt(chs_sq)),
        c_h_sq_tail=float("nan"),
        c_h_sigma_sq_tail=float("nan"),
        profile_deriv_sups=(),
        f2h2_sup=float("nan"),
    )


def validate_noise(spec: NoiseSpec, tail_rtol: float = 0.05):
    """Boundary vanishing up to second derivatives and truncation-tail check."""
    eps_fd = 1e-4
    for k in (0, spec.n_modes - 1):
        for sgn in (-1.0, 1.0):
            edge = sgn * 1.0
            h0 = eval_h(spec, k, edge)
            h1 = (eval_h(spec, k, edge) - eval_h(spec, k, edge - sgn * eps_fd)) / (sgn * eps_fd)
            h2 = (
                eval_h(spec, k, edge)
                - 2.0 * eval_h(spec, k, edge - sgn * eps_fd)
                + eval_h(spec, k, edge - 2.0 * sgn * eps_fd)
            ) / eps_fd**2
            scale = max(1.0, abs(eval_h(spec, k, 0.0)))
            if abs(h0) > 1e-12 * scale:
                raise ValueError(f"h_{k}({edge}) != 0")
            # psi ~ dist^(sigma+3): first and second FD quotients must be tiny
            if abs(h1) > 1e-6 * scale or abs(h2) > 1e-2 * scale:
                raise ValueError(f"h_{k} derivatives do not vanish at {edge}")
    if spec.kind is NoiseKind.POWER:
        consts = noise_constants(spec, PotentialSpec.logarithmic(1.0, 2.0))
        rel = consts.c_h_sigma_sq_tail / consts.c_h_sigma**2
        if rel > tail_rtol:
            raise ValueError(
                f"truncation tail {rel:.3g} of C_H_sigma^2 exceeds tolerance {tail_rtol}"
            )
    return True


def apply_H_lambda(spec: NoiseSpec, potential: PotentialSpec, lam, u, dW):
    """Euler noise increment: sqrt(eps) * sum_k h_k(J_lam(u(x))) dW_k.

    lam = 0 bypasses the resolvent for diagnostics on the limit
    equation and is only legal when ||u||_inf <= 1.
    """
    u = np.asarray(u, dtype=float)
    vals = dW.values if isinstance(dW, WienerIncrement) else np.asarray(dW, dtype=float)
    if vals.shape[-1] != spec.n_modes:
        raise ValueError(f"increment carries {vals.shape[-1]} modes, spec has {spec.n_modes}")
    if lam == 0.0:
        if np.any(np.abs(u) > 1.0):
            raise ValueError("direct H (lam = 0) requires ||u||_inf <= 1")
        v = u
    else:
        v = resolvent(potential, lam, u)
    root_eps = np.sqrt(spec.epsilon)
    if spec.kind is NoiseKind.POWER:
        s = np.sum(vals * mode_coeffs(spec), axis=-1)
        return root_eps * power_profile(spec, v) * s[..., None]
    out = np.zeros_like(u)
    for k in range(spec.n_modes):
        out += eval_h(spec, k, v) * vals[..., k : k + 1]
    return root_eps * out


def draw_increment(seed, path_id, step_index, dt, n_modes) -> WienerIncrement:
    """K iid Gaussian(0, dt) values, addressed by (seed, path_id, step, k)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    vals = rng.normal_matrix(seed, [path_id], step_index, n_modes, scale=np.sqrt(dt))
    return WienerIncrement(dt=float(dt), values=vals[0])


def draw_increment_matrix(seed, path_ids, step_index, dt, n_modes) -> np.ndarray:
    """(len(path_ids), n_modes) increment matrix for a batched step."""
    return rng.normal_matrix(seed, path_ids, step_index, n_modes, scale=np.sqrt(dt))

"""Monte Carlo over trajectories: separation-layer statistics and the
vanishing-noise sweep.

Paths are advanced as one vectorized batch (they share nothing but
configuration), with every increment addressed by (seed, path_id,
step), so results do not depend on execution order or batch layout.
The sweep reuses the same seed across noise intensities: common random
numbers make the monotonicity comparisons much sharper than
independent ensembles would.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import ConstantChain, compute_constants, rate_function_N
from .grid import Mesh1D, as_values, sup_norm
from .noise import NoiseSpec
from .potential import Barrier, PotentialKind, PotentialSpec, stationary_points
from .solver import NumericalError, PathRecord, SolverConfig, simulate_paths

FAILURE_ABORT_FRACTION = 0.01


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int = 200
    base_seed: int = 20240
    delta_queries: tuple = (0.05, 0.1, 0.2, 0.3)
    eta_queries: tuple = (0.25,)
    epsilon_grid: tuple = (1.0, 0.5, 0.25, 0.1)

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        eps = tuple(self.epsilon_grid)
        if any(not 0.0 <= e <= 1.0 for e in eps):
            raise ValueError("epsilon grid entries must lie in [0, 1]")
        if list(eps) != sorted(eps, reverse=True):
            raise ValueError("epsilon grid must be sorted descending")


@dataclass
class EnsembleSummary:
    """Empirical distribution of the separation layer at one intensity.

    eps_ln_cdf holds the rate diagnostics eps * ln P{Lambda <= delta}
    at the query points (nan where the empirical tail is zero).
    """

    epsilon: float
    n_paths: int
    delta0: float
    lambda_samples: np.ndarray
    delta_queries: np.ndarray
    cdf: np.ndarray
    cdf_se: np.ndarray
    eps_ln_cdf: np.ndarray
    mean_lambda: float
    se_lambda: float
    n_failed: int
    n_separation_flags: int
    records: list = field(repr=False, default_factory=list)


def _binomial_se(p_hat: np.ndarray, n: int) -> np.ndarray:
    return np.sqrt(p_hat * (1.0 - p_hat) / n)


def run_ensemble(u0, solver_config: SolverConfig, potential: PotentialSpec,
                 noise: NoiseSpec, barrier: Barrier, mesh: Mesh1D,
                 ens: EnsembleConfig, epsilon: float | None = None) -> EnsembleSummary:
    """n_paths independent trajectories and the empirical law of Lambda.

    Newton failures are excluded from the statistics and reported; the
    run aborts when more than 1% of paths fail.  Separation-violation
    flags are counted but their Lambda values stay in the sample (they
    are the events the flags exist to expose).
    """
    u0 = as_values(u0)
    delta0 = float(1.0 - sup_norm(u0))
    if not 0.0 < delta0 < 1.0:
        raise ValueError("initial datum must satisfy 0 < 1 - ||u0||_inf < 1")
    dq = np.asarray(ens.delta_queries, dtype=float)
    if np.any(dq <= 0.0) or np.any(dq >= delta0):
        raise ValueError(
            f"delta queries must lie in (0, delta0) = (0, {delta0!r}): got {list(dq)}"
        )
    if epsilon is not None:
        noise = replace(noise, epsilon=float(epsilon))

    if noise.epsilon == 0.0:
        # the deterministic equation does not depend on the path id:
        # solve once, replicate the record
        rec0 = simulate_paths(u0, solver_config, potential, noise, barrier,
                              mesh, ens.base_seed, [0])[0]
        records = [replace_path_id(rec0, pid) for pid in range(ens.n_paths)]
    else:
        records = simulate_paths(u0, solver_config, potential, noise, barrier,
                                 mesh, ens.base_seed, np.arange(ens.n_paths))

    n_failed = sum(r.newton_failed for r in records)
    if n_failed > FAILURE_ABORT_FRACTION * ens.n_paths:
        raise NumericalError(
            f"{n_failed}/{ens.n_paths} paths failed the Newton solve; aborting"
        )
    usable = [r for r in records if not r.newton_failed]
    lam = np.array([r.lambda_layer for r in usable])
    cdf = np.array([np.mean(lam <= d) for d in dq])
    with np.errstate(divide="ignore"):
        eps_ln_cdf = np.where(cdf > 0.0, noise.epsilon * np.log(np.maximum(cdf, 1e-300)),
                              np.nan)
    return EnsembleSummary(
        epsilon=float(noise.epsilon),
        n_paths=ens.n_paths,
        delta0=delta0,
        lambda_samples=lam,
        delta_queries=dq,
        cdf=cdf,
        cdf_se=_binomial_se(cdf, len(lam)),
        eps_ln_cdf=eps_ln_cdf,
        mean_lambda=float(np.mean(lam)),
        se_lambda=float(np.std(lam, ddof=1) / np.sqrt(len(lam))) if len(lam) > 1 else 0.0,
        n_failed=n_failed,
        n_separation_flags=sum(r.separation_flag for r in usable),
        records=records,
    )


def replace_path_id(rec: PathRecord, pid: int) -> PathRecord:
    return replace(rec, path_id=pid)


@dataclass
class SweepResult:
    """Per-intensity summaries plus the rate-comparison table.

    rate_rows columns: (epsilon, eta, p_hat, se, eps_ln_p, minus_N)
    with eps_ln_p = epsilon * ln P{|Lambda_eps - delta0| >= eta}
    (nan when the empirical probability is zero) and minus_N the
    theoretical large-deviation ceiling -N(delta0 - eta).  The table
    is a reporting deliverable: at desk scale the two columns need not
    be close.
    """

    delta0: float
    eta_queries: np.ndarray
    summaries: list
    rate_rows: list
    chain: ConstantChain


def epsilon_sweep(u0, solver_config: SolverConfig, potential: PotentialSpec,
                  noise: NoiseSpec, barrier: Barrier, mesh: Mesh1D,
                  ens: EnsembleConfig, alpha: float | None = None,
                  strict: bool = True) -> SweepResult:
    """Ensembles along the descending epsilon grid with common random
    numbers, plus the eps*ln P tail-rate diagnostics.

    The vanishing-noise theorem assumes the wells sit inside the
    initial bound, max(|r_F|, |R_F|) <= 1 - delta0; with strict=False
    an exploratory run may proceed past that check with a warning.
    """
    u0 = as_values(u0)
    delta0 = float(1.0 - sup_norm(u0))
    if potential.kind is PotentialKind.LOGARITHMIC:
        stat = stationary_points(potential)
        if max(abs(stat.r_low), abs(stat.r_high)) > 1.0 - delta0:
            msg = (f"wells |r*| = {stat.r_high!r} exceed 1 - delta0 = {1.0 - delta0!r}: "
                   "the deterministic layer need not equal delta0")
            if strict:
                raise ValueError(msg)
            warnings.warn(msg)
    etas = np.asarray(ens.eta_queries, dtype=float)
    if np.any(etas <= 0.0) or np.any(etas >= delta0):
        raise ValueError(f"eta queries must lie in (0, delta0): got {list(etas)}")

    chain = compute_constants(potential, noise, barrier, mesh, solver_config,
                              u0, delta0, alpha=alpha)
    summaries = []
    rate_rows = []
    for eps in ens.epsilon_grid:
        summ = run_ensemble(u0, solver_config, potential, noise, barrier,
                            mesh, ens, epsilon=eps)
        summaries.append(summ)
        lam = summ.lambda_samples
        for eta in etas:
            p_hat = float(np.mean(np.abs(lam - delta0) >= eta))
            se = float(_binomial_se(np.array(p_hat), len(lam)))
            eps_ln_p = eps * np.log(p_hat) if (p_hat > 0.0 and eps > 0.0) else float("nan")
            rate_rows.append((float(eps), float(eta), p_hat, se,
                              float(eps_ln_p), -rate_function_N(chain, delta0 - eta)))
    return SweepResult(delta0=delta0, eta_queries=etas, summaries=summaries,
                       rate_rows=rate_rows, chain=chain)

"""Stochastic p-Laplace Allen-Cahn laboratory.

Solves the Yosida-regularized stochastic Allen-Cahn equation with
singular logarithmic potential and degenerate multiplicative noise on
a 1-D Dirichlet grid, extracts the random separation layer of each
trajectory, and checks the pathwise inequalities, exponential tail
bound, and vanishing-noise convergence against their explicit
constants.
"""

__version__ = "0.1.0"

from .analysis import (ConstantChain, MartingaleTailReport, PathwiseReport,
                       TailFit, bernstein_bound, check_pathwise_bounds,
                       compute_constants, default_alpha, fit_tail,
                       rate_function_N, tail_bound, verify_martingale_tails)
from .config import ConfigError, DEFAULT_CONFIG, RunSetup, load_config, parse_config
from .ensemble import EnsembleConfig, EnsembleSummary, SweepResult, epsilon_sweep, run_ensemble
from .grid import Field, Mesh1D, g_functional, integrate, p_laplacian, sup_norm, vp_norm_p
from .noise import (NoiseConstants, NoiseKind, NoiseSpec, WienerIncrement,
                    apply_H_lambda, draw_increment, eval_h, noise_constants)
from .potential import (Barrier, PotentialKind, PotentialSpec, StationaryInterval,
                        barrier_G, beta, eval_F, eval_dF, eval_d2F, moreau_F,
                        resolvent, stationary_points, yosida_beta)
from .solver import (LambdaStudy, NewtonError, NumericalError, PathRecord,
                     SolverConfig, lambda_convergence_study, run_path,
                     simulate_paths, step)

__all__ = [name for name in dir() if not name.startswith("_")]

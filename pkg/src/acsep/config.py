"""JSON experiment configuration: strict parsing, canonical form, digest.

Unknown keys anywhere in the file are hard errors, so a misspelled
option can never silently fall back to a default.  The canonical form
(defaults filled in, keys sorted) is what gets hashed into the run
manifest: two runs with the same digest saw the same configuration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import EnsembleConfig
from .grid import Mesh1D
from .noise import NoiseKind, NoiseSpec
from .potential import Barrier, PotentialSpec
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "potential": {"kind": "logarithmic", "theta": 1.0, "theta0": 2.0},
    "noise": {"kind": "power_family", "sigma": 3, "n_modes": 16,
              "epsilon": 1.0, "tail_rtol": 0.05},
    "grid": {"domain_length": 1.0, "n_interior": 128},
    "solver": {"t_final": 0.25, "dt": 1e-4, "lambda": 1e-4, "p": 2.0,
               "newton_tol": 1e-10, "newton_max_iter": 50,
               "record_stride": 1, "snapshot_stride": 250},
    "initial": {"kind": "sine", "delta0": 0.5},
    "ensemble": {"n_paths": 200, "base_seed": 20240,
                 "delta_queries": [0.05, 0.1, 0.2, 0.3],
                 "eta_queries": [0.25],
                 "epsilon_grid": [1.0, 0.5, 0.25, 0.1]},
    "analysis": {"alpha": 0.4, "slack": 1.1, "pass_threshold": 0.95},
}


@dataclass
class RunSetup:
    """Everything a subcommand needs, built from one canonical config."""

    potential: PotentialSpec
    noise: NoiseSpec
    barrier: Barrier
    mesh: Mesh1D
    solver: SolverConfig
    ensemble: EnsembleConfig
    alpha: float
    slack: float
    pass_threshold: float
    delta0: float
    snapshot_stride: int
    canonical: dict

    def initial_field(self) -> np.ndarray:
        """(1 - delta0) * sin(pi x / l) on the interior nodes."""
        x = self.mesh.nodes()
        return (1.0 - self.delta0) * np.sin(np.pi * x / self.mesh.length)


def _merge_strict(defaults: dict, user: dict, path: str = "") -> dict:
    out = {}
    for key, dval in defaults.items():
        if isinstance(dval, dict):
            out[key] = _merge_strict(dval, user.get(key, {}), f"{path}{key}.")
        elif key in user:
            out[key] = user[key]
        else:
            out[key] = dval
    for key in user:
        if key not in defaults:
            raise ConfigError(f"unknown config key: {path}{key}")
    return out


def canonicalize(user_config: dict) -> dict:
    """Fill defaults, reject unknown keys, normalize value types."""
    if not isinstance(user_config, dict):
        raise ConfigError("config root must be a JSON object")
    merged = _merge_strict(DEFAULT_CONFIG, user_config)
    return json.loads(json.dumps(merged, sort_keys=True))


def canonical_json(config: dict) -> str:
    return json.dumps(canonicalize(config), sort_keys=True, indent=2) + "\n"


def config_digest(config: dict) -> str:
    blob = json.dumps(canonicalize(config), sort_keys=True,
                      separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _potential_from(section: dict) -> PotentialSpec:
    kind = section["kind"]
    if kind != "logarithmic":
        raise ConfigError(
            f"potential kind {kind!r} not constructible from JSON (custom kinds are API-only)"
        )
    try:
        return PotentialSpec.logarithmic(float(section["theta"]), float(section["theta0"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _noise_from(section: dict) -> NoiseSpec:
    if section["kind"] != "power_family":
        raise ConfigError(
            f"noise kind {section['kind']!r} not constructible from JSON (custom kinds are API-only)"
        )
    try:
        return NoiseSpec(sigma=int(section["sigma"]), n_modes=int(section["n_modes"]),
                         epsilon=float(section["epsilon"]), kind=NoiseKind.POWER)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(user_config: dict) -> RunSetup:
    """Validate a config dict and build all component specifications."""
    cfg = canonicalize(user_config)
    try:
        potential = _potential_from(cfg["potential"])
        noise = _noise_from(cfg["noise"])
        barrier = Barrier(sigma=int(cfg["noise"]["sigma"]))
        mesh = Mesh1D(length=float(cfg["grid"]["domain_length"]),
                      n_interior=int(cfg["grid"]["n_interior"]))
        s = cfg["solver"]
        solver = SolverConfig(
            t_final=float(s["t_final"]), dt=float(s["dt"]), lam=float(s["lambda"]),
            p=float(s["p"]), newton_tol=float(s["newton_tol"]),
            newton_max_iter=int(s["newton_max_iter"]),
            record_stride=int(s["record_stride"]),
        )
        _ = solver.n_steps
        e = cfg["ensemble"]
        ens = EnsembleConfig(
            n_paths=int(e["n_paths"]), base_seed=int(e["base_seed"]),
            delta_queries=tuple(float(x) for x in e["delta_queries"]),
            eta_queries=tuple(float(x) for x in e["eta_queries"]),
            epsilon_grid=tuple(float(x) for x in e["epsilon_grid"]),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    if cfg["initial"]["kind"] != "sine":
        raise ConfigError(f"unknown initial profile kind {cfg['initial']['kind']!r}")
    delta0 = float(cfg["initial"]["delta0"])
    if not 0.0 < delta0 < 1.0:
        raise ConfigError("initial.delta0 must lie in (0, 1)")

    d = 1
    sigma, p = barrier.sigma, solver.p
    if sigma * (p - d) <= p * d:
        raise ConfigError(
            f"admissibility sigma*(p-d) > p*d fails for sigma={sigma}, p={p}, d={d}"
        )
    a = cfg["analysis"]["alpha"]
    alpha = float(a) if a is not None else 0.5 * (d / sigma + 1.0 - d / p)
    if not d / sigma < alpha < 1.0 - d / p:
        raise ConfigError(
            f"analysis.alpha must lie in ({d / sigma}, {1.0 - d / p}), got {alpha}"
        )

    return RunSetup(
        potential=potential, noise=noise, barrier=barrier, mesh=mesh,
        solver=solver, ensemble=ens, alpha=alpha,
        slack=float(cfg["analysis"]["slack"]),
        pass_threshold=float(cfg["analysis"]["pass_threshold"]),
        delta0=delta0,
        snapshot_stride=int(cfg["solver"]["snapshot_stride"]),
        canonical=cfg,
    )


def load_config(path) -> RunSetup:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)

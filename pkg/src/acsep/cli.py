"""Command-line entry point: experiment subcommands with bit-stable outputs.

Result files (CSV/JSON) are byte-identical across reruns with the same
config and seed; the run manifest carries wall-clock timestamps and is
the one file excluded from that guarantee.  Exit codes: 0 success,
1 configuration error, 2 numerical failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis, ensemble as ensemble_mod
from .analysis import InsufficientTailData, fit_tail, tail_bound
from .config import ConfigError, config_digest, load_config
from .noise import validate_noise
from .potential import validate_potential
from .solver import NumericalError, simulate_paths, solve_trajectory

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3


def _fmt(x) -> str:
    """Shortest round-trip decimal form; stable across runs."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")


def _chain_payload(chain) -> dict:
    d = dataclasses.asdict(chain)
    d.update(d.pop("extras"))
    return d


class _Run:
    """Collects output files and writes the manifest last."""

    def __init__(self, args, setup, subcommand):
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.setup = setup
        self.subcommand = subcommand
        self.outputs = []
        self.started = datetime.now(timezone.utc).isoformat()

    def path(self, name) -> Path:
        p = self.out_dir / name
        self.outputs.append(name)
        return p

    def finish(self):
        manifest = {
            "tool": "acsep",
            "version": __version__,
            "subcommand": self.subcommand,
            "config_digest": config_digest(self.setup.canonical),
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": sorted(self.outputs),
        }
        (self.out_dir / "run_manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _load_setup(args):
    setup = load_config(args.config)
    if args.seed is not None:
        raw = dict(setup.canonical)
        raw["ensemble"] = dict(raw["ensemble"], base_seed=int(args.seed))
        from .config import parse_config

        setup = parse_config(raw)
    validate_potential(setup.potential)
    validate_noise(setup.noise, tail_rtol=setup.canonical["noise"]["tail_rtol"])
    return setup


def _records_rows(records):
    for r in records:
        yield (r.path_id, r.seed, r.lambda_layer, r.sup_trajectory, r.final_g,
               r.final_vp, r.max_m1, r.max_m2, r.qv1, r.qv2)


RECORD_HEADER = ("path_id", "seed", "lambda_layer", "sup_trajectory", "final_g",
                 "final_vp", "max_m1", "max_m2", "qv1", "qv2")
SAMPLES_HEADER = ("path_id", "seed", "epsilon", "lambda_layer", "sup_trajectory")


def _samples_rows(records):
    for r in records:
        yield (r.path_id, r.seed, r.epsilon, r.lambda_layer, r.sup_trajectory)


def _cmd_solve(args):
    setup = _load_setup(args)
    run = _Run(args, setup, "solve")
    u0 = setup.initial_field()
    seed = setup.ensemble.base_seed
    times, snaps = solve_trajectory(u0, setup.solver, setup.potential, setup.noise,
                                    setup.mesh, seed, path_id=0,
                                    snapshot_stride=setup.snapshot_stride)
    nodes = setup.mesh.nodes()
    rows = [(t, x, v) for t, snap in zip(times, snaps) for x, v in zip(nodes, snap)]
    _write_csv(run.path("snapshots.csv"), ("t", "x", "u"), rows)
    rec = simulate_paths(u0, setup.solver, setup.potential, setup.noise,
                         setup.barrier, setup.mesh, seed, [0])[0]
    _write_csv(run.path("record.csv"), RECORD_HEADER, _records_rows([rec]))
    run.finish()
    return EXIT_OK


def _summary_payload(s, chain=None):
    payload = {
        "epsilon": s.epsilon,
        "n_paths": s.n_paths,
        "delta0": s.delta0,
        "mean_lambda": s.mean_lambda,
        "se_lambda": s.se_lambda,
        "n_failed": s.n_failed,
        "n_separation_flags": s.n_separation_flags,
        "cdf_table": {
            "delta": list(s.delta_queries),
            "p_hat": list(s.cdf),
            "se": list(s.cdf_se),
            "eps_ln_p": list(s.eps_ln_cdf),
        },
    }
    if chain is not None:
        bounds = [tail_bound(chain, float(d)) for d in s.delta_queries]
        payload["tail_bound"] = {
            "value": [b.value for b in bounds],
            "out_of_range": [b.out_of_range for b in bounds],
            "sub_mc_resolution": [
                (not b.out_of_range) and b.value < 1.0 / max(s.n_paths, 1)
                for b in bounds
            ],
        }
        payload["constants"] = _chain_payload(chain)
    return payload


def _cmd_ensemble(args):
    setup = _load_setup(args)
    run = _Run(args, setup, "ensemble")
    u0 = setup.initial_field()
    summ = ensemble_mod.run_ensemble(u0, setup.solver, setup.potential, setup.noise,
                                     setup.barrier, setup.mesh, setup.ensemble)
    chain = analysis.compute_constants(setup.potential, setup.noise, setup.barrier,
                                       setup.mesh, setup.solver, u0, summ.delta0,
                                       alpha=setup.alpha)
    _write_csv(run.path("lambda_samples.csv"), SAMPLES_HEADER,
               _samples_rows(summ.records))
    _write_csv(run.path("records.csv"), RECORD_HEADER, _records_rows(summ.records))
    _write_json(run.path("summary.json"), _summary_payload(summ, chain))
    run.finish()
    return EXIT_OK


def _cmd_eps_sweep(args):
    setup = _load_setup(args)
    run = _Run(args, setup, "eps-sweep")
    u0 = setup.initial_field()
    sweep = ensemble_mod.epsilon_sweep(u0, setup.solver, setup.potential, setup.noise,
                                       setup.barrier, setup.mesh, setup.ensemble,
                                       alpha=setup.alpha)
    rows = [row for s in sweep.summaries for row in _samples_rows(s.records)]
    _write_csv(run.path("lambda_samples.csv"), SAMPLES_HEADER, rows)
    payload = {
        "delta0": sweep.delta0,
        "eta_queries": list(sweep.eta_queries),
        "per_epsilon": [_summary_payload(s) for s in sweep.summaries],
        "rate_table": {
            "columns": ["epsilon", "eta", "p_hat", "se", "eps_ln_p", "minus_N"],
            "rows": [list(r) for r in sweep.rate_rows],
        },
        "constants": _chain_payload(sweep.chain),
    }
    _write_json(run.path("sweep_summary.json"), payload)
    run.finish()
    return EXIT_OK


def _cmd_constants(args):
    setup = _load_setup(args)
    run = _Run(args, setup, "constants")
    u0 = setup.initial_field()
    delta0 = float(1.0 - np.max(np.abs(u0)))
    chain = analysis.compute_constants(setup.potential, setup.noise, setup.barrier,
                                       setup.mesh, setup.solver, u0, delta0,
                                       alpha=setup.alpha)
    _write_json(run.path("summary.json"), {"constants": _chain_payload(chain)})
    run.finish()
    return EXIT_OK


def _cmd_verify_path(args):
    setup = _load_setup(args)
    run = _Run(args, setup, "verify-path")
    u0 = setup.initial_field()
    summ = ensemble_mod.run_ensemble(u0, setup.solver, setup.potential, setup.noise,
                                     setup.barrier, setup.mesh, setup.ensemble)
    chain = analysis.compute_constants(setup.potential, setup.noise, setup.barrier,
                                       setup.mesh, setup.solver, u0, summ.delta0,
                                       alpha=setup.alpha)
    rep = analysis.check_pathwise_bounds(summ.records, chain, slack=setup.slack)
    tails = analysis.verify_martingale_tails(summ.records, chain, summ.epsilon)
    fractions = {
        "g_bound": rep.g_bound_fraction,
        "vp_bound": rep.vp_bound_fraction,
        "qv1": rep.qv1_fraction,
        "qv2": rep.qv2_fraction,
    }
    passed = all(v >= setup.pass_threshold for v in fractions.values())
    payload = {
        "n_paths": rep.n_paths,
        "slack": rep.slack,
        "pass_threshold": setup.pass_threshold,
        "fractions": fractions,
        "separation_flags": summ.n_separation_flags,
        "newton_failures": summ.n_failed,
        "martingale_tails": {
            "levels": list(tails.levels),
            "empirical_m1": list(tails.empirical_m1),
            "bound_m1": list(tails.bound_m1),
            "satisfied_m1": list(tails.satisfied_m1),
            "empirical_m2": list(tails.empirical_m2),
            "bound_m2": list(tails.bound_m2),
            "satisfied_m2": list(tails.satisfied_m2),
            "qv_relation_fraction_m1": tails.qv_relation_fraction_m1,
            "qv_relation_fraction_m2": tails.qv_relation_fraction_m2,
        },
        "passed": passed,
        "constants": _chain_payload(chain),
    }
    _write_csv(run.path("records.csv"), RECORD_HEADER, _records_rows(summ.records))
    _write_json(run.path("verification.json"), payload)
    run.finish()
    return EXIT_OK if passed else EXIT_VERIFICATION


def _cmd_fit_tail(args):
    setup = _load_setup(args)
    run = _Run(args, setup, "fit-tail")
    u0 = setup.initial_field()
    delta0 = float(1.0 - np.max(np.abs(u0)))
    chain = analysis.compute_constants(setup.potential, setup.noise, setup.barrier,
                                       setup.mesh, setup.solver, u0, delta0,
                                       alpha=setup.alpha)
    samples_path = Path(args.samples)
    if not samples_path.exists():
        raise ConfigError(f"samples file not found: {samples_path}")
    body = samples_path.read_text().strip().splitlines()
    header = body[0].split(",")
    try:
        col = header.index("lambda_layer")
    except ValueError as exc:
        raise ConfigError("samples CSV lacks a lambda_layer column") from exc
    samples = np.array([float(line.split(",")[col]) for line in body[1:]])
    try:
        fit = fit_tail(samples, chain.rho)
        payload = {
            "status": "ok",
            "rho": chain.rho,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "delta": list(fit.deltas),
            "p_hat": list(fit.p_hat),
        }
    except InsufficientTailData as exc:
        payload = {"status": "insufficient-data", "rho": chain.rho, "detail": str(exc)}
    _write_json(run.path("tail_fit.json"), payload)
    run.finish()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acsep",
        description="Stochastic p-Laplace Allen-Cahn separation laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "solve": (_cmd_solve, "one trajectory with field snapshots"),
        "ensemble": (_cmd_ensemble, "Monte Carlo over paths, Lambda statistics"),
        "eps-sweep": (_cmd_eps_sweep, "vanishing-noise sweep over the epsilon grid"),
        "constants": (_cmd_constants, "emit the explicit constant chain"),
        "verify-path": (_cmd_verify_path, "pathwise-inequality verification suite"),
        "fit-tail": (_cmd_fit_tail, "fit the exponential-tail signature to samples"),
    }
    for name, (fn, help_) in specs.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override ensemble.base_seed")
        sp.add_argument("--out-dir",
                        default=os.environ.get("ACSEP_OUT_DIR", "acsep-out"),
                        help="output directory (env ACSEP_OUT_DIR)")
        if name == "fit-tail":
            sp.add_argument("--samples", required=True,
                            help="lambda_samples.csv from a previous run")
        sp.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

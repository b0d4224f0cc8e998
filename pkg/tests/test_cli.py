import json

import numpy as np
import pytest

from acsep.cli import main
from acsep.config import (ConfigError, DEFAULT_CONFIG, canonical_json,
                          canonicalize, config_digest, parse_config)

SMALL = {
    "grid": {"n_interior": 24},
    "solver": {"t_final": 0.005, "dt": 5e-4, "snapshot_stride": 5},
    "ensemble": {"n_paths": 6, "delta_queries": [0.05, 0.1, 0.2, 0.3],
                 "eta_queries": [0.25], "epsilon_grid": [1.0, 0.5]},
}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


class TestConfig:
    def test_canonicalize_is_idempotent(self):
        c1 = canonicalize(SMALL)
        assert canonicalize(c1) == c1
        assert canonical_json(c1) == canonical_json(SMALL)

    def test_digest_depends_on_content(self):
        d1 = config_digest(SMALL)
        assert d1 == config_digest(json.loads(json.dumps(SMALL)))
        other = dict(SMALL, initial={"kind": "sine", "delta0": 0.3})
        assert config_digest(other) != d1

    def test_unknown_keys_rejected_at_any_depth(self):
        with pytest.raises(ConfigError, match="unknown config key: oops"):
            canonicalize({"oops": 1})
        with pytest.raises(ConfigError, match="solver.dtt"):
            canonicalize({"solver": {"dtt": 1e-4}})

    def test_default_config_parses(self):
        setup = parse_config(DEFAULT_CONFIG)
        assert setup.mesh.n_interior == 128
        assert setup.alpha == 0.4
        u0 = setup.initial_field()
        assert np.max(np.abs(u0)) < 1.0

    def test_alpha_null_falls_back_to_midpoint(self):
        cfg = dict(SMALL, analysis={"alpha": None})
        setup = parse_config(cfg)
        assert setup.alpha == pytest.approx((1 / 3 + 1 / 2) / 2)

    def test_inadmissible_exponents_rejected(self):
        bad = dict(SMALL, noise={"sigma": 2})
        with pytest.raises(ConfigError, match="admissib"):
            parse_config(bad)

    def test_bad_initial_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(dict(SMALL, initial={"kind": "sine", "delta0": 1.5}))


class TestCliExitCodes:
    def test_missing_config_exits_1(self, tmp_path, capsys):
        rc = main(["constants", "--config", str(tmp_path / "nope.json"),
                   "--out-dir", str(tmp_path / "o")])
        assert rc == 1
        assert "not found" in capsys.readouterr().err

    def test_unknown_key_exits_1(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"solvr": {}}')
        rc = main(["constants", "--config", str(p), "--out-dir", str(tmp_path / "o")])
        assert rc == 1

    def test_constants_subcommand(self, small_config, tmp_path):
        out = tmp_path / "out"
        rc = main(["constants", "--config", str(small_config), "--out-dir", str(out)])
        assert rc == 0
        data = json.loads((out / "summary.json").read_text())
        assert abs(data["constants"]["rho"] - 2.0 / 9.0) < 1e-12
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["outputs"] == ["summary.json"]
        assert manifest["config_digest"] == config_digest(SMALL)

    def test_solve_reruns_are_byte_identical(self, small_config, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(["solve", "--config", str(small_config), "--seed", "7",
                       "--out-dir", str(out)])
            assert rc == 0
            outs.append(out)
        for fname in ("snapshots.csv", "record.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_ensemble_outputs(self, small_config, tmp_path):
        out = tmp_path / "ens"
        rc = main(["ensemble", "--config", str(small_config), "--out-dir", str(out)])
        assert rc == 0
        samples = (out / "lambda_samples.csv").read_text().splitlines()
        assert samples[0] == "path_id,seed,epsilon,lambda_layer,sup_trajectory"
        assert len(samples) == 1 + 6
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_paths"] == 6
        assert "constants" in summary and "tail_bound" in summary

    def test_verify_path_passes_small_run(self, small_config, tmp_path):
        out = tmp_path / "ver"
        rc = main(["verify-path", "--config", str(small_config), "--out-dir", str(out)])
        assert rc == 0
        data = json.loads((out / "verification.json").read_text())
        assert data["passed"] is True
        assert all(v >= 0.95 for v in data["fractions"].values())

    def test_verification_failure_exits_3(self, small_config, tmp_path, monkeypatch):
        import acsep.analysis as analysis_mod

        real = analysis_mod.check_pathwise_bounds

        def sabotaged(records, chain, slack=1.1):
            rep = real(records, chain, slack)
            rep.g_bound_fraction = 0.0
            return rep

        monkeypatch.setattr("acsep.cli.analysis.check_pathwise_bounds", sabotaged)
        rc = main(["verify-path", "--config", str(small_config),
                   "--out-dir", str(tmp_path / "v3")])
        assert rc == 3

    def test_numerical_failure_exits_2(self, tmp_path):
        cfg = dict(SMALL, solver={"t_final": 0.005, "dt": 5e-4,
                                  "newton_tol": 1e-15, "newton_max_iter": 1})
        p = tmp_path / "stall.json"
        p.write_text(json.dumps(cfg))
        rc = main(["ensemble", "--config", str(p), "--out-dir", str(tmp_path / "o2")])
        assert rc == 2

    def test_fit_tail_insufficient_data_is_reported(self, small_config, tmp_path):
        csv = tmp_path / "samples.csv"
        rows = ["path_id,seed,epsilon,lambda_layer,sup_trajectory"]
        rows += [f"{i},0,1.0,0.5,0.5" for i in range(10)]
        csv.write_text("\n".join(rows) + "\n")
        out = tmp_path / "fit"
        rc = main(["fit-tail", "--config", str(small_config),
                   "--samples", str(csv), "--out-dir", str(out)])
        assert rc == 0
        data = json.loads((out / "tail_fit.json").read_text())
        assert data["status"] == "insufficient-data"

    def test_eps_sweep_writes_rate_table(self, small_config, tmp_path):
        cfg = json.loads(small_config.read_text())
        cfg["initial"] = {"kind": "sine", "delta0": 0.02}
        cfg["ensemble"]["delta_queries"] = [0.005, 0.01]
        cfg["ensemble"]["eta_queries"] = [0.01]
        cfg["ensemble"]["epsilon_grid"] = [1.0, 0.0]
        p = tmp_path / "sweep.json"
        p.write_text(json.dumps(cfg))
        out = tmp_path / "sw"
        rc = main(["eps-sweep", "--config", str(p), "--out-dir", str(out)])
        assert rc == 0
        data = json.loads((out / "sweep_summary.json").read_text())
        assert data["rate_table"]["columns"][0] == "epsilon"
        assert len(data["per_epsilon"]) == 2

    def test_shipped_default_config(self, tmp_path):
        from pathlib import Path

        configs = Path(__file__).resolve().parent.parent / "configs"
        out = tmp_path / "def"
        rc = main(["constants", "--config", str(configs / "default.json"),
                   "--out-dir", str(out)])
        assert rc == 0
        data = json.loads((out / "summary.json").read_text())
        assert abs(data["constants"]["rho"] - 2.0 / 9.0) < 1e-12
        rc = main(["constants", "--config", str(configs / "sweep.json"),
                   "--out-dir", str(tmp_path / "sw")])
        assert rc == 0

    def test_manifest_lists_every_output(self, small_config, tmp_path):
        out = tmp_path / "m"
        main(["ensemble", "--config", str(small_config), "--out-dir", str(out)])
        manifest = json.loads((out / "run_manifest.json").read_text())
        files = {p.name for p in out.iterdir()} - {"run_manifest.json"}
        assert set(manifest["outputs"]) == files

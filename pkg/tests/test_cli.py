import json

import numpy as np
import pytest

from quantocds.cli import (ConfigError, apply_sweep_value, load_config, main)
from quantocds.model import ModelParams


def write_config(tmp_path, payload):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(payload))
    return str(path)


def small_run(tmp_path, **extra):
    # quick-to-solve setup: coarse contract, default grid
    payload = {
        "schedule": {"T": 1.0, "m": 12},
        "output": {"dir": str(tmp_path / "out")},
    }
    payload.update(extra)
    return write_config(tmp_path, payload)


class TestConfigParsing:
    def test_defaults_are_table1(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {}))
        ref = ModelParams()
        for f in ("R0", "kappa_rhat", "theta_y", "z0", "r_dom", "gamma_z"):
            assert getattr(cfg.model, f) == getattr(ref, f)
        assert np.array_equal(cfg.model.rho, np.eye(4))
        assert cfg.schedule.T == 5.0 and cfg.schedule.m == 120
        assert cfg.grid.n_R == 10
        assert cfg.time.dt == 0.05
        assert cfg.task == "price"

    def test_unknown_keys_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(write_config(tmp_path, {"modle": {}}))
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(write_config(tmp_path, {"model": {"kappa": 1.0}}))

    def test_rho_pair_form(self, tmp_path):
        cfg = load_config(write_config(
            tmp_path, {"model": {"rho": {"R_z": 0.8, "z_y": -0.1}}}))
        rho = np.asarray(cfg.model.rho)
        assert rho[0, 2] == 0.8 and rho[2, 0] == 0.8
        assert rho[2, 3] == -0.1

    def test_rho_matrix_form(self, tmp_path):
        rho = np.eye(4).tolist()
        cfg = load_config(write_config(tmp_path, {"model": {"rho": rho}}))
        assert np.array_equal(cfg.model.rho, np.eye(4))

    def test_invalid_model_value(self, tmp_path):
        with pytest.raises(ConfigError, match="gamma_z"):
            load_config(write_config(tmp_path, {"model": {"gamma_z": -2.0}}))

    def test_sweep_requires_values(self, tmp_path):
        with pytest.raises(ConfigError, match="values"):
            load_config(write_config(tmp_path, {
                "task": "sweep", "sweep": {"parameter": "gamma_z", "values": []}}))

    def test_bad_json_reported(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(path))


class TestSweepValue:
    def test_plain_field(self):
        p = apply_sweep_value(ModelParams(), "gamma_z", -0.4)
        assert p.gamma_z == -0.4

    def test_rho_pair(self):
        p = apply_sweep_value(ModelParams(), "rho.R_z", 0.8)
        assert np.asarray(p.rho)[0, 2] == 0.8

    def test_unknown_parameter(self):
        with pytest.raises(ConfigError):
            apply_sweep_value(ModelParams(), "nonsense", 1.0)


class TestMain:
    def test_price_task_artifacts(self, tmp_path):
        cfg = small_run(tmp_path)
        assert main(["--config", cfg]) == 0
        out = tmp_path / "out"
        report = json.loads((out / "spread_report.json").read_text())
        assert "s_bps" in report and "basis_bps" in report
        lines = (out / "leg_terms.csv").read_text().splitlines()
        assert lines[0].startswith("# quantocds-csv-v1 schema=legterms")
        assert lines[2] == "i,t_i,A_i,B_i,C_i,D_i"
        assert len(lines) == 3 + 12

    def test_sweep_deterministic_bodies(self, tmp_path):
        cfg = small_run(tmp_path, task="sweep",
                        sweep={"parameter": "gamma_z", "values": [0.0, -0.2]})
        assert main(["--config", cfg]) == 0
        body1 = (tmp_path / "out" / "sweep_gamma_z.csv").read_text().splitlines()
        assert main(["--config", cfg]) == 0
        body2 = (tmp_path / "out" / "sweep_gamma_z.csv").read_text().splitlines()
        # identical except the timestamp comment
        strip = lambda ls: [l for l in ls if not l.startswith("# generated=")]
        assert strip(body1) == strip(body2)
        assert len(strip(body1)) == 2 + 2

    def test_sweep_parallel_workers_match_serial(self, tmp_path):
        cfg = small_run(tmp_path, task="sweep",
                        sweep={"parameter": "gamma_z", "values": [0.0, -0.5]})
        assert main(["--config", cfg, "--threads", "2"]) == 0
        par = (tmp_path / "out" / "sweep_gamma_z.csv").read_text().splitlines()
        assert main(["--config", cfg, "--threads", "1"]) == 0
        ser = (tmp_path / "out" / "sweep_gamma_z.csv").read_text().splitlines()
        strip = lambda ls: [l for l in ls if not l.startswith("# generated=")]
        assert strip(par) == strip(ser)

    def test_mc_check_task(self, tmp_path):
        cfg = small_run(tmp_path, task="mc-check",
                        mc={"n_paths": 2000, "seed": 1})
        assert main(["--config", cfg]) == 0
        lines = (tmp_path / "out" / "mc_check.csv").read_text().splitlines()
        assert lines[2] == "pde_bps,mc_bps,mc_se_bps,z_score,pass"

    def test_config_error_exit_code(self, tmp_path):
        cfg = write_config(tmp_path, {"task": "sweep"})
        assert main(["--config", cfg]) == 2
        assert main(["--config", str(tmp_path / "missing.json")]) == 2

    def test_solver_error_exit_code(self, tmp_path):
        # a wildly stiff operator destabilizes the explicit march: exit 1
        payload = {"model": {"sigma_y": 25.0},
                   "output": {"dir": str(tmp_path / "out")}}
        cfg = write_config(tmp_path, payload)
        assert main(["--config", cfg, "--task", "price"]) == 1

    def test_task_override(self, tmp_path):
        cfg = small_run(tmp_path, task="sweep",
                        sweep={"parameter": "gamma_z", "values": [0.0]})
        assert main(["--config", cfg, "--task", "price"]) == 0
        assert (tmp_path / "out" / "spread_report.json").exists()

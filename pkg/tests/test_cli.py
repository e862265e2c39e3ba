import json
import math
import os

import numpy as np
import pytest

from shearlab.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    Scenario,
    main,
    read_snapshots,
    run_admissibility,
    run_envelope,
    run_mixing,
    run_simulate,
    validate_config,
    write_snapshots,
)


def heat_config(name="heat", nu=1e-2, T=50.0):
    return {
        "name": name,
        "nu": nu,
        "k": 1,
        "profile": {"name": "kolmogorov"},
        "modulation": {"builtin": "constant", "value": 0.0, "horizon": T},
        "weight": {"s": "unit"},
        "solver": {"T": T, "dt": 0.01, "n_points": 64, "save_every": 4},
        "initial": {"single_mode": 1},
        "outputs": ["energy_csv", "report_json", "trajectory_csv"],
        "checks": ["identities"],
        "params": {"identity_rtol": 1e-3},
        "seed": 7,
    }


def read_csv(path):
    with open(path) as handle:
        lines = handle.read().splitlines()
    assert lines[0].startswith("# config=")
    header = lines[1].split(",")
    rows = np.array([[float(x) for x in line.split(",")] for line in lines[2:]])
    return header, rows


class TestConfigValidation:
    def test_unknown_top_level_key(self):
        config = heat_config()
        config["extra_physics"] = 1
        with pytest.raises(ConfigError, match="unknown keys"):
            validate_config(config)

    def test_unknown_nested_key(self):
        config = heat_config()
        config["solver"]["dx"] = 0.1
        with pytest.raises(ConfigError, match="unknown keys"):
            validate_config(config)

    def test_missing_required(self):
        config = heat_config()
        del config["initial"]
        with pytest.raises(ConfigError, match="missing"):
            validate_config(config)

    def test_unknown_check_rejected(self):
        config = heat_config()
        config["checks"] = ["identities", "entropy"]
        with pytest.raises(ConfigError, match="unknown check"):
            validate_config(config)

    def test_zero_k_rejected(self):
        config = heat_config()
        config["k"] = 0
        with pytest.raises(ConfigError):
            validate_config(config)

    def test_cli_reports_config_error(self, tmp_path):
        bad = heat_config()
        bad["solver"]["dx"] = 1
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


class TestSimulatePipeline:
    def test_heat_energy_column_matches_oracle(self, tmp_path):
        scn = Scenario(heat_config())
        assert run_simulate(scn, str(tmp_path)) == EXIT_OK
        header, rows = read_csv(tmp_path / "heat_energy.csv")
        t = rows[:, header.index("t")]
        e0 = rows[:, header.index("E0")]
        oracle = 2 * np.pi * np.exp(-2 * 1e-2 * t)
        assert np.max(np.abs(e0 - oracle) / oracle) <= 1e-9

    def test_inviscid_energy_constant(self, tmp_path):
        config = heat_config(name="inviscid", nu=0.0, T=5.0)
        config["modulation"] = {"builtin": "constant", "value": 1.0, "horizon": 5.0}
        config["solver"] = {"T": 5.0, "dt": 0.01, "n_points": 128, "save_every": 50}
        config["checks"] = []
        scn = Scenario(config)
        assert run_simulate(scn, str(tmp_path)) == EXIT_OK
        header, rows = read_csv(tmp_path / "inviscid_energy.csv")
        e0 = rows[:, header.index("E0")]
        assert np.max(np.abs(e0 - e0[0])) <= 1e-12 * e0[0]

    def test_full_check_pipeline_passes(self, tmp_path):
        config = {
            "name": "class0",
            "nu": 1e-3,
            "k": 1,
            "profile": {"name": "kolmogorov"},
            "modulation": {"builtin": "constant", "value": 1.0, "horizon": 50.0},
            "weight": {"s": "unit"},
            "solver": {"T": 50.0, "dt": 0.01, "n_points": 128, "save_every": 10},
            "initial": {"single_mode": 1},
            "outputs": ["energy_csv", "report_json"],
            "checks": ["identities", "phi_decay", "psi_decay", "coercivity"],
            "params": {"identity_rtol": 1e-2},
            "seed": 1,
        }
        scn = Scenario(config)
        assert run_simulate(scn, str(tmp_path)) == EXIT_OK
        report = json.loads((tmp_path / "class0_report.json").read_text())
        assert report["passed"]
        assert report["checks"]["phi_decay"]["passed"]
        assert report["checks"]["coercivity"]["violations"] == 0
        assert report["admissibility"]["thm1"]["admissible"]

    def test_failing_check_gives_exit_two(self, tmp_path):
        config = heat_config()
        config["params"]["identity_rtol"] = 1e-18
        scn = Scenario(config)
        assert run_simulate(scn, str(tmp_path)) == EXIT_CHECK_FAILED

    def test_determinism_byte_identical(self, tmp_path):
        config = heat_config(name="det", T=10.0)
        for sub in ("a", "b"):
            os.makedirs(tmp_path / sub)
            run_simulate(Scenario(config), str(tmp_path / sub))
        body_a = (tmp_path / "a" / "det_energy.csv").read_bytes()
        body_b = (tmp_path / "b" / "det_energy.csv").read_bytes()
        assert body_a == body_b

    def test_envelope_and_figure2_outputs_from_simulate(self, tmp_path):
        config = heat_config(name="all", nu=1e-3, T=10.0)
        config["modulation"] = {"builtin": "constant", "value": 1.0, "horizon": 10.0}
        config["checks"] = []
        config["outputs"] = ["energy_csv", "report_json", "envelope_csv", "figure2_csv"]
        assert run_simulate(Scenario(config), str(tmp_path)) == EXIT_OK
        assert (tmp_path / "all_envelope.csv").exists()
        assert (tmp_path / "all_figure2.csv").exists()
        report = json.loads((tmp_path / "all_report.json").read_text())
        assert report["envelope_emitted"]

    def test_non_finite_state_gives_exit_three(self, tmp_path):
        from shearlab.cli import EXIT_BLOWUP

        config = heat_config(name="blowup", T=1.0)
        config["checks"] = []
        config["initial"] = {"tabulated": {"re": [math.nan] * 64, "im": [0.0] * 64}}
        assert run_simulate(Scenario(config), str(tmp_path)) == EXIT_BLOWUP
        report = json.loads((tmp_path / "blowup_report.json").read_text())
        assert "error" in report

    def test_random_initial_determinism(self, tmp_path):
        config = heat_config(name="rand", T=5.0)
        config["initial"] = {"random_bandlimited": {"seed": 11, "bandwidth": 6}}
        for sub in ("a", "b"):
            os.makedirs(tmp_path / sub)
            run_simulate(Scenario(config), str(tmp_path / sub))
        assert (tmp_path / "a" / "rand_energy.csv").read_bytes() == (
            tmp_path / "b" / "rand_energy.csv"
        ).read_bytes()


class TestAdmissibilityCommand:
    def test_report_and_region_table(self, tmp_path):
        config = heat_config(name="adm", nu=1e-3)
        config["modulation"] = {"builtin": "poly", "nu": 1e-3, "horizon": 30.0}
        config["weight"] = {"s": 0.25}
        scn = Scenario(config)
        assert run_admissibility(scn, str(tmp_path)) == EXIT_OK
        report = json.loads((tmp_path / "adm_admissibility.json").read_text())
        assert report["thm1"]["admissible"]
        header, rows = read_csv(tmp_path / "adm_figure1.csv")
        assert header == ["t", "xi", "L", "U"]
        xi = rows[:, 1]
        lower = rows[:, 2]
        upper = rows[:, 3]
        assert np.all(xi >= lower * (1 - 1e-9))
        assert np.all(xi <= upper * (1 + 1e-9))

    def test_exp_unit_thm2_applicable(self, tmp_path):
        config = heat_config(name="expu", nu=1e-2)
        config["modulation"] = {"builtin": "exp_unit", "nu": 1e-2}
        config["solver"]["T"] = 100.0
        scn = Scenario(config)
        run_admissibility(scn, str(tmp_path))
        report = json.loads((tmp_path / "expu_admissibility.json").read_text())
        assert not report["thm1"]["admissible"]
        assert report["thm2"]["admissible"]

    def test_constant_above_one(self, tmp_path):
        config = heat_config(name="big")
        config["modulation"] = {"builtin": "constant", "value": 1.5, "horizon": 50.0}
        scn = Scenario(config)
        run_admissibility(scn, str(tmp_path))
        report = json.loads((tmp_path / "big_admissibility.json").read_text())
        assert not report["thm2"]["admissible"]


class TestEnvelopeCommand:
    def test_envelope_csv_and_sidecar(self, tmp_path):
        config = heat_config(name="env", nu=1e-3)
        config["modulation"] = {"builtin": "constant", "value": 1.0, "horizon": 50.0}
        scn = Scenario(config)
        assert run_envelope(scn, str(tmp_path)) == EXIT_OK
        header, rows = read_csv(tmp_path / "env_envelope.csv")
        assert header == ["t", "envelope_value", "exponent"]
        assert rows[0, 1] >= 1.0
        assert np.all(np.diff(rows[:, 2]) >= 0)
        sidecar = json.loads((tmp_path / "env_envelope.json").read_text())
        assert sidecar["kind"] == "thm1"
        assert "admissibility_hash" in sidecar


class TestFlagOverrides:
    def test_checks_flag_overrides_config(self, tmp_path):
        config = heat_config(name="flagged", T=5.0)
        config["checks"] = ["identities", "coercivity"]
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        code = main(["simulate", "--config", str(path), "--out", str(tmp_path), "--checks", "identities"])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "flagged_report.json").read_text())
        assert list(report["checks"]) == ["identities"]

    def test_envelope_inadmissible_without_force(self, tmp_path):
        config = heat_config(name="neither", nu=1e-3)
        config["modulation"] = {"builtin": "constant", "value": 1.5, "horizon": 50.0}
        scn = Scenario(config)
        assert run_envelope(scn, str(tmp_path)) == EXIT_CHECK_FAILED
        payload = json.loads((tmp_path / "neither_envelope.json").read_text())
        assert "error" in payload


class TestThm2EnvelopePath:
    def test_exp_unit_gets_onoff_envelope(self, tmp_path):
        config = heat_config(name="onoff", nu=1e-2)
        config["modulation"] = {"builtin": "exp_unit", "nu": 1e-2}
        config["solver"]["T"] = 100.0
        scn = Scenario(config)
        assert run_envelope(scn, str(tmp_path)) == EXIT_OK
        sidecar = json.loads((tmp_path / "onoff_envelope.json").read_text())
        assert sidecar["kind"] == "thm2"
        assert sidecar["constants"]["c_xi_prime_ge_nu_over_k"] is False

    def test_oversized_rate_knob_rejected(self, tmp_path):
        config = heat_config(name="badrate", nu=1e-2)
        config["modulation"] = {"builtin": "exp_unit", "nu": 1e-2}
        config["solver"]["T"] = 100.0
        config["params"]["C_xi_func"] = 0.9
        scn = Scenario(config)
        with pytest.raises(ConfigError, match="nonpositive"):
            scn.c_xi_prime()


class TestMixingCommand:
    def test_mixing_outputs(self, tmp_path):
        config = {
            "name": "mix",
            "nu": 0.0,
            "k": 1,
            "profile": {"name": "kolmogorov"},
            "modulation": {"builtin": "constant", "value": 1.0, "horizon": 2000.0},
            "solver": {"T": 2000.0, "n_points": 8192},
            "initial": {"single_mode": 1},
            "outputs": ["report_json"],
            "seed": 0,
        }
        scn = Scenario(config)
        assert run_mixing(scn, str(tmp_path)) == EXIT_OK
        payload = json.loads((tmp_path / "mix_mixing.json").read_text())
        assert payload["dominates"]
        header, rows = read_csv(tmp_path / "mix_mixing.csv")
        assert header == ["t", "Xi", "h_minus_1", "ratio", "envelope"]
        assert np.all(rows[:, 4] >= rows[:, 3] * (1 - 1e-12))


class TestFigure2Command:
    def test_cli_figure2(self, tmp_path):
        code = main(["figure2", "--nu", "1e-10", "--k", "1", "--out", str(tmp_path)])
        assert code == EXIT_OK
        header, rows = read_csv(tmp_path / "figure2.csv")
        assert header == ["t", "env_exampleB", "env_xi1", "env_diffusion"]
        assert np.allclose(rows[0, 1:], 1.0)
        payload = json.loads((tmp_path / "figure2.json").read_text())
        assert payload["checks"]["headline_total_matches"]
        assert payload["checks"]["ordered_after_cross"]


class TestSweep:
    def test_sweep_parallel_workers(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SHEARLAB_THREADS", "2")
        config = heat_config(name="par", T=5.0)
        config["checks"] = []
        path = tmp_path / "base.json"
        path.write_text(json.dumps(config))
        code = main(
            ["sweep", "--config", str(path), "--out", str(tmp_path), "--nu-list", "1e-2,2e-2", "--k-list", "1"]
        )
        assert code == EXIT_OK
        produced = sorted(p for p in os.listdir(tmp_path) if p.endswith("_report.json"))
        assert len(produced) == 2

    def test_sweep_writes_per_scenario_outputs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SHEARLAB_THREADS", "1")
        config = heat_config(name="sweepbase", T=5.0)
        config["checks"] = []
        path = tmp_path / "base.json"
        path.write_text(json.dumps(config))
        code = main(
            [
                "sweep",
                "--config",
                str(path),
                "--out",
                str(tmp_path),
                "--nu-list",
                "1e-2,2e-2",
                "--k-list",
                "1",
            ]
        )
        assert code == EXIT_OK
        produced = sorted(p for p in os.listdir(tmp_path) if p.endswith("_report.json"))
        assert len(produced) == 2


class TestSnapshotsRoundTrip:
    def test_binary_dump(self, tmp_path):
        config = heat_config(name="snap", T=1.0)
        config["outputs"] = ["snapshots_bin", "report_json"]
        config["checks"] = []
        scn = Scenario(config)
        run_simulate(scn, str(tmp_path))
        records = read_snapshots(tmp_path / "snap_snapshots.bin")
        assert records[0][0] == 0.0
        assert records[-1][0] == 1.0
        t0, k, values = records[0]
        assert k == 1
        grid_points = 2 * np.pi * np.arange(64) / 64
        assert np.max(np.abs(values - np.exp(1j * grid_points))) < 1e-14

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from amplify_dp.cli import main


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    lines = text.splitlines()
    meta = [l for l in lines if l.startswith("#")]
    data = [l for l in lines if not l.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(data))))
    return meta, rows[0], rows[1:]


MIX_CONFIG = {"kernel": [[0.7, 0.3], [0.4, 0.6]], "eps": 1.0, "delta": 0.0}


class TestMixingCommand:
    def test_per_condition_rows(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MIX_CONFIG)
        code, out, _ = run_cli(["mixing", "--config", cfg], capsys)
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header == ["condition", "gamma", "eps_prime", "delta_prime"]
        by_cond = {r[0]: r for r in rows}
        assert set(by_cond) == {"dobrushin", "eps_dobrushin", "doeblin", "ultra"}
        doeblin = by_cond["doeblin"]
        assert float(doeblin[1]) == pytest.approx(0.3, abs=1e-12)
        assert float(doeblin[2]) == pytest.approx(math.log1p(0.3 * math.expm1(1.0)), abs=1e-12)
        assert float(doeblin[3]) == pytest.approx(
            0.3 * (1 - (1 + 0.3 * math.expm1(1.0)) / math.e), abs=1e-12)

    def test_constant_kernel_all_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"kernel": [[0.5, 0.5], [0.5, 0.5]],
                                      "eps": 1.0, "delta": 0.5})
        code, out, _ = run_cli(["mixing", "--config", cfg], capsys)
        assert code == 0
        _, _, rows = parse_csv(out)
        for row in rows:
            assert float(row[1]) == 0.0
            assert float(row[3]) == 0.0

    def test_non_stochastic_kernel_exit_2_with_row_index(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"kernel": [[0.7, 0.31], [0.4, 0.6]],
                                      "eps": 1.0, "delta": 0.0})
        code, _, err = run_cli(["mixing", "--config", cfg], capsys)
        assert code == 2
        assert "row 0" in err

    def test_nearly_stochastic_kernel_accepted(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"kernel": [[0.7, 0.3 + 1e-10], [0.4, 0.6]],
                                      "eps": 1.0, "delta": 0.0})
        code, _, _ = run_cli(["mixing", "--config", cfg], capsys)
        assert code == 0

    def test_kernel_path_variant(self, tmp_path, capsys):
        kpath = tmp_path / "kernel.json"
        kpath.write_text(json.dumps([[0.7, 0.3], [0.4, 0.6]]), encoding="utf-8")
        cfg = write_config(tmp_path, {"kernel_path": str(kpath), "eps": 1.0,
                                      "delta": 0.0})
        code, out, _ = run_cli(["mixing", "--config", cfg], capsys)
        assert code == 0

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(MIX_CONFIG, extra=1))
        code, _, err = run_cli(["mixing", "--config", cfg], capsys)
        assert code == 2
        assert "extra" in err

    def test_missing_config_file_exit_1(self, capsys):
        code, _, err = run_cli(["mixing", "--config", "/nonexistent/x.json"], capsys)
        assert code == 1


class TestSgdCommand:
    def test_rows_and_reference_value(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n": 10, "C": 1.0, "sigma": 1.0, "beta": 3.0,
                                      "rho": 1.0, "eta": 0.5, "alpha": 2.0})
        code, out, _ = run_cli(["sgd", "--config", cfg], capsys)
        assert code == 0
        _, header, rows = parse_csv(out)
        assert len(rows) == 10
        row9 = next(r for r in rows if r[0] == "9")
        assert float(row9[header.index("epsilon")]) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_eta_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n": 10, "C": 1.0, "sigma": 1.0, "beta": 3.0,
                                      "rho": 1.0, "eta": 0.9, "alpha": 2.0})
        code, _, err = run_cli(["sgd", "--config", cfg], capsys)
        assert code == 2
        assert "eta" in err


class TestIterCommand:
    def test_contractive(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"r": 10, "lipschitz": 1.0, "sigma": 1.0,
                                      "delta0": 1.0, "alpha": 2.0})
        code, out, _ = run_cli(["iter", "--config", cfg], capsys)
        assert code == 0
        _, header, rows = parse_csv(out)
        assert float(rows[0][header.index("epsilon")]) == pytest.approx(0.1)

    def test_path_mode(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"r": 2, "lipschitz": 1.0, "sigma": 1.0,
                                      "delta0": 1.0, "alpha": [2.0, 4.0],
                                      "increments": [0.5, 0.5]})
        code, out, _ = run_cli(["iter", "--config", cfg], capsys)
        assert code == 0
        _, header, rows = parse_csv(out)
        assert len(rows) == 2
        assert float(rows[0][header.index("epsilon")]) == pytest.approx(0.5)

    def test_expansive_uniform_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"r": 3, "lipschitz": 1.5, "sigma": 1.0,
                                      "delta0": 1.0, "alpha": 2.0})
        code, _, err = run_cli(["iter", "--config", cfg], capsys)
        assert code == 2


class TestOuCommand:
    def test_sweep_columns(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"theta": 1.0, "rho": 1.0, "d": 1, "R": 1.0,
                                      "delta": 1.0, "t_grid": [0.5, 1.0, 2.0]})
        code, out, _ = run_cli(["ou", "--config", cfg], capsys)
        assert code == 0
        _, header, rows = parse_csv(out)
        assert header == ["t", "lambda_t", "mse_ou", "mse_gm", "mse_pgm_bound", "ratio"]
        assert len(rows) == 3
        # theta R^2 <= 4 d rho^2 holds, so the ratio stays below 1.
        for row in rows:
            assert float(row[header.index("ratio")]) <= 1.0

    def test_planner_mode(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"plan_epsilon": 1.0, "d": 1, "R": 1.0,
                                      "delta": 1.0, "t_grid": [1.0]})
        code, out, _ = run_cli(["ou", "--config", cfg], capsys)
        assert code == 0
        meta, header, rows = parse_csv(out)
        theta_line = next(l for l in meta if l.startswith("# planned_theta"))
        assert float(theta_line.split(":")[1]) == pytest.approx(math.log(1.5), abs=1e-12)
        assert float(rows[0][header.index("ratio")]) <= 2 / 3 + 1e-9

    def test_planner_conflicts_with_theta(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"plan_epsilon": 1.0, "theta": 1.0, "rho": 1.0,
                                      "d": 1, "R": 1.0, "delta": 1.0, "t_grid": [1.0]})
        code, _, _ = run_cli(["ou", "--config", cfg], capsys)
        assert code == 2


class TestDivergenceCommand:
    def test_hockey_stick(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "kind": "hockey_stick",
            "mu": {"points": ["a", "b"], "probs": [0.5, 0.5]},
            "nu": {"points": ["a", "b"], "probs": [0.9, 0.1]},
            "eps": 0.0})
        code, out, _ = run_cli(["divergence", "--config", cfg], capsys)
        assert code == 0
        _, header, rows = parse_csv(out)
        assert float(rows[0][header.index("value")]) == pytest.approx(0.4, abs=1e-12)

    def test_w_inf_with_coordinates(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "kind": "w_inf",
            "mu": {"points": [[0.0], [1.0]], "probs": [0.5, 0.5]},
            "nu": {"points": [[0.5], [1.5]], "probs": [0.5, 0.5]}})
        code, out, _ = run_cli(["divergence", "--config", cfg], capsys)
        assert code == 0
        _, header, rows = parse_csv(out)
        assert float(rows[0][header.index("value")]) == pytest.approx(0.5, abs=1e-12)

    def test_w_inf_coordinate_free_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "kind": "w_inf",
            "mu": {"points": ["a", "b"], "probs": [0.5, 0.5]},
            "nu": {"points": ["a", "b"], "probs": [0.5, 0.5]}})
        code, _, _ = run_cli(["divergence", "--config", cfg], capsys)
        assert code == 2

    def test_invalid_distribution_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "kind": "tv",
            "mu": {"points": ["a", "b"], "probs": [0.5, 0.6]},
            "nu": {"points": ["a", "b"], "probs": [0.5, 0.5]}})
        code, _, err = run_cli(["divergence", "--config", cfg], capsys)
        assert code == 2
        assert "mu" in err


class TestVerifyCommand:
    def test_exit_zero_and_violation_count(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"suites": ["theorem1"], "trials": 20})
        code, out, _ = run_cli(["verify", "--config", cfg, "--seed", "5"], capsys)
        assert code == 0
        assert "# violations: 0" in out

    def test_seed_mandatory(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"suites": ["theorem1"], "trials": 5})
        code, _, err = run_cli(["verify", "--config", cfg], capsys)
        assert code == 2
        assert "seed" in err

    def test_json_summary(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"suites": ["theorem1"], "trials": 5})
        code, out, _ = run_cli(["verify", "--config", cfg, "--seed", "1",
                                "--format", "json"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["summary"]["theorem1_doeblin"]["violations"] == 0

    def test_unknown_suite_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"suites": ["nonsense"]})
        code, _, _ = run_cli(["verify", "--config", cfg, "--seed", "1"], capsys)
        assert code == 2

    def test_violations_exit_3(self, tmp_path, capsys, monkeypatch):
        # Force a failing report through the wiring; theorems hold, so a real
        # violation cannot be provoked with honest inputs.
        from amplify_dp import cli as cli_mod
        from amplify_dp.verify import TrialReport

        def fake_certify(trials, sizes, eps_grid, seed):
            return [TrialReport(0, "theorem1_dobrushin", "synthetic", 0.5, 0.5,
                                measured=1.0, bound=0.1, tolerance=1e-12,
                                passed=False, slack=-0.9)]

        monkeypatch.setattr(cli_mod, "certify_theorem1", fake_certify)
        cfg = write_config(tmp_path, {"suites": ["theorem1"], "trials": 1})
        code, out, _ = run_cli(["verify", "--config", cfg, "--seed", "1"], capsys)
        assert code == 3
        assert "# violations: 1" in out

    def test_thread_cap_echoed(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("AMPLIFY_DP_THREADS", "4")
        cfg = write_config(tmp_path, {"suites": ["theorem1"], "trials": 2})
        code, out, _ = run_cli(["verify", "--config", cfg, "--seed", "1"], capsys)
        assert code == 0
        assert "# threads: 4" in out


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"suites": ["theorem1"], "trials": 10})
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["verify", "--config", cfg, "--seed", "3",
                     "--out", str(out1)]) == 0
        assert main(["verify", "--config", cfg, "--seed", "3",
                     "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert b"\r" not in out1.read_bytes()  # LF endings

    def test_config_echo_round_trips(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MIX_CONFIG)
        code, out, _ = run_cli(["mixing", "--config", cfg], capsys)
        meta, _, _ = parse_csv(out)
        echoed = next(l for l in meta if l.startswith("# config: "))
        payload = json.loads(echoed[len("# config: "):])
        cfg2 = write_config(tmp_path, payload, name="echoed.json")
        code2, out2, _ = run_cli(["mixing", "--config", cfg2], capsys)
        assert code2 == code
        assert out2 == out

    def test_json_format_parses(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MIX_CONFIG)
        code, out, _ = run_cli(["mixing", "--config", cfg, "--format", "json"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["rows"]) == 4


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        cfg = write_config(tmp_path, MIX_CONFIG)
        proc = subprocess.run(
            [sys.executable, "-m", "amplify_dp.cli", "mixing", "--config", cfg],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "condition,gamma,eps_prime,delta_prime" in proc.stdout

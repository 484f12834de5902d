import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from robust_td.harness import ConfigError, dump_config, generate_instance, load_config, parse_config, run_experiment
from robust_td.harness.cli import main
from robust_td.harness.experiment import OUTPUT_ENV, output_dir, read_trials
from robust_td.mrp import corrupted_fixed_point, steady_state

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """\
schema: robust-td-experiment/1
instance:
  generator: {num_states: 20, K: 4, gamma: 0.5, reward_lo: 0.0, reward_hi: 5.0, seed: 3}
noise: {kind: gaussian, variance: 1.0}
attack: {kind: constant_bias, eps: 0.01, bias_times_eps: 100.0}
learner:
  kind: robust_td
  alpha: 0.1
  burn_in: 1000
  constant_C: 8.0
  schedule: practical
trials: 3
T: 5000
log_stride: 50
base_seed: 7
output: out
"""


class TestGenerateInstance:
    def test_reference_setup_valid(self):
        mrp = generate_instance(100, 10, 0.5, 0, 5, seed=123)
        ss = steady_state(mrp)
        assert np.all((mrp.mean_rewards >= 0) & (mrp.mean_rewards < 5))
        assert np.linalg.norm(ss.A_bar @ ss.theta_star + ss.b_bar) <= 1e-8

    def test_degenerate_rewards(self):
        mrp = generate_instance(2, 2, 0.9, 1, 1, seed=0)
        assert mrp.mean_rewards.tolist() == [1.0, 1.0]

    def test_feature_rows_scan(self):
        for seed in range(100):
            mrp = generate_instance(30, 5, 0.5, 0, 5, seed=seed)
            assert np.einsum("ij,ij->i", mrp.features, mrp.features).max() <= 1.0 + 1e-12
            assert mrp.transition.min() > 0

    def test_deterministic(self):
        a, b = generate_instance(10, 3, 0.5, 0, 5, 9), generate_instance(10, 3, 0.5, 0, 5, 9)
        np.testing.assert_array_equal(a.transition, b.transition)
        np.testing.assert_array_equal(a.features, b.features)

    def test_K_too_large(self):
        with pytest.raises(ValueError):
            generate_instance(3, 4, 0.5, 0, 1, 0)


class TestConfig:
    def test_parse(self):
        cfg = parse_config(BASE)
        assert cfg.learner.kind == "robust_td" and cfg.trials == 3
        assert cfg.seeds() == [7, 8, 9]
        atk = cfg.attack.build()
        assert atk.generate(np.array([0]), np.array([0]), np.array([0.0]), None)[0] == pytest.approx(1e4)

    def test_round_trip(self):
        cfg = parse_config(BASE)
        again = parse_config(dump_config(cfg))
        assert again == cfg
        assert dump_config(again) == dump_config(cfg)

    def test_unknown_key_line_number(self):
        text = BASE.replace("  alpha: 0.1", "  alpha: 0.1\n  epsilon: 0.01")
        with pytest.raises(ConfigError) as e:
            parse_config(text, source="x.yaml")
        assert "x.yaml:9:" in str(e.value) and "epsilon" in str(e.value)

    def test_bad_value_line_number(self):
        text = BASE.replace("trials: 3", "trials: 0")
        with pytest.raises(ConfigError) as e:
            parse_config(text, source="x.yaml")
        assert "x.yaml:12: trials" in str(e.value)

    def test_schema_required(self):
        text = BASE.replace("robust-td-experiment/1", "robust-td-experiment/0")
        with pytest.raises(ConfigError, match="schema"):
            parse_config(text)

    def test_yaml_syntax(self):
        with pytest.raises(ConfigError, match="syntax"):
            parse_config("schema: [unclosed\n")

    @pytest.mark.parametrize("old,new", [
        ("kind: gaussian, variance: 1.0", "kind: gaussian"),
        ("kind: gaussian, variance: 1.0", "kind: deterministic, variance: 1.0"),
        ("eps: 0.01, bias_times_eps: 100.0", "eps: 0.01"),
        ("kind: robust_td", "kind: sarsa"),
        ("num_states: 20, K: 4", "num_states: 3, K: 4"),
    ])
    def test_invalid_nested(self, old, new):
        with pytest.raises(ConfigError):
            parse_config(BASE.replace(old, new))

    def test_overrides(self):
        cfg = parse_config(BASE).with_overrides(base_seed=100, log_stride=None, T=6000)
        assert cfg.base_seed == 100 and cfg.log_stride == 50 and cfg.T == 6000

    def test_shipped_configs_valid(self):
        files = sorted(CONFIGS.glob("*.yaml"))
        assert files
        for f in files:
            load_config(f)


class TestExperiment:
    def test_tables_and_aggregate(self, tmp_path):
        cfg = parse_config(BASE)
        res = run_experiment(cfg, out=tmp_path)
        trials = read_trials(tmp_path / "trials.csv")
        assert sorted(trials) == [0, 1, 2]
        D = np.vstack([trials[i][1] for i in range(3)])
        rows = list(csv.DictReader(open(tmp_path / "aggregate.csv")))
        assert list(rows[0]) == ["t", "mse_mean", "mse_std", "n_trials"]
        agg = np.array([float(r["mse_mean"]) for r in rows])
        np.testing.assert_allclose(agg, D.mean(axis=0), rtol=1e-12, atol=0)
        np.testing.assert_array_equal(agg, res.mse_mean)
        assert [int(r["t"]) for r in rows] == list(range(0, 5001, 50))
        with open(tmp_path / "trials.csv") as fh:
            assert fh.readline().strip() == "trial,t,d_t,reset"

    def test_rerun_bit_identical(self, tmp_path):
        cfg = parse_config(BASE).with_overrides(trials=1)
        a = run_experiment(cfg, write=False)
        b = run_experiment(cfg, write=False)
        np.testing.assert_array_equal(a.trials[0].d_series, b.trials[0].d_series)

    def test_record_reproducible_alone(self):
        cfg = parse_config(BASE)
        full = run_experiment(cfg, write=False)
        rec = full.trials[2]
        alone = run_experiment(cfg.with_overrides(base_seed=rec.seed, trials=1), write=False)
        np.testing.assert_array_equal(alone.trials[0].d_series, rec.d_series)

    def test_worker_count_independent(self):
        cfg = parse_config(BASE)
        a = run_experiment(cfg, workers=1, write=False)
        b = run_experiment(cfg, workers=2, write=False)
        for ra, rb in zip(a.trials, b.trials):
            np.testing.assert_array_equal(ra.d_series, rb.d_series)

    def test_seeds_distinct(self):
        cfg = parse_config(BASE).with_overrides(trials=50)
        assert len(set(cfg.seeds())) == 50

    def test_output_env(self, monkeypatch, tmp_path):
        cfg = parse_config(BASE)
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
        assert output_dir(cfg) == tmp_path / "out"
        assert output_dir(cfg, "elsewhere") == Path("elsewhere")
        monkeypatch.delenv(OUTPUT_ENV)
        assert output_dir(cfg) == Path("out")

    def test_reset_column_counts(self, tmp_path):
        text = BASE.replace("eps: 0.01, bias_times_eps: 100.0", "eps: 0.3, bias: 1.0e9").replace(
            "  constant_C: 8.0", "  constant_C: 1.0\n  eps: 0.0\n  tau_mix: 1")
        res = run_experiment(parse_config(text), out=tmp_path)
        rows = list(csv.DictReader(open(tmp_path / "trials.csv")))
        for rec in res.trials:
            total = sum(int(r["reset"]) for r in rows if int(r["trial"]) == rec.trial_index)
            assert total == rec.reset_events.size > 0

    def test_vulnerability_example(self, tmp_path):
        cfg = load_config(CONFIGS / "vulnerability_td0.yaml")
        res = run_experiment(cfg, out=tmp_path)
        mrp, ss = cfg.instance.build(), None
        ss = steady_state(mrp)
        eps = cfg.attack.eps
        target = corrupted_fixed_point(ss, mrp, np.full(mrp.num_states, 100 / eps), eps)
        k = max(1, int(round(0.1 * res.mse_mean.size)))
        assert res.mse_mean[-k:].mean() >= 0.5 * np.sum((target - ss.theta_star) ** 2)

    def test_robust_eps_sweep_example(self):
        plateaus = []
        for e in ("0.001", "0.005", "0.01"):
            res = run_experiment(load_config(CONFIGS / f"robust_td_eps{e}.yaml"), write=False)
            k = max(1, int(round(0.1 * res.mse_mean.size)))
            plateaus.append(res.mse_mean[-k:].mean())
        assert all(np.isfinite(plateaus))
        assert plateaus[0] <= plateaus[1] <= plateaus[2]


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestCli:
    def test_help_lists_subcommands(self):
        out = subprocess.run([sys.executable, "-m", "robust_td.harness.cli", "--help"], capture_output=True, text=True)
        assert out.returncode == 0
        for cmd in ("run", "validate", "gen-instance", "lower-bound", "rumem-coverage"):
            assert cmd in out.stdout

    def test_validate_ok(self, tmp_path, capsys):
        assert main(["validate", write(tmp_path, BASE)]) == 0
        out = capsys.readouterr().out
        assert "schema: robust-td-experiment/1" in out and "tau_mix" in out

    def test_validate_malformed(self, tmp_path, capsys):
        assert main(["validate", write(tmp_path, BASE.replace("T: 5000", "T: 5000\nhorizon: 3"))]) == 2
        assert "c.yaml:14: horizon" in capsys.readouterr().err

    def test_run_writes_tables(self, tmp_path, capsys):
        out = tmp_path / "res"
        assert main(["run", write(tmp_path, BASE), "--out", str(out), "--seed", "3", "--log-stride", "100"]) == 0
        trials = read_trials(out / "trials.csv")
        assert len(trials[0][0]) == 51
        assert (out / "aggregate.csv").exists()

    def test_run_infeasible_exit_1(self, tmp_path, capsys):
        text = BASE.replace("schedule: practical", "schedule: analysis")
        assert main(["run", write(tmp_path, text), "--out", str(tmp_path / "x")]) == 1
        assert "infeasible" in capsys.readouterr().err

    def test_lower_bound(self, capsys):
        assert main(["lower-bound", "--rho", "1", "--eps", "0.04", "--gamma", "0.5"]) == 0
        out = capsys.readouterr().out
        assert "0.208333" in out and "mixtures identical: true" in out

    def test_lower_bound_export(self, tmp_path, capsys):
        p = tmp_path / "lb.json"
        assert main(["lower-bound", "--rho", "1", "--eps", "0.04", "--gamma", "0.5", "--out", str(p)]) == 0
        from robust_td.mrp import load_mrp

        assert load_mrp(p).num_states == 1

    def test_lower_bound_bad_range(self, capsys):
        assert main(["lower-bound", "--rho", "1", "--eps", "0.6", "--gamma", "0.5"]) == 1

    def test_gen_instance(self, tmp_path, capsys):
        p = tmp_path / "m.json"
        assert main(["gen-instance", "--num-states", "6", "--K", "2", "--seed", "4", "--out", str(p)]) == 0
        from robust_td.mrp import load_mrp

        np.testing.assert_array_equal(load_mrp(p).features, generate_instance(6, 2, 0.5, 0, 5, 4).features)
        assert main(["gen-instance", "--num-states", "2", "--K", "3"]) == 1

    def test_rumem_coverage(self, capsys):
        assert main(["rumem-coverage", "--eps", "0.02", "--reps", "20", "--N", "100000"]) == 0
        out = capsys.readouterr().out
        assert "coverage 20/20" in out and "tau=24" in out

import os
from fractions import Fraction as F

import numpy as np
import pytest

from fbmw.cli import main
from fbmw.harness.config import (
    ConfigError,
    ExperimentConfig,
    apply_settings,
    parse_epsilon_mode,
    parse_t_grid,
    read_config,
    write_config,
)
from fbmw.harness.report import FIT_HEADER, RATES_HEADER, emit_report, read_fits
from fbmw.harness.suites import SuiteReport, run_lemma_suite
from fbmw.harness.sweeps import (
    RateFit,
    SweepAborted,
    collect,
    critical_ratio_test,
    fit_rate,
    ols,
    replica_seed,
    run_discrete_sweep,
    run_metric_sweep,
)
from fbmw.occupation import GridMeasure
from fbmw.rates import RateLaw, rate_continuous
from fbmw.transport import NotConverged

SMALL = ExperimentConfig(d=1, H=0.5, T_grid=(16, 32, 64, 128), replicas=16, resolution=64, n_steps_max=2**12, seed=7)


def flaky(cfg, T, seed):
    # every fifth replica fails: 20% > the 10% abort threshold
    if seed % 5 == 0:
        raise NotConverged("synthetic", 1.0)
    return 1.0


def rarely_flaky(cfg, T, seed):
    if (seed & 0xFFFFFFFF) == 3:
        raise NotConverged("synthetic", 1.0)
    return float(T)


class TestConfig:
    def test_t_grid_forms(self):
        assert parse_t_grid("16,32, 64") == (16.0, 32.0, 64.0)
        assert parse_t_grid("2^4..2^7") == (16.0, 32.0, 64.0, 128.0)
        with pytest.raises(ConfigError):
            parse_t_grid("2^4..3^7")

    def test_epsilon_mode_forms(self):
        assert parse_epsilon_mode("rule_continuous") == ("rule_continuous", None)
        assert parse_epsilon_mode("rule_discrete(0.2)") == ("rule_discrete", 0.2)
        cfg = apply_settings(ExperimentConfig(), {"epsilon_mode": "fixed(0.01)"})
        assert cfg.epsilon_mode == "fixed" and cfg.epsilon == 0.01
        cfg = apply_settings(ExperimentConfig(), {"epsilon-mode": "rule_discrete(0.5)"})
        assert cfg.alpha == 0.5

    def test_read_with_comments(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("# sweep\nd = 3  # dimension\n\nhurst=0.25\nt_grid=2^5..2^8\nreplicas=0x10\n", encoding="utf-8")
        cfg = apply_settings(ExperimentConfig(), read_config(p))
        assert (cfg.d, cfg.H, cfg.T_grid, cfg.replicas) == (3, 0.25, (32.0, 64.0, 128.0, 256.0), 16)

    def test_bad_lines(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("d 3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_config(p)
        with pytest.raises(ConfigError):
            apply_settings(ExperimentConfig(), {"nonsense": "1"})

    def test_write_read_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(d=2, H=1 / 3, alpha=0.2, epsilon_mode="rule_discrete", reg=2e-3)
        p = tmp_path / "c.txt"
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            write_config(cfg, fh)
        assert b"\r" not in p.read_bytes()
        assert apply_settings(ExperimentConfig(), read_config(p)) == cfg

    @pytest.mark.parametrize("kw", [
        {"T_grid": (16, 32, 64)},
        {"T_grid": (16, 64, 32, 128)},
        {"replicas": 7},
        {"metric": "w2"},
        {"epsilon_mode": "fixed"},
        {"H": 1.0},
    ])
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw).validate()

    def test_discrete_needs_alpha(self):
        with pytest.raises(ConfigError):
            ExperimentConfig().validate(discrete=True)

    def test_single_horizon_rejected(self):
        with pytest.raises(ConfigError, match="too short"):
            run_metric_sweep(SMALL.replace(T_grid=(64,)))


class TestFit:
    def test_replica_seeds_distinct(self):
        seeds = {replica_seed(5, r, h) for r in range(200) for h in range(10)}
        assert len(seeds) == 2000

    def test_ols_exact_line(self):
        x = np.arange(6.0)
        s, i, se = ols(x, 3 - 0.5 * x)
        assert s == pytest.approx(-0.5, abs=1e-14) and i == pytest.approx(3, abs=1e-14)
        assert se == pytest.approx(0, abs=1e-12)

    def test_ols_stderr_matches_scipy(self):
        from scipy import stats

        rng = np.random.default_rng(0)
        x = rng.random(20)
        y = 2 * x + rng.normal(size=20)
        ref = stats.linregress(x, y)
        s, i, se = ols(x, y)
        assert (s, i, se) == pytest.approx((ref.slope, ref.intercept, ref.stderr), rel=1e-12)

    def test_power_law_recovered(self):
        T = 2.0 ** np.arange(4, 10)
        vals = np.repeat((3 * T**-0.5)[:, None], 4, axis=1)
        f = fit_rate(T, vals, rate_continuous(1, 0.5), 0.1)
        assert f.slope == pytest.approx(-0.5, abs=1e-12) and f.passed
        assert np.all(f.counts == 4)

    def test_critical_log_removed(self):
        T = 2.0 ** np.arange(5, 13)
        law = rate_continuous(4, 0.5, 2)
        vals = np.repeat((law(T) * 7.0)[:, None], 3, axis=1)
        f = fit_rate(T, vals, law, 0.05)
        assert f.slope == pytest.approx(-1.0, abs=1e-12)
        # a plain power fit is biased by the log factor over this range
        assert abs(ols(np.log(T), np.log(law(T)))[0] + 1.0) > 0.1

    def test_failed_replicas_excluded(self):
        T = 2.0 ** np.arange(4, 8)
        vals = np.ones((4, 5))
        vals[1, 2] = np.nan
        f = fit_rate(T, vals, RateLaw("subcritical", F(0)), 0.1)
        assert f.counts.tolist() == [5, 4, 5, 5]
        assert f.slope == pytest.approx(0, abs=1e-14)

    def test_negative_stderr_rejected(self):
        with pytest.raises(ValueError):
            RateFit(0, 0, -1, np.ones(4), np.ones(4), np.ones(4), np.ones(4), rate_continuous(1, 0.5), 0.1, np.ones((4, 2)))

    def test_abort_over_ten_percent(self):
        cfg = SMALL.replace(replicas=10)
        with pytest.raises(SweepAborted):
            collect(cfg, flaky)

    def test_isolated_failure_tolerated(self):
        vals = collect(SMALL.replace(seed=0, replicas=20), rarely_flaky)
        assert np.isnan(vals).sum() == 4
        assert np.nanmax(vals) == 128


class TestRatio:
    def test_affine_accepted(self):
        T = 2.0 ** np.arange(5, 13)
        vals = np.sqrt(T * (1 + 0.3 * np.log(T)))[:, None] * np.ones((1, 4))
        r = critical_ratio_test(T, vals)
        assert r.r_squared == pytest.approx(1, abs=1e-12) and r.passed()
        assert r.slope == pytest.approx(0.3, rel=1e-10)

    def test_constant_rejected(self):
        T = 2.0 ** np.arange(5, 13)
        rng = np.random.default_rng(1)
        vals = np.sqrt(T * (1 + 0.01 * rng.normal(size=T.size)))[:, None] * np.ones((1, 4))
        r = critical_ratio_test(T, vals)
        assert not r.passed()


class TestSweeps:
    def test_reproducible_bytes(self, tmp_path):
        out = []
        for k, threads in enumerate((1, 2)):
            fit = run_metric_sweep(SMALL.replace(threads=threads))
            paths = emit_report([fit], [], tmp_path / str(k))
            out.append([open(paths[n], "rb").read() for n in ("rates.csv", "fit.csv")])
        assert out[0] == out[1]

    def test_seed_changes_result(self):
        a = run_metric_sweep(SMALL)
        b = run_metric_sweep(SMALL.replace(seed=8))
        assert not np.array_equal(a.values, b.values)

    def test_stderr_shrinks_with_replicas(self):
        a = run_metric_sweep(SMALL.replace(replicas=100))
        b = run_metric_sweep(SMALL.replace(replicas=400))
        ratio = float(np.mean(b.stderrs / a.stderrs))
        assert ratio == pytest.approx(0.5, abs=0.1)

    def test_sampled_brownian_in_one_dimension(self):
        # occupation-scale W_1 of B_{tau}, ..., B_{T} with tau = T^-2 grows like T^(1/2)
        cfg = ExperimentConfig(d=1, H=0.3, alpha=2, T_grid=(16, 32, 64, 128), replicas=64, resolution=256, seed=1)
        fit = run_discrete_sweep(cfg)
        assert fit.theory_exponent == 0.5
        assert fit.passed

    def test_alpha_kink_in_three_dimensions(self):
        base = ExperimentConfig(d=3, H=0.5, metric="sobolev_l2", epsilon_mode="rule_discrete",
                                T_grid=tuple(2.0**k for k in range(5, 12)), replicas=32, seed=2, tolerance=0.08)
        lo = run_discrete_sweep(base.replace(alpha=0.3))
        hi = run_discrete_sweep(base.replace(alpha=0.7))
        assert lo.theory_exponent == pytest.approx(17 / 30) and hi.theory_exponent == 0.5
        assert lo.passed and hi.passed
        assert lo.slope > hi.slope

    def test_sobolev_sweep_runs(self):
        cfg = ExperimentConfig(d=2, H=0.5, metric="sobolev_l2", T_grid=(16, 32, 64, 128), replicas=8, n_steps_max=2**12)
        fit = run_metric_sweep(cfg)
        assert fit.theory_exponent == 0.5 and np.all(fit.means > 0)


class TestReport:
    def test_empty(self, tmp_path):
        paths = emit_report([], [], tmp_path)
        assert open(paths["rates.csv"]).read() == ",".join(RATES_HEADER) + "\n"
        assert open(paths["fit.csv"]).read() == ",".join(FIT_HEADER) + "\n"

    def test_one_fit_roundtrip(self, tmp_path):
        T = 2.0 ** np.arange(4, 8)
        vals = (T**-0.5)[:, None] * np.array([[0.9, 1.0, 1.1]])
        fit = fit_rate(T, vals, rate_continuous(1, 0.5), 0.1, "demo")
        paths = emit_report([fit], [SuiteReport("empty")], tmp_path)
        rows = read_fits(paths["fit.csv"])
        assert len(rows) == 1
        r = rows[0]
        assert r["slope"] == fit.slope and r["stderr"] == fit.stderr
        assert r["pass"] == (abs(r["slope"] - r["theory_exponent"]) <= 0.1) == fit.passed
        assert r["regime"] == "subcritical"
        lines = open(paths["rates.csv"], newline="").read().split("\n")
        assert len(lines) == 6 and lines[-1] == ""
        assert float(lines[1].split(",")[1]) == fit.means[0]
        assert open(paths["summary.txt"]).read().startswith("PASS  demo")


class TestSuites:
    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="unknown suite"):
            run_lemma_suite("no-such-suite")

    @pytest.mark.parametrize("name,params", [
        ("young", {"trials": 20}),
        ("pde-identities", {"trials": 10}),
        ("g-norms", {}),
        ("transport-oracles", {"cases": 40, "circle_cases": 5, "entropic_cases": 1}),
        ("lemma-2-2", {"trials": 10, "slope_measures": 2}),
    ])
    def test_reduced_suites_pass(self, name, params):
        rep = run_lemma_suite(name, seed=3, **params)
        assert rep.checks and rep.passed, "\n".join(rep.lines())

    def test_report_lines(self):
        rep = SuiteReport("demo")
        rep.add("holds", True, 1.0, 2.0, "<=")
        rep.add("breaks", False, 3.0, 2.0)
        assert not rep.passed
        text = "\n".join(rep.lines())
        assert "PASS" in text and "FAIL" in text


class TestCli:
    def test_simulate(self, tmp_path):
        rc = main(["simulate", "--d", "2", "--hurst", "0.4", "--t-grid", "1,2,3,4", "--set", "n_steps_max=64",
                   "--seed", "3", "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "path.csv").read_bytes().split(b"\n")
        assert lines[0] == b"t,x1,x2" and len(lines) == 67

    def test_rates_writes_files(self, tmp_path):
        rc = main(["rates", "--d", "1", "--hurst", "0.5", "--p", "1", "--t-grid", "2^4..2^7", "--replicas", "8",
                   "--metric", "wasserstein_exact", "--resolution", "32", "--set", "n_steps_max=2048",
                   "--tolerance", "0.5", "--out", str(tmp_path)])
        assert rc == 0
        assert {"rates.csv", "fit.csv", "summary.txt", "config.txt"} <= set(os.listdir(tmp_path))
        cfg = apply_settings(ExperimentConfig(), read_config(tmp_path / "config.txt"))
        assert cfg.replicas == 8 and cfg.resolution == 32

    def test_config_file_and_override(self, tmp_path):
        conf = tmp_path / "run.txt"
        conf.write_text("d=1\nhurst=0.5\nt_grid=2^4..2^7\nreplicas=8\nresolution=16\nn_steps_max=1024\n"
                        "tolerance=0.5\n", encoding="utf-8")
        rc = main(["rates", "--config", str(conf), "--resolution", "32", "--out", str(tmp_path / "o")])
        assert rc == 0
        cfg = apply_settings(ExperimentConfig(), read_config(tmp_path / "o" / "config.txt"))
        assert cfg.resolution == 32

    def test_verify(self, tmp_path, capsys):
        assert main(["verify", "young", "--out", str(tmp_path)]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_transport(self, tmp_path, capsys):
        a = np.zeros(8)
        a[0] = 1.0
        with open(tmp_path / "mu.txt", "w", encoding="utf-8", newline="\n") as fh:
            GridMeasure(a).write(fh)
        assert main(["transport", str(tmp_path / "mu.txt"), "--p", "1", "--out", str(tmp_path)]) == 0
        # mass 1/8 travels circular distance min(k, 8 - k)/8 to each cell k
        w = float(capsys.readouterr().out.strip())
        assert w == pytest.approx((2 * (1 + 2 + 3) + 4) / 64, abs=1e-15)
        assert (tmp_path / "plan.csv").exists()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        assert main(["rates", "--t-grid", "16", "--out", str(tmp_path)]) == 2
        assert "too short" in capsys.readouterr().err

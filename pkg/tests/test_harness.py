import csv

import numpy as np
import pytest

from riskgrad.cli import main
from riskgrad.complexity import ComplexityInputs
from riskgrad.harness import (ANALYZE_COLUMNS, PRESETS, ConfigError, ExperimentConfig,
                              RunRecord, aggregate_runs, analyze, analyze_csv,
                              load_checkpoint, load_run, load_study, parse_config_text,
                              run_experiment)
from riskgrad.plotting import chart_limits, emit_chart, resolve_metric

SMALL = dict(env="cartpole", iterations=5, trajectories=2, horizon=50, hidden=(8, 8, 8))


def small_config(tmp_path, **kw):
    return ExperimentConfig(**{**SMALL, "out_dir": str(tmp_path), **kw})


def fake_record(cfg, seed, values):
    v = np.asarray(values, dtype=float)
    return RunRecord(cfg, seed, v, v * 0.5, np.abs(v), np.zeros(len(v), dtype=np.int64))


class TestConfig:
    def test_parse_with_comments(self):
        raw = parse_config_text("# header\nenv = gridnav\niters=10 # short\n\n")
        assert raw == {"env": "gridnav", "iters": "10"}

    @pytest.mark.parametrize("text", ["no equals sign", "colour=blue", "=3"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_presets_expand_to_betas(self):
        cfgs = load_study("cartpole-paper")
        assert [c.beta for c in cfgs] == [0, -0.01, -0.1, -1, -10]
        assert all(c.iterations == 2000 and c.horizon == 200 and c.seeds == tuple(range(10))
                   for c in cfgs)
        assert [c.beta for c in load_study("gridnav-paper")] == [0, -0.1, -0.5, -10]
        assert load_study("cartpole-quick")[0].iterations == 600
        assert set(PRESETS) >= {"cartpole-paper", "cartpole-quick", "gridnav-paper"}

    def test_overrides(self):
        cfgs = load_study("cartpole-paper", beta=-0.5, iters=3, seeds="1,4")
        assert len(cfgs) == 1
        assert (cfgs[0].beta, cfgs[0].iterations, cfgs[0].seeds) == (-0.5, 3, (1, 4))

    def test_file_round_trip(self, tmp_path):
        cfg = small_config(tmp_path, beta=-0.1, seeds=(2, 3))
        path = tmp_path / "c.txt"
        path.write_text(cfg.to_text())
        assert load_study(str(path)) == [cfg]

    @pytest.mark.parametrize("kw", [dict(iterations=0), dict(gamma=1.0), dict(lr=-1.0),
                                    dict(env="pong"), dict(hidden=(8, 8)), dict(seeds=()),
                                    dict(seeds=(1, 1)), dict(beta=float("inf"))])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_unknown_config_name(self):
        with pytest.raises(ConfigError):
            load_study("no-such-preset")

    def test_labels(self, tmp_path):
        assert small_config(tmp_path).label == "cartpole_neutral"
        cfg = small_config(tmp_path, beta=-0.1)
        assert cfg.label == "cartpole_beta-0.1"
        assert cfg.run_dir(3) == tmp_path / "cartpole_beta-0.1" / "seed3"


class TestRunExperiment:
    def test_byte_identical_replay(self, tmp_path):
        cfg = small_config(tmp_path)
        run_experiment(cfg, 1, out_dir=tmp_path / "a")
        run_experiment(cfg, 1, out_dir=tmp_path / "b")
        for name in ("metrics.csv", "policy.txt", "config.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        cfg = small_config(tmp_path)
        a = run_experiment(cfg, 1, write=False)
        b = run_experiment(cfg, 2, write=False)
        assert not np.array_equal(a.grad_norm, b.grad_norm)

    def test_metrics_file_layout(self, tmp_path):
        rec = run_experiment(small_config(tmp_path), 0)
        rows = list(csv.reader(open(tmp_path / "cartpole_neutral" / "seed0" / "metrics.csv")))
        assert rows[0] == ["iter", "mean_return", "mean_disc_return", "grad_norm",
                           "saturations", "ms"]
        assert len(rows) == 6 and all(r[5] == "" for r in rows[1:])
        assert rec.checkpoint_path.exists()
        timing = (tmp_path / "cartpole_neutral" / "seed0" / "timing.csv").read_text()
        assert timing.startswith("iter,ms\n") and len(timing.splitlines()) == 6

    def test_timing_column_opt_in(self, tmp_path):
        run_experiment(small_config(tmp_path), 0, with_timing=True)
        rows = list(csv.reader(open(tmp_path / "cartpole_neutral" / "seed0" / "metrics.csv")))
        assert all(float(r[5]) > 0 for r in rows[1:])

    def test_metrics_match_dumped_trajectories(self, tmp_path):
        cfg = small_config(tmp_path, gamma=0.9)
        rec = run_experiment(cfg, 4, dump_iterations=(0, 3))
        tdir = cfg.run_dir(4) / "trajectories"
        for it in (0, 3):
            rets, disc = [], []
            for i in range(cfg.trajectories):
                rows = list(csv.DictReader(open(tdir / f"iter{it:05d}_traj{i}.csv")))
                r = np.array([float(row["reward"]) for row in rows])
                rets.append(r.sum())
                disc.append(sum(0.9 ** k * x for k, x in enumerate(r)))
                assert len(rows) <= cfg.horizon
            assert rec.mean_return[it] == pytest.approx(np.mean(rets), rel=1e-12)
            assert rec.mean_disc_return[it] == pytest.approx(np.mean(disc), rel=1e-12)

    def test_load_run_round_trip(self, tmp_path):
        cfg = small_config(tmp_path, beta=-0.1, seeds=(5,))
        rec = run_experiment(cfg, 5)
        back = load_run(cfg.run_dir(5))
        assert back.config == cfg and back.seed == 5
        np.testing.assert_array_equal(back.grad_norm, rec.grad_norm)
        np.testing.assert_array_equal(back.mean_return, rec.mean_return)
        assert load_checkpoint(back.checkpoint_path).layer_sizes == (4, 8, 8, 8, 2)

    def test_gridnav_runs(self, tmp_path):
        rec = run_experiment(small_config(tmp_path, env="gridnav", beta=-10.0), 0, write=False)
        assert np.all(np.isfinite(rec.grad_norm))
        assert np.all((rec.mean_return >= 0) & (rec.mean_return <= 1))


class TestAggregate:
    def test_single_run_zero_std(self, tmp_path):
        cfg = small_config(tmp_path)
        t = aggregate_runs([fake_record(cfg, 0, [1, 2, 3])])
        assert t.n_runs == 1 and np.all(t.std["mean_return"] == 0)
        assert t.mean["mean_return"].tolist() == [1, 2, 3]

    def test_symmetric_runs(self, tmp_path):
        cfg = small_config(tmp_path)
        r = np.array([1.0, -2.0, 5.0])
        t = aggregate_runs([fake_record(cfg, 0, r), fake_record(cfg, 1, -r)])
        assert np.all(t.mean["mean_return"] == 0)
        np.testing.assert_allclose(t.std["mean_return"], np.abs(r) * np.sqrt(2))

    def test_mismatched_configs(self, tmp_path):
        a = fake_record(small_config(tmp_path), 0, [1.0])
        b = fake_record(small_config(tmp_path, beta=-0.1), 1, [1.0])
        with pytest.raises(ValueError):
            aggregate_runs([a, b])
        with pytest.raises(ValueError):
            aggregate_runs([])

    def test_csv(self, tmp_path):
        t = aggregate_runs([fake_record(small_config(tmp_path), 0, [1.5, 2.5])])
        lines = t.to_csv().splitlines()
        assert lines[0].startswith("iter,mean_return_mean,mean_return_std")
        assert lines[1].startswith("0,1.5,0.0")


class TestAnalyze:
    def test_rows(self):
        inputs = ComplexityInputs(0.99, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.1)
        rows = analyze(inputs, [-0.01, -0.1, -1.0])
        assert [r["in_range"] for r in rows] == [False, True, False]
        assert rows[1]["L"] == 20000.0
        assert rows[1]["ratio"] == pytest.approx(0.01 * np.e, rel=1e-12)
        assert rows[2]["ratio"] == pytest.approx(np.e, rel=1e-12)
        text = analyze_csv(rows)
        assert text.splitlines()[0] == ",".join(ANALYZE_COLUMNS)
        assert text.splitlines()[2].endswith(",true")


class TestCharts:
    def tables(self, tmp_path):
        cfg = small_config(tmp_path)
        recs = [fake_record(cfg, s, np.arange(10.0) + s) for s in range(3)]
        return aggregate_runs(recs)

    def test_empty_metric(self, tmp_path):
        with pytest.raises(ValueError):
            emit_chart(self.tables(tmp_path), "", tmp_path / "x.svg")
        with pytest.raises(ValueError):
            resolve_metric("loss")

    def test_byte_stable_svg_and_csv(self, tmp_path):
        t = self.tables(tmp_path)
        a = emit_chart(t, "return", tmp_path / "a.svg")
        b = emit_chart([t], "return", tmp_path / "b.svg")
        assert a.read_bytes() == b.read_bytes()
        assert a.with_suffix(".csv").read_text() == b.with_suffix(".csv").read_text()
        assert a.read_text().lstrip().startswith("<?xml")

    def test_limits_cover_bands(self, tmp_path):
        t = self.tables(tmp_path)
        lo, hi = chart_limits([t], "return")
        assert lo < (t.mean["mean_return"] - t.std["mean_return"]).min()
        assert hi > (t.mean["mean_return"] + t.std["mean_return"]).max()

    def test_png_suffix(self, tmp_path):
        out = emit_chart(self.tables(tmp_path), "gradnorm", tmp_path / "g.png")
        assert out.read_bytes()[:4] == b"\x89PNG"


class TestCli:
    def test_train_and_plot(self, tmp_path, capsys):
        args = ["train", "--env", "cartpole", "--beta=-0.1", "--seeds", "0,1", "--iters", "3",
                "--traj", "2", "--horizon", "30", "--hidden", "8,8,8", "--out", str(tmp_path),
                "--plot"]
        assert main(args) == 0
        assert (tmp_path / "cartpole_beta-0.1" / "aggregate.csv").exists()
        assert (tmp_path / "return.svg").exists() and (tmp_path / "gradnorm.csv").exists()
        out = tmp_path / "chart.svg"
        assert main(["plot", "--in", str(tmp_path), "--metric", "gradnorm",
                     "--out", str(out)]) == 0
        assert out.exists()

    def test_analyze(self, capsys):
        assert main(["analyze", "--gamma", "0.99", "--rmax", "1",
                     "--betas=-0.01,-0.1,-1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4 and lines[2].endswith("true")

    @pytest.mark.parametrize("argv", [
        ["train", "--env", "pong", "--iters", "1"],
        ["train", "--config", "missing-preset"],
        ["analyze", "--gamma", "1.0", "--rmax", "1", "--betas", "0.1"],
        ["analyze", "--gamma", "0.9", "--rmax", "1", "--betas", "0"],
    ])
    def test_config_errors_exit_2(self, argv, capsys):
        assert main(argv) == 2

    def test_usage_error_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["plot"])
        assert exc.value.code == 2

    def test_plot_empty_dir(self, tmp_path, capsys):
        assert main(["plot", "--in", str(tmp_path), "--out", str(tmp_path / "x.svg")]) == 2

    def test_numerical_failure_exit_3(self, tmp_path, capsys):
        argv = ["train", "--env", "cartpole", "--beta", "100", "--seeds", "0", "--iters", "2",
                "--traj", "2", "--hidden", "8,8,8", "--out", str(tmp_path)]
        assert main(argv) == 3
        assert "numerical failure" in capsys.readouterr().err

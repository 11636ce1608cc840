import csv

import numpy as np
import pytest

from rydberg_reservoir import cli
from rydberg_reservoir.exceptions import ParameterError
from rydberg_reservoir.experiments import (
    ExperimentConfig,
    cmd_hysteresis,
    cmd_phase_diagram,
    cmd_predict_sweep,
    cmd_relax_fit,
    cmd_relax_times,
    prediction_point,
)


def small_sweep(tmp_path, **kw):
    base = dict(lorenz_steps=1200, m=20, n_seeds=1, delta_min=9.0, delta_max=11.0, delta_points=2,
                out=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path, encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig(omega=1.2345678901234567, task="csv", pd_delta_points=7)
        assert ExperimentConfig.loads(cfg.dumps()) == cfg

    def test_comments_and_coercion(self):
        cfg = ExperimentConfig.loads("# header\nomega = 1.3  # inline\n\nn_seeds = 5\n")
        assert cfg.omega == 1.3 and cfg.n_seeds == 5

    @pytest.mark.parametrize("text", ["nonsense\n", "bogus = 1\n", "n_seeds = 1.5\n", "task = other\n",
                                      "workers = 0\n"])
    def test_bad_text(self, text):
        with pytest.raises(ParameterError):
            ExperimentConfig.loads(text)

    def test_precedence(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("seed = 4\ncut_omega = 1.5\nworkers = 3\n", encoding="utf-8")
        args = cli.build_parser().parse_args(
            ["hysteresis", "--config", str(path), "--seed", "9", "--set", "cut_delta_points=11"]
        )
        cfg = cli.resolve_config(args)
        assert (cfg.seed, cfg.cut_omega, cfg.workers, cfg.cut_delta_points) == (9, 1.5, 3, 11)


class TestCommands:
    def test_phase_diagram_linear(self, tmp_path):
        cfg = ExperimentConfig(v=0.0, pd_delta_points=9, pd_omega_points=5, out=str(tmp_path))
        pd, summary = cmd_phase_diagram(cfg)
        rows = read_csv(tmp_path / "phase_diagram.csv")
        assert len(rows) == 45 and {r["root_count"] for r in rows} == {"1"}
        assert summary == "bistable region: none"
        assert (tmp_path / "manifest.txt").read_text(encoding="utf-8").count("v = 0.0") == 1

    def test_phase_diagram_single_cell(self, tmp_path):
        cfg = ExperimentConfig(pd_delta_min=11.45, pd_delta_max=11.45, pd_delta_points=1,
                               pd_omega_min=1.21, pd_omega_max=1.21, pd_omega_points=1, out=str(tmp_path))
        pd, _ = cmd_phase_diagram(cfg)
        assert pd.root_counts.tolist() == [[3]]

    def test_hysteresis_cuts(self, tmp_path):
        _, _, interval = cmd_hysteresis(ExperimentConfig(out=str(tmp_path)), omega=1.21)
        assert interval is not None and 11.3 < interval[0] < interval[1] < 11.6
        _, _, none = cmd_hysteresis(ExperimentConfig(out=str(tmp_path)), omega=1.1)
        assert none is None
        rows = read_csv(tmp_path / "hysteresis.csv")
        assert {r["direction"] for r in rows} == {"up", "down"} and len(rows) == 800

    def test_hysteresis_reversed_config(self, tmp_path):
        a = ExperimentConfig(cut_delta_min=0.0, cut_delta_max=30.0, out=str(tmp_path / "a"))
        b = ExperimentConfig(cut_delta_min=30.0, cut_delta_max=0.0, out=str(tmp_path / "b"))
        assert cmd_hysteresis(a)[2] == pytest.approx(cmd_hysteresis(b)[2], abs=1e-12)

    def test_relax_times(self, tmp_path):
        rows, window = cmd_relax_times(ExperimentConfig(out=str(tmp_path)))
        assert window[0] == pytest.approx(11.3602711, abs=1e-6)
        assert window[1] == pytest.approx(11.5376885, abs=1e-6)
        assert {r.branch for r in rows} == {"lower", "upper"}
        out = read_csv(tmp_path / "relax_times.csv")
        assert len(out) == len(rows)

    def test_relax_times_monostable_cut(self, tmp_path):
        rows, window = cmd_relax_times(ExperimentConfig(out=str(tmp_path)), omega=1.1)
        assert window is None and {r.branch for r in rows} == {"single"}
        assert len(rows) == 400 and all(np.isfinite(r.tau_relax) for r in rows)

    def test_relax_times_linear_closed_form(self, tmp_path):
        cfg = ExperimentConfig(v=0.0, cut_delta_points=31, out=str(tmp_path))
        rows, _ = cmd_relax_times(cfg, omega=1.1)
        g = 0.5 * (cfg.gamma + cfg.gamma_d)
        for r in rows:
            assert r.tau_relax == pytest.approx(1 / (1.1**2 * g / (g**2 + r.delta**2) + cfg.gamma), rel=1e-12)

    def test_commands_are_byte_reproducible(self, tmp_path):
        for name, run in (("phase_diagram.csv", lambda c: cmd_phase_diagram(c.override({"pd_delta_points": 40, "pd_omega_points": 30}))),
                          ("hysteresis.csv", cmd_hysteresis), ("relax_times.csv", cmd_relax_times),
                          ("relax_fit.csv", cmd_relax_fit)):
            run(ExperimentConfig(out=str(tmp_path / "a")))
            run(ExperimentConfig(out=str(tmp_path / "b")))
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        manifests = [(tmp_path / d / "manifest.txt").read_text(encoding="utf-8").splitlines() for d in "ab"]
        assert [line for line in manifests[0] if not line.startswith("out =")] == \
            [line for line in manifests[1] if not line.startswith("out =")]

    def test_relax_fit_simulated(self, tmp_path):
        results = cmd_relax_fit(ExperimentConfig(out=str(tmp_path)))
        assert len(results) == 6
        for r in results:
            assert not r.fit.degenerate
            assert r.fit.tau == pytest.approx(r.tau_linear, rel=0.2)

    def test_relax_fit_from_csv(self, tmp_path):
        t = np.linspace(0, 30, 301)
        y = np.concatenate([0.1 + 0.2 * np.exp(-t[:100] / 0.7), 0.3 - 0.2 * np.exp(-(t[100:] - 10) / 0.7)])
        path = tmp_path / "in.csv"
        path.write_text("time,value\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(t.tolist(), y.tolist())), encoding="utf-8")
        results = cmd_relax_fit(ExperimentConfig(out=str(tmp_path), relax_periods=3), path)
        assert len(results) == 3
        assert results[0].fit.tau == pytest.approx(0.7, rel=1e-3)


class TestPrediction:
    def test_small_sweep_outputs(self, tmp_path):
        cfg = small_sweep(tmp_path)
        result = cmd_predict_sweep(cfg)
        rows = read_csv(tmp_path / "out" / "predict_sweep.csv")
        assert [r["status"] for r in rows] == ["ok", "ok"]
        assert [int(r["n_series"]) for r in rows] == [20, 20]
        detail = read_csv(tmp_path / "out" / "predict_detail.csv")
        assert len(detail) == 40
        assert np.isfinite(result.mean_mse()).all()
        # 17 significant digits in every float cell
        assert len(rows[0]["mean_mse"].split("e")[0].replace(".", "").lstrip("-")) == 17

    def test_constant_series_gives_zero_error(self, tmp_path):
        cfg = small_sweep(tmp_path)
        mses = prediction_point(cfg, np.full(1200, 2.0), 11.0, 0, 0)
        np.testing.assert_allclose(mses, 0.0, atol=1e-20)

    def test_strong_noise_hurts(self, tmp_path):
        series = np.sin(np.arange(1200) * 0.3)
        quiet = min(np.mean(prediction_point(small_sweep(tmp_path), series, de, 0, 0)) for de in (9.0, 11.0))
        for de in (5.0, 9.0, 11.0, 15.0):
            loud = np.mean(prediction_point(small_sweep(tmp_path, noise=1.0), series, de, 0, 0))
            assert loud > quiet

    def test_csv_task(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("t,value\n" + "".join(f"{k},{float(np.sin(0.3 * k))!r}\n" for k in range(1200)), encoding="utf-8")
        cfg = small_sweep(tmp_path, task="csv", csv_path=str(path))
        assert np.isfinite(cmd_predict_sweep(cfg).mean_mse()).all()

    def test_csv_task_requires_path(self, tmp_path):
        with pytest.raises(ParameterError):
            cmd_predict_sweep(small_sweep(tmp_path, task="csv"))

    def test_failed_point_is_recorded(self, tmp_path):
        # too short for the window length: every point fails but the sweep completes
        cfg = small_sweep(tmp_path, lorenz_steps=300, m=400)
        result = cmd_predict_sweep(cfg)
        assert result.errors and all(r is None for r in result.reports)
        rows = read_csv(tmp_path / "out" / "predict_sweep.csv")
        assert all(r["status"].startswith("ParameterError") for r in rows)

    def test_rerun_is_byte_identical_across_worker_counts(self, tmp_path):
        a = small_sweep(tmp_path, out=str(tmp_path / "a"), n_seeds=2)
        b = small_sweep(tmp_path, out=str(tmp_path / "b"), n_seeds=2, workers=2)
        cmd_predict_sweep(a)
        cmd_predict_sweep(b)
        for name in ("predict_sweep.csv", "predict_detail.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a = cmd_predict_sweep(small_sweep(tmp_path, out=str(tmp_path / "a")))
        b = cmd_predict_sweep(small_sweep(tmp_path, out=str(tmp_path / "b"), seed=1))
        assert not np.array_equal(a.mean_mse(), b.mean_mse())


class TestCLI:
    def test_phase_diagram(self, tmp_path, capsys):
        code = cli.main(["phase-diagram", "--out", str(tmp_path), "--delta-points", "31",
                         "--omega-points", "26"])
        assert code == 0
        assert "bistable region: delta in" in capsys.readouterr().out
        assert (tmp_path / "phase_diagram.csv").read_text(encoding="utf-8").startswith("delta,omega,root_count,failed\n")

    def test_hysteresis_and_relax(self, tmp_path, capsys):
        assert cli.main(["hysteresis", "--out", str(tmp_path), "--omega", "1.1"]) == 0
        assert "hysteresis interval: none" in capsys.readouterr().out
        assert cli.main(["relax-times", "--out", str(tmp_path)]) == 0
        assert "spinodals: 11.3602711" in capsys.readouterr().out
        assert cli.main(["relax-fit", "--out", str(tmp_path)]) == 0
        assert capsys.readouterr().out.count("segment") == 6

    def test_predict_sweep(self, tmp_path, capsys):
        code = cli.main(["predict-sweep", "--out", str(tmp_path), "--delta-points", "2", "--n-seeds", "1",
                         "--set", "lorenz_steps=1200", "--set", "m=20"])
        assert code == 0
        assert capsys.readouterr().out.count("mean_mse=") == 2

    def test_errors_return_nonzero(self, tmp_path, capsys):
        assert cli.main(["predict-sweep", "--out", str(tmp_path), "--task", "csv"]) == 1
        assert "error:" in capsys.readouterr().err
        assert cli.main(["hysteresis", "--config", str(tmp_path / "missing.txt")]) == 1

    def test_requires_command(self):
        with pytest.raises(SystemExit):
            cli.main([])

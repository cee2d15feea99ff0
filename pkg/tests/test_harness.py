import csv
import json

import numpy as np
import pytest

from wmsindy import harness
from wmsindy.harness import (
    ExperimentConfig,
    build_problem,
    emit_figure_data,
    fmt,
    main,
    preset,
    run_experiment,
    sweep,
)

# the table as printed: noise %, x0, run time, n_loop, lambda, q
TABLE = {
    "rossler": (40, [3, 5, 0], 25, 6, 0.08, 3),
    "lorenz96": (40, [1, 8, 8, 8, 8, 8], 25, 8, 0.2, 1),
    "vanderpol": (40, [-2, 1], 10, 8, 0.15, 1),
    "duffing": (40, [-2, 2], 25, 5, 0.05, 1),
    "cubic": (20, [0, 2], 25, 5, 0.08, 1),
    "lotka": (30, [1, 2], 10, 5, 0.2, 1),
}


@pytest.mark.parametrize("system", sorted(TABLE))
def test_table_presets(system):
    (cfg,) = preset(f"table2:{system}")
    level, x0, t_total, n_loop, lam, q = TABLE[system]
    assert (cfg.system, cfg.noise_level, list(cfg.x0), cfg.t_total, cfg.n_loop, cfg.lam, cfg.q) == (system, level, x0, t_total, n_loop, lam, q)
    assert cfg.methods == ("msindy", "wmsindy")


def test_lorenz96_library_has_28_terms():
    (cfg,) = preset("table2:lorenz96")
    assert build_problem(cfg.replace(t_total=1.0)).spec.J == 28


def test_figure_presets():
    (fig2,) = preset("fig2")
    assert fig2.sweep_values == tuple(float(v) for v in range(0, 51, 5))
    assert (fig2.x0, fig2.lam, fig2.q, fig2.n_loop, fig2.runs, fig2.horizon) == ((5.0, 5.0, 25.0), 0.2, 1, 6, 10, 6.0)
    (fig3,) = preset("fig3")
    assert fig3.q == 3 and fig3.horizon_fraction == 0.24 and fig3.sweep_axis == "data_length"
    a, b = preset("fig13")
    assert a.known_model == "lorenz_known" and b.known_model is None and a.horizon == 7.0
    (fig15,) = preset("fig15")
    assert (fig15.noise_family, fig15.noise_mode, fig15.q, fig15.horizon) == ("gamma", "natural", 2, 10.0)
    for name in harness.PRESET_NAMES:
        assert preset(name)
    with pytest.raises(ValueError):
        preset("fig99")


def test_config_validation():
    with pytest.raises(ValueError, match="empty"):
        ExperimentConfig("x", sweep_axis="noise_level", sweep_values=())
    with pytest.raises(ValueError):
        ExperimentConfig("x", methods=("magic",))
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"name": "x", "bogus": 1})
    cfg = ExperimentConfig("x", seed=5, runs=3)
    assert cfg.seeds == [5, 6, 7]
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_empty_sweep_list():
    with pytest.raises(ValueError):
        sweep([], "unused")


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "1" and fmt(np.int64(3)) == "3"


def tiny(name, **kw):
    base = dict(
        system="lorenz", methods=("wsindy", "wmsindy"), x0=(5.0, 5.0, 25.0), t_total=6.0, n_loop=1,
        iters_per_loop=3, runs=2, sweep_axis="noise_level", sweep_values=(10.0, 30.0), horizon=1.0,
    )
    base.update(kw)
    return ExperimentConfig(name, **base)


def read(path):
    return path.read_bytes()


def test_outputs_and_parallel_equivalence(tmp_path):
    cfg = tiny("small")
    seq = run_experiment(cfg, tmp_path / "seq", parallel=1)
    par = run_experiment(cfg, tmp_path / "par", parallel=2)
    for method in cfg.methods:
        assert read(seq / f"aggregate_{method}.csv") == read(par / f"aggregate_{method}.csv")
    with open(seq / "aggregate_wmsindy.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sweep_value", "seed", "e_noise", "e_field", "e_forward", "e_param", "success"]
    assert len(rows) == 1 + 2 * 2
    assert not (seq / "failures.csv").exists()
    record = json.loads((seq / "runs" / "wmsindy_10_0.json").read_text())
    assert record["method"] == "wmsindy" and record["seed"] == 0
    assert {"component", "term", "value"} == set(record["coeffs"][0])
    assert len(record["noise_summary"]) == 3 and len(record["loop_trace"]) == 1
    ws = json.loads((seq / "runs" / "wsindy_10_0.json").read_text())
    assert "noise_summary" not in ws and ws["metrics"]["e_noise"] != ws["metrics"]["e_noise"]


def test_failing_cell_is_recorded(tmp_path):
    cfg = tiny("broken", methods=("wsindy",), sweep_axis="data_length", sweep_values=(400.0, 10**6), runs=1)
    root = run_experiment(cfg, tmp_path)
    with open(root / "failures.csv") as fh:
        failures = list(csv.DictReader(fh))
    assert len(failures) == 1 and failures[0]["sweep_value"] == "1000000"
    with open(root / "aggregate_wsindy.csv") as fh:
        assert len(list(csv.reader(fh))) == 2


def test_comparison_methods_share_noise(tmp_path):
    cfg = tiny("shared", methods=("msindy", "wmsindy"), sweep_values=(20.0,), runs=1)
    root = run_experiment(cfg, tmp_path)
    a = json.loads((root / "runs" / "msindy_20_0.json").read_text())
    b = json.loads((root / "runs" / "wmsindy_20_0.json").read_text())
    assert a["true_noise_summary"] == b["true_noise_summary"]


def test_emit_figure(tmp_path):
    cfg = tiny("fig", methods=("wsindy", "msindy"), runs=2)
    root = run_experiment(cfg, tmp_path)
    paths = emit_figure_data(root, "fig2")
    assert sorted(p.name for p in paths) == ["e_field.csv", "e_forward.csv", "e_noise.csv", "e_param.csv", "success.csv"]
    with open(root / "figure" / "success.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["noise_level", "method", "success_fraction"]
    with open(root / "figure" / "e_noise.csv") as fh:
        methods = {r["method"] for r in csv.DictReader(fh)}
    assert methods == {"msindy"}
    with open(root / "figure" / "e_param.csv") as fh:
        assert {r["method"] for r in csv.DictReader(fh)} == {"wsindy", "msindy"}
    (root / "aggregate_msindy.csv").unlink()
    with pytest.raises(FileNotFoundError, match="aggregate_msindy"):
        emit_figure_data(root, "fig2")


def test_identical_metrics_collapse_spread(tmp_path):
    cfg = tiny("flat", methods=("wsindy",), sweep_values=(0.0,), runs=3)
    root = run_experiment(cfg, tmp_path)
    emit_figure_data(root, "fig2")
    with open(root / "figure" / "e_param.csv") as fh:
        (row,) = list(csv.DictReader(fh))
    assert row["median"] == row["min"] == row["max"]


def test_cli_round_trip(tmp_path, monkeypatch):
    data = tmp_path / "lorenz.csv"
    assert main(["simulate", "--system", "lorenz", "--x0", "5", "5", "25", "--t", "6", "--out", str(data)]) == 0
    out = tmp_path / "ws.json"
    assert main(["identify", "--input", str(data), "--method", "wsindy", "--out", str(out)]) == 0
    result = json.loads(out.read_text())
    assert sum(r["value"] != 0 for r in result["coeffs"]) == 7
    cfg_file = tmp_path / "id.toml"
    cfg_file.write_text('method = "wmsindy"\nloops = 1\niters = 4\nq = 2\n')
    out2 = tmp_path / "wm.json"
    noise_out = tmp_path / "noise.csv"
    argv = ["identify", "--input", str(data), "--config", str(cfg_file), "--q", "1", "--out", str(out2), "--noise-out", str(noise_out)]
    assert main(argv) == 0
    result = json.loads(out2.read_text())
    assert result["settings"]["q"] == 1 and result["method"] == "wmsindy" and noise_out.exists()
    with pytest.raises(SystemExit):
        main(["identify", "--input", str(data), "--method", "msindy", "--variant", "wmsindy", "--out", str(out2)])

    overrides = tmp_path / "bench.toml"
    overrides.write_text("t_total = 6.0\niters_per_loop = 2\nn_loop = 1\nhorizon = 1.0\nseed = 3\n")
    monkeypatch.setenv("WMSINDY_SEED", "11")
    bench = tmp_path / "bench"
    assert main(["bench", "--preset", "fig2", "--out", str(bench), "--runs", "1", "--grid-step", "50", "--config", str(overrides)]) == 0
    with open(bench / "fig2" / "aggregate_wmsindy.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["sweep_value"], r["seed"]) for r in rows] == [("0", "11"), ("50", "11")]
    assert main(["emit-figure", "--from", str(bench), "--figure", "fig2"]) == 0
    assert (bench / "fig2" / "figure" / "success.csv").exists()

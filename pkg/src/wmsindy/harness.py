"""Experiment runner and command-line interface.

Each experiment simulates its ground truth once, then runs every
(method, sweep value, seed) cell: seeded noise, identification, metrics.
Per-run JSON goes to ``<out>/<name>/runs/``; one aggregate CSV per method
holds the metrics and is byte-for-byte reproducible for a fixed master
seed.  Wall-clock times live in separate timing CSVs for that reason.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dynamics import KnownModel, Trajectory, discrepancy_coefficients, get_system, simulate_truth
from .joint import JointConfig, IdentificationResult, run_identifier, run_nonzero_mean
from .library import LibrarySpec, build_library, coefficients_to_records
from .metrics import METRIC_NAMES, GroundTruth, compute_metrics
from .noise import NoiseSpec, generate_noise, histogram, summary
from .sparse import wsindy_identify

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

METHODS = ("wsindy", "msindy", "wmsindy", "msindy_no_ed", "wmsindy_no_er")
AXES = ("noise_level", "data_length", "lambda", "q", "n_loop", "none")
SEED_ENV = "WMSINDY_SEED"
DEFAULT_SEED = 0


def fmt(value) -> str:
    """17-significant-digit decimal; booleans as 0/1."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def master_seed(default: int = DEFAULT_SEED) -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else default


@dataclass
class ExperimentConfig:
    name: str
    system: str = "lorenz"
    methods: tuple[str, ...] = ("wsindy", "msindy", "wmsindy")
    x0: tuple[float, ...] | None = None
    t_total: float | None = None
    dt: float = 0.01
    max_degree: int | None = None
    include_constant: bool | None = None
    known_model: str | None = None
    noise_family: str = "gaussian"
    noise_mode: str = "standardized"
    noise_level: float = 40.0
    lam: float = 0.2
    q: int = 1
    n_loop: int = 6
    iters_per_loop: int = 5000
    learning_rate: float = 1e-3
    nonzero_mean_passes: int = 0
    sweep_axis: str = "none"
    sweep_values: tuple[float, ...] = (0.0,)
    runs: int = 10
    seed: int = DEFAULT_SEED
    horizon: float | None = 6.0
    horizon_fraction: float | None = None

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.sweep_values = tuple(self.sweep_values)
        if self.x0 is not None:
            self.x0 = tuple(float(v) for v in self.x0)
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown or missing methods {bad}; choose from {METHODS}")
        if self.sweep_axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ValueError("sweep grid is empty")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if (self.horizon is None) == (self.horizon_fraction is None):
            raise ValueError("set exactly one of horizon and horizon_fraction")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.runs)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# --- presets -------------------------------------------------------------------

NOISE_GRID = tuple(float(v) for v in range(0, 51, 5))
DATA_LENGTHS = tuple(float(v) for v in range(500, 2501, 250))
LAMBDA_GRID = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
Q_GRID = tuple(float(v) for v in range(1, 11))
LOOP_GRID = tuple(float(v) for v in range(1, 9))

# noise %, x0, run time, n_loop, lambda, q
TABLE2 = {
    "rossler": (40.0, (3.0, 5.0, 0.0), 25.0, 6, 0.08, 3),
    "lorenz96": (40.0, (1.0, 8.0, 8.0, 8.0, 8.0, 8.0), 25.0, 8, 0.2, 1),
    "vanderpol": (40.0, (-2.0, 1.0), 10.0, 8, 0.15, 1),
    "duffing": (40.0, (-2.0, 2.0), 25.0, 5, 0.05, 1),
    "cubic": (20.0, (0.0, 2.0), 25.0, 5, 0.08, 1),
    "lotka": (30.0, (1.0, 2.0), 10.0, 5, 0.2, 1),
}
TABLE2_HORIZON = {"lorenz96": 6.0}

FAMILY_FIGURES = {"fig16": "uniform", "fig17": "rayleigh", "fig18": "gamma", "fig19": "dweibull"}


def preset(name: str) -> list[ExperimentConfig]:
    """Experiment configs for a figure or table row; a figure with sub-panels yields several."""
    lorenz = dict(system="lorenz", x0=(5.0, 5.0, 25.0), t_total=25.0, noise_level=40.0, lam=0.2, q=1, n_loop=6, horizon=6.0)
    shifted = {**lorenz, "x0": (-5.0, 5.0, 25.0)}
    comparison = ("msindy", "wmsindy")
    if name == "fig2":
        return [ExperimentConfig("fig2", **lorenz, sweep_axis="noise_level", sweep_values=NOISE_GRID)]
    if name == "fig3":
        cfg = {**shifted, "q": 3, "horizon": None, "horizon_fraction": 0.24}
        return [ExperimentConfig("fig3", **cfg, sweep_axis="data_length", sweep_values=DATA_LENGTHS)]
    if name == "fig4":
        return [ExperimentConfig("fig4", **shifted, methods=comparison, sweep_axis="lambda", sweep_values=LAMBDA_GRID)]
    if name == "fig5":
        return [ExperimentConfig("fig5", **shifted, methods=comparison, sweep_axis="q", sweep_values=Q_GRID)]
    if name == "fig6":
        return [ExperimentConfig("fig6", **lorenz, methods=comparison, sweep_axis="n_loop", sweep_values=LOOP_GRID)]
    if name.startswith("table2:"):
        system = name.split(":", 1)[1]
        if system not in TABLE2:
            raise ValueError(f"no table-2 row for {system!r}; choose from {sorted(TABLE2)}")
        level, x0, t_total, n_loop, lam, q = TABLE2[system]
        horizon = TABLE2_HORIZON.get(system)
        return [
            ExperimentConfig(
                f"table2_{system}", system=system, methods=comparison, x0=x0, t_total=t_total, noise_level=level,
                n_loop=n_loop, lam=lam, q=q, horizon=horizon, horizon_fraction=None if horizon else 0.24,
            )
        ]
    if name == "fig13":
        common = dict(system="lorenz_modified", methods=comparison, x0=(5.0, 5.0, 25.0), t_total=30.0, noise_level=40.0, n_loop=5, lam=0.4, q=4, horizon=7.0)
        return [ExperimentConfig("fig13a", **common, known_model="lorenz_known"), ExperimentConfig("fig13b", **common)]
    if name == "fig14":
        return [ExperimentConfig("fig14", **{**lorenz, "n_loop": 8}, methods=("msindy", "msindy_no_ed", "wmsindy", "wmsindy_no_er"))]
    if name == "fig15":
        return [
            ExperimentConfig(
                "fig15", system="vanderpol", methods=comparison, x0=(-2.0, 1.0), t_total=10.0, noise_family="gamma",
                noise_mode="natural", noise_level=30.0, n_loop=8, lam=0.15, q=2, horizon=10.0, nonzero_mean_passes=3,
            )
        ]
    if name in FAMILY_FIGURES:
        return [ExperimentConfig(name, **lorenz, noise_family=FAMILY_FIGURES[name], sweep_axis="noise_level", sweep_values=NOISE_GRID)]
    raise ValueError(f"unknown preset {name!r}")


PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5", "fig6", *(f"table2:{s}" for s in TABLE2), "fig13", "fig14", "fig15", *FAMILY_FIGURES)


# --- one cell -------------------------------------------------------------------


@dataclass
class Cell:
    method: str
    sweep_value: float
    seed: int


@dataclass
class Problem:
    """Everything a cell needs that does not depend on the seed."""

    truth: Trajectory
    spec: LibrarySpec
    coeffs: np.ndarray
    known: KnownModel | None


def build_problem(cfg: ExperimentConfig) -> Problem:
    system = get_system(cfg.system)
    x0 = cfg.x0 if cfg.x0 is not None else system.x0
    t_total = cfg.t_total if cfg.t_total is not None else system.t_total
    degree = cfg.max_degree if cfg.max_degree is not None else system.max_degree
    constant = cfg.include_constant if cfg.include_constant is not None else system.include_constant
    spec = build_library(system.D, degree, constant)
    truth = simulate_truth(system, x0, t_total, cfg.dt)
    known = None
    coeffs = system.true_coefficients(spec)
    if cfg.known_model is not None:
        known = KnownModel.from_system(get_system(cfg.known_model))
        coeffs = discrepancy_coefficients(system, known, spec)
    return Problem(truth, spec, coeffs, known)


def _cell_settings(cfg: ExperimentConfig, value: float) -> ExperimentConfig:
    axis = cfg.sweep_axis
    if axis == "noise_level":
        return cfg.replace(noise_level=float(value))
    if axis == "lambda":
        return cfg.replace(lam=float(value))
    if axis == "q":
        return cfg.replace(q=int(value))
    if axis == "n_loop":
        return cfg.replace(n_loop=int(value))
    return cfg


def joint_config(cfg: ExperimentConfig, method: str, seed: int) -> JointConfig:
    return JointConfig(
        n_loop=cfg.n_loop, lam=cfg.lam, q=cfg.q, learning_rate=cfg.learning_rate,
        iters_per_loop=cfg.iters_per_loop, loss_variant=method, seed=seed,
    )


def run_cell(cfg: ExperimentConfig, problem: Problem, cell: Cell) -> dict:
    """Noise, identification and metrics for one cell; returns the run record."""
    local = _cell_settings(cfg, cell.sweep_value)
    states = problem.truth.states
    if cfg.sweep_axis == "data_length":
        n = int(cell.sweep_value)
        if not 2 < n <= states.shape[0]:
            raise ValueError(f"data length {n} outside the simulated record ({states.shape[0]} samples)")
        states = states[:n]
    noise_spec = NoiseSpec(family=local.noise_family, level_percent=local.noise_level, mode=local.noise_mode, seed=cell.seed)
    noise = generate_noise(noise_spec, states)
    data = Trajectory(problem.truth.t0, problem.truth.dt, states + noise)
    start = time.perf_counter()
    if cell.method == "wsindy":
        ws = wsindy_identify(data, problem.spec, known=problem.known)
        diagnostics = {"loop": 0, "testfns": [tf.diagnostics(d + 1) for d, tf in enumerate(ws.testfns)], "lambdas": ws.lambdas}
        result = IdentificationResult("wsindy", ws.coeffs, None, data.states, [diagnostics])
    else:
        jc = joint_config(local, cell.method, cell.seed)
        if local.nonzero_mean_passes > 0:
            result = run_nonzero_mean(data, problem.spec, jc, problem.known, local.nonzero_mean_passes)
        else:
            result = run_identifier(data, problem.spec, jc, problem.known)
    wall = time.perf_counter() - start
    horizon = local.horizon if local.horizon is not None else round(local.horizon_fraction * states.shape[0]) * cfg.dt
    truth = GroundTruth(states, noise, problem.coeffs, problem.spec, problem.known)
    metrics = compute_metrics(truth, result, horizon, cfg.dt)
    record = {
        "system": cfg.system,
        "config": local.to_dict(),
        "sweep_axis": cfg.sweep_axis,
        "sweep_value": cell.sweep_value,
        "seed": cell.seed,
        "metrics": metrics.to_dict(),
        "horizon": horizon,
        "noise_spec": noise_spec.to_dict(),
        **result_to_dict(result, problem.spec),
        "wall_time": wall,
    }
    if result.noise is not None:
        record["true_noise_summary"] = summary(noise)
    return record


def result_to_dict(result: IdentificationResult, spec: LibrarySpec) -> dict:
    out = {
        "method": result.method,
        "terms": spec.term_names,
        "coeffs": coefficients_to_records(spec, result.coeffs.xi),
        "active": result.coeffs.active.tolist(),
        "xi": result.coeffs.xi.tolist(),
        "loop_trace": result.loop_trace,
        "wall_time": result.wall_time,
        "empty_model": result.empty_model,
        **result.extra,
    }
    if result.noise is not None:
        out["noise_summary"] = summary(result.noise)
        out["noise_histogram"] = histogram(result.noise)
    return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, default=_json_default, allow_nan=True))


# --- experiment and sweep -----------------------------------------------------------


_WORKER: dict = {}


def _init_worker(cfg: ExperimentConfig, problem: Problem) -> None:
    _WORKER["cfg"] = cfg
    _WORKER["problem"] = problem


def _run_guarded(cell: Cell):
    try:
        return cell, run_cell(_WORKER["cfg"], _WORKER["problem"], cell), None
    except Exception as exc:  # a failed cell is recorded and the batch moves on
        return cell, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"


def cells_for(cfg: ExperimentConfig) -> list[Cell]:
    return [Cell(m, float(v), s) for m in cfg.methods for v in cfg.sweep_values for s in cfg.seeds]


AGGREGATE_HEADER = ["sweep_value", "seed", *METRIC_NAMES, "success"]


def run_experiment(cfg: ExperimentConfig, out_dir, parallel: int = 1) -> Path:
    """Run every cell of ``cfg`` and write results under ``out_dir/cfg.name``."""
    root = Path(out_dir) / cfg.name
    root.mkdir(parents=True, exist_ok=True)
    (root / "runs").mkdir(exist_ok=True)
    probe = root / ".write_probe"
    probe.write_text("")
    probe.unlink()
    write_json(root / "config.json", cfg.to_dict())
    problem = build_problem(cfg)
    cells = cells_for(cfg)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel, initializer=_init_worker, initargs=(cfg, problem)) as pool:
            outcomes = list(pool.map(_run_guarded, cells))
    else:
        _init_worker(cfg, problem)
        outcomes = []
        for cell in cells:
            log.info("%s: %s sweep=%g seed=%d", cfg.name, cell.method, cell.sweep_value, cell.seed)
            outcomes.append(_run_guarded(cell))
    rows: dict[str, list] = {m: [] for m in cfg.methods}
    timing: dict[str, list] = {m: [] for m in cfg.methods}
    failures = []
    for cell, record, error in outcomes:
        if error is not None:
            log.error("%s: cell %s failed: %s", cfg.name, cell, error.splitlines()[0])
            failures.append([cell.method, fmt(cell.sweep_value), fmt(cell.seed), error.splitlines()[0]])
            continue
        write_json(root / "runs" / f"{cell.method}_{fmt(cell.sweep_value)}_{cell.seed}.json", record)
        m = record["metrics"]
        rows[cell.method].append([fmt(cell.sweep_value), fmt(cell.seed), *(fmt(m[k]) for k in METRIC_NAMES), fmt(m["success"])])
        timing[cell.method].append([fmt(cell.sweep_value), fmt(cell.seed), fmt(record["wall_time"])])
    for method in cfg.methods:
        _write_rows(root / f"aggregate_{method}.csv", AGGREGATE_HEADER, sorted(rows[method], key=_row_key))
        _write_rows(root / f"timing_{method}.csv", ["sweep_value", "seed", "wall_time"], sorted(timing[method], key=_row_key))
    failure_file = root / "failures.csv"
    if failures:
        _write_rows(failure_file, ["method", "sweep_value", "seed", "error"], failures)
    elif failure_file.exists():
        failure_file.unlink()
    return root


def _row_key(row):
    return float(row[0]), int(row[1])


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def sweep(configs, out_dir, parallel: int = 1) -> list[Path]:
    configs = list(configs)
    if not configs:
        raise ValueError("nothing to run")
    return [run_experiment(cfg, out_dir, parallel) for cfg in configs]


# --- figure panels -------------------------------------------------------------------

NOISE_FREE_PANELS = ("e_noise", "e_forward")


def _read_aggregate(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_figure_data(from_dir, figure: str) -> list[Path]:
    """Per-panel CSVs (median/min/max per sweep value and method, plus success fraction)."""
    base = Path(from_dir)
    names = [cfg.name for cfg in preset(figure)] if not (base / "config.json").exists() else [None]
    written = []
    for name in names:
        root = base / name if name is not None else base
        config_path = root / "config.json"
        if not config_path.exists():
            raise FileNotFoundError(f"missing experiment config {config_path}")
        cfg = json.loads(config_path.read_text())
        axis = cfg["sweep_axis"]
        out = root / "figure"
        out.mkdir(exist_ok=True)
        data = {}
        for method in cfg["methods"]:
            path = root / f"aggregate_{method}.csv"
            if not path.exists():
                raise FileNotFoundError(f"missing aggregate {path}")
            data[method] = _read_aggregate(path)
        for metric in METRIC_NAMES:
            rows = []
            for method, records in data.items():
                if method == "wsindy" and metric in NOISE_FREE_PANELS:
                    continue
                for value, group in _group(records):
                    vals = np.array([float(r[metric]) for r in group])
                    rows.append([fmt(value), method, fmt(np.median(vals)), fmt(vals.min()), fmt(vals.max())])
            path = out / f"{metric}.csv"
            _write_rows(path, [axis, "method", "median", "min", "max"], rows)
            written.append(path)
        rows = []
        for method, records in data.items():
            for value, group in _group(records):
                rows.append([fmt(value), method, fmt(sum(int(r["success"]) for r in group) / len(group))])
        path = out / "success.csv"
        _write_rows(path, [axis, "method", "success_fraction"], rows)
        written.append(path)
    return written


def _group(records):
    values = sorted({float(r["sweep_value"]) for r in records})
    for v in values:
        yield v, [r for r in records if float(r["sweep_value"]) == v]


# --- CLI ---------------------------------------------------------------------------------


def load_config_file(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _cmd_simulate(args) -> int:
    system = get_system(args.system)
    x0 = args.x0 if args.x0 else system.x0
    t_total = args.t if args.t is not None else system.t_total
    traj = simulate_truth(system, x0, t_total, args.dt)
    traj.to_csv(args.out)
    log.info("wrote %d samples to %s", traj.N, args.out)
    return 0


def _cmd_identify(args) -> int:
    settings = load_config_file(args.config) if args.config else {}
    for key in ("method", "lam", "q", "loops", "variant", "known_model", "degree", "constant", "iters", "system", "nonzero_mean"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    data = Trajectory.from_csv(args.input)
    method = settings.get("method", "wmsindy")
    variant = settings.get("variant") or method
    if method == "wsindy":
        variant = "wsindy"
    elif (method == "wmsindy") != variant.startswith("wmsindy"):
        raise SystemExit(f"variant {variant!r} does not belong to method {method!r}")
    degree = settings.get("degree")
    constant = settings.get("constant")
    if "system" in settings:
        system = get_system(settings["system"])
        degree = degree if degree is not None else system.max_degree
        constant = constant if constant is not None else system.include_constant
    spec = build_library(data.D, degree if degree is not None else 2, bool(constant))
    known = KnownModel.from_system(get_system(settings["known_model"])) if settings.get("known_model") else None
    lam = float(settings.get("lam", 0.2))
    if variant == "wsindy":
        ws = wsindy_identify(data, spec, lam=settings.get("lam"), known=known)
        result = IdentificationResult("wsindy", ws.coeffs, None, data.states, [{"loop": 0, "lambdas": ws.lambdas}])
    else:
        jc = JointConfig(
            n_loop=int(settings.get("loops", 6)), lam=lam, q=int(settings.get("q", 1)), loss_variant=variant,
            iters_per_loop=int(settings.get("iters", 5000)), seed=master_seed(),
        )
        passes = int(settings.get("nonzero_mean", 0))
        result = run_nonzero_mean(data, spec, jc, known, passes) if passes > 0 else run_identifier(data, spec, jc, known)
    payload = {"settings": settings, **result_to_dict(result, spec)}
    write_json(Path(args.out), payload)
    if args.noise_out and result.noise is not None:
        Trajectory(data.t0, data.dt, result.noise).to_csv(args.noise_out)
    return 0


def _cmd_bench(args) -> int:
    configs = preset(args.preset)
    overrides = load_config_file(args.config) if args.config else {}
    overrides["seed"] = master_seed(int(overrides.get("seed", DEFAULT_SEED)))
    out = []
    for cfg in configs:
        cfg = cfg.replace(**overrides)
        if args.runs is not None:
            cfg = cfg.replace(runs=args.runs)
        if args.iters is not None:
            cfg = cfg.replace(iters_per_loop=args.iters)
        if args.grid_step is not None:
            if cfg.sweep_axis != "noise_level":
                log.warning("--grid-step only coarsens noise grids; ignored for %s", cfg.name)
            else:
                hi = max(cfg.sweep_values)
                cfg = cfg.replace(sweep_values=tuple(float(v) for v in np.arange(0.0, hi + 1e-9, args.grid_step)))
        out.append(cfg)
    sweep(out, args.out, args.parallel)
    return 0


def _cmd_emit(args) -> int:
    for path in emit_figure_data(args.from_dir, args.figure):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wmsindy", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a preset system and write t,x1..xD CSV")
    p.add_argument("--system", required=True)
    p.add_argument("--x0", type=float, nargs="+")
    p.add_argument("--t", type=float)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("identify", help="identify a model from a CSV trajectory")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("wsindy", "msindy", "wmsindy"))
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--loops", type=int)
    p.add_argument("--iters", type=int, help="Adam iterations per loop")
    p.add_argument("--variant", choices=("wmsindy", "wmsindy_no_er", "msindy", "msindy_no_ed"))
    p.add_argument("--known-model", dest="known_model")
    p.add_argument("--system", help="take the library degree and constant term from this preset")
    p.add_argument("--degree", type=int)
    p.add_argument("--constant", action="store_const", const=True)
    p.add_argument("--nonzero-mean", dest="nonzero_mean", type=int, help="passes of noise-mean removal")
    p.add_argument("--config", help="TOML file with the same keys; flags win")
    p.add_argument("--noise-out", dest="noise_out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("bench", help="run a preset experiment")
    p.add_argument("--preset", required=True, choices=PRESET_NAMES)
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--iters", type=int, help="Adam iterations per loop")
    p.add_argument("--config", help="TOML file overriding preset fields")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("emit-figure", help="write per-panel CSVs from bench output")
    p.add_argument("--from", dest="from_dir", required=True)
    p.add_argument("--figure", required=True)
    p.set_defaults(func=_cmd_emit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

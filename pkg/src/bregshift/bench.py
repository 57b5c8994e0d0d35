"""Replicated experiments, aggregation and the summary CSV.

Each experiment expands into (cell, replication) tasks. Every task gets its
own seed, ``base_seed XOR hash(experiment, scenario, n, replication)``, so a
cell's numbers do not depend on execution order or worker count. Failed
replications are logged and left out of the aggregate.
"""
from __future__ import annotations

import csv
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .bregman import BregmanKind
from .core import RngStream, sample_gaussian, summary
from .dre import DreConfig, eval_ratio, fit_ratio
from .flow import (FlowTrainConfig, GaussianOracle, OdeConfig, ZeroVelocity, fit_velocity,
                   gaussian_toy, sample_ode, w2_empirical_1d)
from .scenarios import GammaShiftSpec, gen_gamma_shift
from .shift import DEFAULT_GRID, ShiftConfig, replicate

log = logging.getLogger(__name__)

EXPERIMENTS = ("dre", "shift", "flow")
DEFAULT_SIZES = {
    "dre": (200, 500, 1000, 1500, 2000, 3000),
    "shift": (500, 1000, 1500, 2000, 2500, 3000),
    "flow": (500, 2000, 5000),
}
FAILURE_THRESHOLD = 0.10
CSV_HEADER = ["experiment", "scenario", "n", "metric", "mean", "std", "reps"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "dre"
    d: tuple = (1,)
    nu: tuple = (0.1,)
    sigma: float = 0.5
    sample_sizes: tuple = ()
    replications: int = 20
    base_seed: int = 0
    output_path: str = "results.csv"
    loss: str = "ls"
    parallel: int = 1
    # overrides; None keeps each module's default
    iterations: Optional[int] = None
    learning_rate: Optional[float] = None
    batch_size: Optional[int] = None
    width: Optional[int] = None
    kappa: Optional[float] = None
    n_test: int = 1000
    n12: int = 500
    grid: tuple = DEFAULT_GRID
    ode_steps: int = 100
    integrator: str = "rk4"
    n_gen: int = 2000
    x_grid: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.sample_sizes:
            self.sample_sizes = DEFAULT_SIZES[self.experiment]
        self.sample_sizes = tuple(int(n) for n in self.sample_sizes)
        if min(self.sample_sizes) < 1:
            raise ConfigError("sample sizes must be positive")
        if self.experiment == "dre" and min(self.sample_sizes) < 3:
            raise ConfigError("density-ratio sample sizes must be >= 3")
        try:
            BregmanKind.parse(self.loss)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        if not self.grid:
            raise ConfigError("iteration grid must be nonempty")

    def scenarios(self) -> list:
        if self.experiment == "dre":
            return [f"d={int(d)}" for d in self.d]
        if self.experiment == "shift":
            return [f"nu={float(v):g}" for v in self.nu]
        return [f"sigma={self.sigma:g}"]


_LIST_KEYS = {"d": int, "nu": float, "sample_sizes": int, "grid": int, "x_grid": float}
_ALIASES = {"sizes": "sample_sizes", "reps": "replications", "seed": "base_seed",
            "out": "output_path", "experiment": "experiment"}


def _coerce(key: str, raw: str):
    kinds = {f.name: f for f in fields(ExperimentConfig)}
    if key not in kinds:
        raise ConfigError(f"unknown config key {key!r}")
    raw = str(raw).strip()
    if key in _LIST_KEYS:
        try:
            return tuple(_LIST_KEYS[key](v) for v in raw.replace(";", ",").split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"bad list for {key}: {raw!r}") from None
    default = kinds[key].default
    if raw.lower() in ("none", ""):
        return None
    try:
        if key in ("iterations", "batch_size", "width", "replications", "base_seed", "parallel",
                   "n_test", "n12", "ode_steps", "n_gen"):
            return int(raw)
        if key in ("learning_rate", "kappa", "sigma"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw if default is None or isinstance(default, str) else type(default)(raw)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        key = _ALIASES.get(key, key)
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, **overrides) -> ExperimentConfig:
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({_ALIASES.get(k, k): v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    scenario: str
    n: int
    metric: str
    mean: float
    std: float
    reps: int


@dataclass
class RunResult:
    rows: list
    failures: list = field(default_factory=list)
    total: int = 0

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / self.total if self.total else 0.0

    @property
    def partial_failure(self) -> bool:
        return self.failure_rate > FAILURE_THRESHOLD


def replication_seed(base_seed: int, experiment: str, scenario: str, n: int, rep: int) -> int:
    h = hashlib.blake2b(repr((experiment, scenario, int(n), int(rep))).encode(), digest_size=8)
    return (int(base_seed) ^ int.from_bytes(h.digest(), "little")) & 0xFFFFFFFFFFFFFFFF


def _sub(seed: int, label: str) -> int:
    h = hashlib.blake2b(repr((int(seed), label)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


# --- per-replication workers (module level so they pickle) -------------------

def _dre_task(cfg: ExperimentConfig, d: int, n: int, seed: int) -> dict:
    spec = GammaShiftSpec(d)
    sample = gen_gamma_shift(spec, n, n, RngStream(_sub(seed, "data")))
    kw = {k: getattr(cfg, k) for k in ("iterations", "learning_rate", "batch_size", "width", "kappa")
          if getattr(cfg, k) is not None}
    model = fit_ratio(sample, DreConfig(kind=cfg.loss, n=n, seed=_sub(seed, "fit"), **kw))
    return eval_ratio(model, spec, cfg.n_test, RngStream(_sub(seed, "test")))


def _shift_task(cfg: ExperimentConfig, nu: float, n: int, seed: int) -> dict:
    kw = {k: getattr(cfg, k) for k in ("learning_rate", "batch_size", "width", "kappa")
          if getattr(cfg, k) is not None}
    scfg = ShiftConfig(nu=nu, n11=n, n12=cfg.n12, iteration_grid=cfg.grid, n_test=cfg.n_test,
                       seed=seed, **kw)
    return replicate(scfg).as_dict()


def _flow_w2(model, cfg: ExperimentConfig, seed: int, tag: str) -> float:
    ode = OdeConfig(cfg.ode_steps, cfg.integrator)
    vals = []
    for i, x in enumerate(cfg.x_grid):
        gen = sample_ode(model, [x], cfg.n_gen, ode, RngStream(_sub(seed, f"{tag}-gen-{i}")))
        ref = x + cfg.sigma * sample_gaussian(RngStream(_sub(seed, f"ref-{i}")), cfg.n_gen, 1)
        vals.append(w2_empirical_1d(gen, ref))
    return float(np.mean(vals))


def _flow_task(cfg: ExperimentConfig, sigma: float, n: int, seed: int) -> dict:
    X, Y = gaussian_toy(n, RngStream(_sub(seed, "data")), sigma)
    kw = {k: getattr(cfg, k) for k in ("iterations", "learning_rate", "batch_size", "width", "kappa")
          if getattr(cfg, k) is not None}
    model = fit_velocity(X, Y, cfg=FlowTrainConfig(seed=_sub(seed, "fit"), **kw))
    oracle = GaussianOracle(lambda x: x[:, 0], sigma)
    return {
        "w2_learned": _flow_w2(model, cfg, seed, "learned"),
        "w2_oracle": _flow_w2(oracle, cfg, seed, "oracle"),
        "w2_noise": _flow_w2(ZeroVelocity(), cfg, seed, "noise"),
    }


def _task_list(cfg: ExperimentConfig) -> list:
    tasks = []
    if cfg.experiment == "dre":
        params = [(s, int(d)) for s, d in zip(cfg.scenarios(), cfg.d)]
    elif cfg.experiment == "shift":
        params = [(s, float(v)) for s, v in zip(cfg.scenarios(), cfg.nu)]
    else:
        params = [(cfg.scenarios()[0], cfg.sigma)]
    for scenario, p in params:
        for n in cfg.sample_sizes:
            for rep in range(cfg.replications):
                seed = replication_seed(cfg.base_seed, cfg.experiment, scenario, n, rep)
                tasks.append((scenario, p, n, rep, seed))
    return tasks


_WORKERS = {"dre": _dre_task, "shift": _shift_task, "flow": _flow_task}


def _run_one(args):
    cfg, scenario, p, n, rep, seed = args
    try:
        return _WORKERS[cfg.experiment](cfg, p, n, seed), None
    except Exception as exc:  # one bad replication must not sink the cell
        return None, f"{cfg.experiment} {scenario} n={n} rep={rep}: {type(exc).__name__}: {exc}"


def _aggregate(cfg: ExperimentConfig, tasks: list, outcomes: list) -> RunResult:
    cells = {}
    failures = []
    for (scenario, _p, n, rep, _seed), (metrics, err) in zip(tasks, outcomes):
        if err is not None:
            log.warning("replication failed: %s", err)
            failures.append(err)
            continue
        cell = cells.setdefault((scenario, n), {})
        for name, value in metrics.items():
            cell.setdefault(name, []).append((rep, float(value)))
    rows = []
    for (scenario, n), metrics in cells.items():
        for name, pairs in metrics.items():
            values = [v for _, v in sorted(pairs)]
            if len(values) == 1:
                log.warning("%s %s n=%d %s: single replication, std reported as 0",
                            cfg.experiment, scenario, n, name)
                mean, std = values[0], 0.0
            else:
                s = summary(values)
                mean, std = s["mean"], s["std"]
            rows.append(SummaryRow(cfg.experiment, scenario, n, name, mean, std, len(values)))
    return RunResult(sort_rows(rows), failures, len(tasks))


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    tasks = _task_list(cfg)
    jobs = [(cfg, *t) for t in tasks]
    if cfg.parallel > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallel) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=1))
    else:
        outcomes = [_run_one(j) for j in jobs]
    return _aggregate(cfg, tasks, outcomes)


def _run_as(cfg: ExperimentConfig, experiment: str) -> RunResult:
    if cfg.experiment != experiment:
        cfg = replace(cfg, experiment=experiment, sample_sizes=())
    return run_experiment(cfg)


def run_dre(cfg: ExperimentConfig) -> RunResult:
    """Source and target MSE of the fitted ratio per (d, n) cell."""
    return _run_as(cfg, "dre")


def run_shift(cfg: ExperimentConfig) -> RunResult:
    """SERS / SERT / EDRC / ODRC risks per (nu, n11) cell."""
    return _run_as(cfg, "shift")


def run_flow(cfg: ExperimentConfig) -> RunResult:
    """W2 of learned, exact-oracle and no-flow samplers per training size."""
    return _run_as(cfg, "flow")


def sort_rows(rows) -> list:
    return sorted(rows, key=lambda r: (r.scenario, r.n, r.metric))


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    return f"{x:.6g}"


def write_csv(rows, path) -> None:
    """Summary CSV: header, rows sorted by (scenario, n, metric), 6 significant digits."""
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in sort_rows(rows):
                w.writerow([r.experiment, r.scenario, r.n, r.metric, _fmt(r.mean), _fmt(r.std), r.reps])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [SummaryRow(r["experiment"], r["scenario"], int(r["n"]), r["metric"],
                           float(r["mean"]), float(r["std"]), int(r["reps"])) for r in reader]


def rounded(row: SummaryRow) -> SummaryRow:
    """The row as it reads back from CSV."""
    return replace(row, mean=float(_fmt(row.mean)), std=float(_fmt(row.std)))


def full_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg, replications=100)


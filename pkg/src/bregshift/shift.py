"""Regression under covariate shift: source-only fit versus ratio-corrected fits.

Three estimators are compared on the d=5 Gamma scenario:

* source: plain least squares on the labelled source sample;
* EDRC: least squares weighted by an estimated density ratio (LS objective);
* ODRC: least squares weighted by the true density ratio.

All three choose their iteration count from a grid by a single 80/20
hold-out split of the labelled source data, then refit on all of it.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bregman import BregmanKind, weighted_sq_loss, weighted_sq_loss_grad
from .core import RngStream
from .dre import DreConfig, fit_ratio, ratio_values
from .nn import AdamConfig, EpochBatcher, MlpModel, MlpSpec, hidden_layers_for, log_bound, train
from .scenarios import (SOURCE, TARGET, DomainSample, RegressionData, RegressionSpec,
                        gen_domain, gen_regression, true_ratio)

DEFAULT_GRID = (1000, 2000, 3000, 4000, 5000)


@dataclass(frozen=True)
class ShiftConfig:
    nu: float = 0.1
    n11: int = 500
    n12: int = 500
    iteration_grid: tuple = DEFAULT_GRID
    learning_rate: float = 1e-3
    width: int = 64
    kappa: float = 0.5
    batch_size: int = 100
    adam_epsilon: float = 1e-8
    holdout: float = 0.2
    n_test: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "iteration_grid", tuple(int(g) for g in self.iteration_grid))
        if self.n12 < 1:
            raise ValueError("n12 must be >= 1")
        if not self.iteration_grid:
            raise ValueError("iteration grid must be nonempty")
        if min(self.iteration_grid) < 1:
            raise ValueError("grid entries must be >= 1")


@dataclass
class RiskReport:
    sers: float
    sert: float
    edrc: float
    odrc: float

    def as_dict(self) -> dict:
        return {"sers": self.sers, "sert": self.sert, "edrc": self.edrc, "odrc": self.odrc}


def derive_seed(seed: int, *labels) -> int:
    h = hashlib.blake2b(repr((int(seed),) + labels).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def regression_spec(n: int, cfg: ShiftConfig, output_dim: int = 2, input_dim: int = 5) -> MlpSpec:
    bound = log_bound(n, cfg.kappa)
    return MlpSpec(input_dim, (cfg.width,) * hidden_layers_for(n), output_dim, -bound, bound)


def train_regression(data: RegressionData, weights, iterations: int, cfg: ShiftConfig, seed: int,
                     n_schedule: Optional[int] = None, callback: Optional[Callable] = None) -> MlpModel:
    """Adam on the (weighted) squared loss for exactly ``iterations`` steps."""
    n = data.n
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{w.shape[0]} weights for {n} samples")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if not np.any(w > 0):
        raise ValueError("all weights are zero")
    spec = regression_spec(n_schedule or n, cfg, data.Y.shape[1], data.X.shape[1])
    rng = RngStream(seed)
    model = MlpModel.create(spec, rng.child(1))
    batcher = EpochBatcher(n, cfg.batch_size, rng.child(2))
    X = np.ascontiguousarray(data.X)

    def make_batch(_step):
        idx = batcher.next()
        Y, wb = data.Y[idx], w[idx]
        return X[idx], lambda out: weighted_sq_loss_grad(out, Y, wb)

    train(model, iterations, make_batch, AdamConfig(cfg.learning_rate, epsilon=cfg.adam_epsilon), callback)
    return model


def holdout_split(n: int, fraction: float, rng: RngStream):
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * fraction)))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def validation_curve(data: RegressionData, grid: Sequence[int], cfg: ShiftConfig, seed: int,
                     weights=None) -> dict:
    """Held-out (weighted) squared error after each grid iteration count.

    One training run up to ``max(grid)`` is checkpointed at every grid value;
    a run stopped at ``k`` steps is exactly the first ``k`` steps of it.
    """
    rng = RngStream(seed)
    tr, va = holdout_split(data.n, cfg.holdout, rng)
    w = np.ones(data.n) if weights is None else np.asarray(weights, dtype=np.float64)
    val = data.subset(va)
    marks = set(int(g) for g in grid)
    curve = {}

    def record(step, model):
        if step in marks:
            curve[step] = weighted_sq_loss(model(val.X), val.Y, w[va])

    train_regression(data.subset(tr), w[tr], max(marks), cfg, derive_seed(seed, "fit"),
                     n_schedule=data.n, callback=record)
    return curve


def best_iteration(curve: dict) -> int:
    """Grid value with the smallest validation error; ties go to fewer steps."""
    if not curve:
        raise ValueError("empty validation curve")
    return min(sorted(curve), key=lambda k: curve[k])


def cross_validate_iters(data: RegressionData, grid: Sequence[int], cfg: ShiftConfig, seed: int,
                         weights=None) -> int:
    grid = [int(g) for g in grid]
    if not grid:
        raise ValueError("iteration grid must be nonempty")
    if len(set(grid)) == 1:
        return grid[0]
    if data.n < 10:
        raise ValueError(f"cross validation needs at least 10 samples, got {data.n}")
    return best_iteration(validation_curve(data, grid, cfg, seed, weights))


def fit_corrected(data: RegressionData, weights, cfg: ShiftConfig, seed: Optional[int] = None) -> MlpModel:
    """Importance-weighted least squares with cross-validated iteration count."""
    seed = cfg.seed if seed is None else seed
    w = np.asarray(weights, dtype=np.float64) if weights is not None else None
    if w is not None:
        if w.shape != (data.n,):
            raise ValueError(f"{w.shape} weights for {data.n} samples")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if not np.any(w > 0):
            raise ValueError("all weights are zero")
    iters = cross_validate_iters(data, cfg.iteration_grid, cfg, derive_seed(seed, "cv"), w)
    model = train_regression(data, w, iters, cfg, derive_seed(seed, "final"))
    model.iterations = iters
    return model


def fit_source(data: RegressionData, cfg: ShiftConfig, seed: Optional[int] = None) -> MlpModel:
    """Unweighted least squares on source data; unit weights in :func:`fit_corrected`."""
    if data.X.shape[1] != 5 or data.Y.shape[1] != 2:
        raise ValueError("source regression expects 5 covariates and 2 responses")
    return fit_corrected(data, np.ones(data.n), cfg, seed)


def _mse_to_truth(model, X, F) -> float:
    return float(np.mean((np.asarray(model(X)) - F) ** 2))


def eval_risks(source_model, edrc_model, odrc_model, test_source: RegressionData,
               test_target: RegressionData) -> RiskReport:
    """Mean squared error to f0(X) over every test row and response component."""
    return RiskReport(
        sers=_mse_to_truth(source_model, test_source.X, test_source.F),
        sert=_mse_to_truth(source_model, test_target.X, test_target.F),
        edrc=_mse_to_truth(edrc_model, test_target.X, test_target.F),
        odrc=_mse_to_truth(odrc_model, test_target.X, test_target.F),
    )


def ratio_config(cfg: ShiftConfig, seed: int) -> DreConfig:
    return DreConfig(kind=BregmanKind.LS, kappa=cfg.kappa, width=cfg.width, seed=seed)


def replicate(cfg: ShiftConfig) -> RiskReport:
    """One full replication: data, ratio fit, three regressions, risks."""
    spec = RegressionSpec(cfg.nu)
    rng = RngStream(cfg.seed)
    train_data = gen_regression(spec, cfg.n11, SOURCE, rng.child(1))
    target_X = gen_domain(spec.covariates, cfg.n12, TARGET, rng.child(2))
    test_s = gen_regression(RegressionSpec(0.0), cfg.n_test, SOURCE, rng.child(3))
    test_t = gen_regression(RegressionSpec(0.0), cfg.n_test, TARGET, rng.child(4))

    ratio_model = fit_ratio(DomainSample(train_data.X, target_X),
                            ratio_config(cfg, derive_seed(cfg.seed, "ratio")))
    w_est = ratio_values(ratio_model, train_data.X)
    w_true = true_ratio(spec.covariates, train_data.X)

    src = fit_source(train_data, cfg, derive_seed(cfg.seed, "source"))
    edrc = fit_corrected(train_data, w_est, cfg, derive_seed(cfg.seed, "edrc"))
    odrc = fit_corrected(train_data, w_true, cfg, derive_seed(cfg.seed, "odrc"))
    return eval_risks(src, edrc, odrc, test_s, test_t)

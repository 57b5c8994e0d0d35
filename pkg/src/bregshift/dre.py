"""Density-ratio estimation with truncated MLPs under a Bregman objective.

The network has ``max(1, floor(ln(n) / 2))`` hidden layers and its output is
clamped to ``[0, (ln n)^(1+kappa)]`` for the least-squares objective or to
``[(ln n)^(-1-kappa), (ln n)^(1+kappa)]`` for the logistic one. Every Adam
step sees one source batch and one target batch of equal size.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .bregman import BregmanKind, objective_grad
from .core import RngStream
from .nn import AdamConfig, EpochBatcher, MlpModel, MlpSpec, hidden_layers_for, log_bound, train
from .scenarios import SOURCE, TARGET, DomainSample, GammaShiftSpec, gen_domain, true_ratio

DEFAULT_ITERATIONS = {1: 1000, 2: 2000, 5: 5000}


def default_iterations(d: int) -> int:
    return DEFAULT_ITERATIONS.get(d, 1000 if d < 2 else 2000 if d < 5 else 5000)


@dataclass(frozen=True)
class DreConfig:
    kind: BregmanKind = BregmanKind.LS
    n: Optional[int] = None  # per-domain size driving the schedules; defaults to the smaller sample
    kappa: float = 0.5
    width: int = 64
    iterations: Optional[int] = None  # None: 1000 / 2000 / 5000 for d = 1 / 2 / 5
    batch_size: int = 100
    learning_rate: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", BregmanKind.parse(self.kind))
        if not 0 < self.kappa <= 1:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("iterations must be >= 0")


def ratio_bounds(kind, n: int, kappa: float) -> tuple:
    hi = log_bound(n, kappa)
    lo = 0.0 if BregmanKind.parse(kind) is BregmanKind.LS else 1.0 / hi
    return lo, hi


def build_ratio_net(cfg: DreConfig, d: int, n: Optional[int] = None) -> MlpSpec:
    n = cfg.n if n is None else n
    if n is None or n < 3:
        raise ValueError(f"ratio network schedules need n >= 3, got {n}")
    lo, hi = ratio_bounds(cfg.kind, n, cfg.kappa)
    return MlpSpec(d, (cfg.width,) * hidden_layers_for(n), 1, lo, hi)


def fit_ratio(sample: DomainSample, cfg: DreConfig, callback: Optional[Callable] = None) -> MlpModel:
    Xs = np.ascontiguousarray(sample.source_X, dtype=np.float64)
    Xt = np.ascontiguousarray(sample.target_X, dtype=np.float64)
    n = cfg.n if cfg.n is not None else min(Xs.shape[0], Xt.shape[0])
    iterations = default_iterations(sample.d) if cfg.iterations is None else cfg.iterations
    spec = build_ratio_net(cfg, sample.d, n)
    rng = RngStream(cfg.seed)
    model = MlpModel.create(spec, rng.child(1))
    # start from r = 1 (no shift) so the clamp does not swallow every initial gradient
    model.params.weights[-1][:] = 0.0
    model.params.biases[-1][:] = 1.0
    bs = EpochBatcher(Xs.shape[0], cfg.batch_size, rng.child(2))
    bt = EpochBatcher(Xt.shape[0], cfg.batch_size, rng.child(3))
    grad_fn = objective_grad(cfg.kind)

    def make_batch(_step):
        i_s = bs.next()
        i_t = bt.next()
        ns = i_s.size

        def loss_fn(out):
            value, g_s, g_t = grad_fn(out[:ns, 0], out[ns:, 0])
            return value, np.concatenate([g_s, g_t]).reshape(-1, 1)

        return np.vstack([Xs[i_s], Xt[i_t]]), loss_fn

    train(model, iterations, make_batch, AdamConfig(cfg.learning_rate), callback)
    return model


def ratio_values(model, X) -> np.ndarray:
    """Model output as a flat vector (accepts models returning n x 1)."""
    return np.asarray(model(X), dtype=np.float64).reshape(-1)


def eval_ratio(model, spec: GammaShiftSpec, n_test: int, rng: RngStream) -> dict:
    """MSE to the true ratio on fresh source and target draws."""
    out = {}
    for domain in (SOURCE, TARGET):
        X = gen_domain(spec, n_test, domain, rng)
        err = ratio_values(model, X) - true_ratio(spec, X)
        out[f"{domain}_mse"] = float(np.mean(err**2))
    return out


def with_defaults_for(cfg: DreConfig, d: int) -> DreConfig:
    if cfg.iterations is None:
        return replace(cfg, iterations=default_iterations(d))
    return cfg

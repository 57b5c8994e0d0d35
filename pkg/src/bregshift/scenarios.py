"""Synthetic covariate-shift scenarios with closed-form ground truth.

Gamma shift: source coordinate ``j`` (1-based) follows Gamma(j, rate 2) and
the target coordinate Gamma(j + 1, rate 2), all independent. The density
ratio is then ``2**d / d! * prod(x)``.

Regression: ``Y = f0(X) + nu * (W, -W)`` with ``X`` from the d=5 Gamma
scenario and ``W`` standard normal.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import RngStream, sample_gamma, sample_gaussian

SOURCE = "source"
TARGET = "target"
GAMMA_RATE = 2.0


@dataclass(frozen=True)
class GammaShiftSpec:
    d: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")

    def shapes(self, domain: str) -> list:
        offset = {SOURCE: 0, TARGET: 1}[domain]
        return [j + offset for j in range(1, self.d + 1)]


@dataclass
class DomainSample:
    source_X: np.ndarray
    target_X: np.ndarray
    source_Y: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.source_X.shape[1] != self.target_X.shape[1]:
            raise ValueError(
                f"source has {self.source_X.shape[1]} columns, target {self.target_X.shape[1]}"
            )
        if self.source_Y is not None and self.source_Y.shape[0] != self.source_X.shape[0]:
            raise ValueError("source_Y rows must match source_X rows")

    @property
    def d(self) -> int:
        return self.source_X.shape[1]


def true_ratio(spec: GammaShiftSpec, x) -> np.ndarray | float:
    """Target-over-source density ratio ``2**d / d! * prod_j x_j``."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 1
    X = x.reshape(1, -1) if scalar else x
    if X.shape[1] != spec.d:
        raise ValueError(f"expected {spec.d} coordinates, got {X.shape[1]}")
    if np.any(X <= 0):
        raise ValueError("density ratio needs strictly positive coordinates")
    r = 2.0**spec.d / math.factorial(spec.d) * np.prod(X, axis=1)
    return float(r[0]) if scalar else r


def gen_domain(spec: GammaShiftSpec, n: int, domain: str, rng: RngStream) -> np.ndarray:
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    cols = [sample_gamma(rng, a, GAMMA_RATE, n) for a in spec.shapes(domain)]
    return np.column_stack(cols)


def gen_gamma_shift(spec: GammaShiftSpec, n_source: int, n_target: int, rng: RngStream) -> DomainSample:
    return DomainSample(gen_domain(spec, n_source, SOURCE, rng), gen_domain(spec, n_target, TARGET, rng))


def f0(x) -> np.ndarray:
    """Conditional mean: ``(sin(pi (x1 - x2)) log(1 + x3^2), exp(-x2) 1(x4 > 2))``."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 1
    X = x.reshape(1, -1) if scalar else x
    if X.shape[1] != 5:
        raise ValueError(f"f0 takes 5 coordinates, got {X.shape[1]}")
    out = np.empty((X.shape[0], 2))
    out[:, 0] = np.sin(np.pi * (X[:, 0] - X[:, 1])) * np.log1p(X[:, 2] ** 2)
    out[:, 1] = np.exp(-X[:, 1]) * (X[:, 3] > 2.0)
    return out[0] if scalar else out


@dataclass(frozen=True)
class RegressionSpec:
    # nu = 0 is accepted so the noiseless model can be checked directly
    nu: float = 0.1
    d: int = 5

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"noise level must be >= 0, got {self.nu}")
        if self.d != 5:
            raise ValueError("the regression model is defined for d = 5")

    @property
    def covariates(self) -> GammaShiftSpec:
        return GammaShiftSpec(self.d)


@dataclass
class RegressionData:
    X: np.ndarray
    Y: np.ndarray
    F: np.ndarray  # noiseless f0(X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "RegressionData":
        return RegressionData(self.X[idx], self.Y[idx], self.F[idx])


def gen_regression(spec: RegressionSpec, n: int, domain: str, rng: RngStream) -> RegressionData:
    X = gen_domain(spec.covariates, n, domain, rng)
    F = f0(X)
    W = sample_gaussian(rng, n, 1)[:, 0]
    Y = F + spec.nu * np.column_stack([W, -W])
    return RegressionData(X, Y, F)


def write_dataset(sample: DomainSample, path) -> None:
    """CSV with header ``domain,x1..xd[,y1..yk]``; target rows leave y cells empty."""
    d = sample.d
    k = 0 if sample.source_Y is None else sample.source_Y.shape[1]
    header = ["domain"] + [f"x{j + 1}" for j in range(d)] + [f"y{j + 1}" for j in range(k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(sample.source_X):
            ys = [] if k == 0 else [repr(float(v)) for v in sample.source_Y[i]]
            w.writerow([SOURCE] + [repr(float(v)) for v in row] + ys)
        for row in sample.target_X:
            w.writerow([TARGET] + [repr(float(v)) for v in row] + [""] * k)


def read_dataset(path) -> DomainSample:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    d = sum(1 for h in header if h.startswith("x"))
    k = sum(1 for h in header if h.startswith("y"))
    src = [r for r in rows[1:] if r[0] == SOURCE]
    tgt = [r for r in rows[1:] if r[0] == TARGET]
    sx = np.array([[float(v) for v in r[1:1 + d]] for r in src]).reshape(-1, d)
    tx = np.array([[float(v) for v in r[1:1 + d]] for r in tgt]).reshape(-1, d)
    sy = np.array([[float(v) for v in r[1 + d:1 + d + k]] for r in src]).reshape(-1, k) if k else None
    return DomainSample(sx, tx, sy)

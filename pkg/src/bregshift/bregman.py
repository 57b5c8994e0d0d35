"""Bregman divergences and the empirical losses built from them.

Two generators are supported::

    LS:  phi(x) = (x - 1)^2
    LR:  phi(x) = x log x - (x + 1) log(x + 1),   phi(0) = 0

The ratio objectives take network outputs on a source batch and a target
batch. Their ``*_grad`` variants also return the derivative with respect to
each output, which is what the training loop back-propagates.
"""
from __future__ import annotations

import enum

import numpy as np


class BregmanKind(str, enum.Enum):
    LS = "ls"
    LR = "lr"

    @classmethod
    def parse(cls, value) -> "BregmanKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown Bregman kind {value!r}; expected 'ls' or 'lr'") from None


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def _xlogx(x):
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log(safe), 0.0)


def phi(kind, x):
    kind = BregmanKind.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is BregmanKind.LS:
        return _out((x - 1.0) ** 2)
    if np.any(x < 0):
        raise ValueError("phi_LR is defined on x >= 0")
    return _out(_xlogx(x) - (x + 1.0) * np.log1p(x))


def phi_prime(kind, y):
    kind = BregmanKind.parse(kind)
    y = np.asarray(y, dtype=np.float64)
    if kind is BregmanKind.LS:
        return _out(2.0 * (y - 1.0))
    if np.any(y <= 0):
        raise ValueError("phi_LR' needs y > 0")
    return _out(np.log(y) - np.log1p(y))


def bregman_div(kind, x, y):
    """phi(x) - phi(y) - phi'(y) (x - y)."""
    kind = BregmanKind.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if kind is BregmanKind.LS:
        return _out((x - y) ** 2)
    if np.any(y <= 0):
        raise ValueError("D_LR(x || y) needs y > 0")
    if np.any(x < 0):
        raise ValueError("D_LR(x || y) needs x >= 0")
    # x log(x/y) - (x+1) log((x+1)/(y+1)), written with log1p so x ~ y does not cancel
    diff = x - y
    ratio = np.where(x > 0, diff / y, 0.0)
    first = np.where(x > 0, x * np.log1p(ratio), 0.0)
    second = (x + 1.0) * np.log1p(diff / (y + 1.0))
    return _out(np.maximum(first - second, 0.0))


def _nonempty(*arrays):
    for a in arrays:
        if a.size == 0:
            raise ValueError("objective needs nonempty source and target outputs")


def ls_objective_grad(f_source, f_target):
    fs = np.asarray(f_source, dtype=np.float64)
    ft = np.asarray(f_target, dtype=np.float64)
    _nonempty(fs, ft)
    value = np.mean(fs**2) - 2.0 * np.mean(ft)
    return float(value), 2.0 * fs / fs.size, np.full(ft.shape, -2.0 / ft.size)


def ls_objective(f_source, f_target) -> float:
    """mean(f(X^s)^2) - 2 mean(f(X^t))."""
    return ls_objective_grad(f_source, f_target)[0]


def lr_objective_grad(f_source, f_target):
    fs = np.asarray(f_source, dtype=np.float64)
    ft = np.asarray(f_target, dtype=np.float64)
    _nonempty(fs, ft)
    if np.any(fs <= 0) or np.any(ft <= 0):
        raise ValueError("LR objective needs strictly positive outputs; check the lower output bound")
    # -log f + log(f + 1) == log1p(1 / f)
    value = np.mean(np.log1p(fs)) + np.mean(np.log1p(1.0 / ft))
    g_s = 1.0 / ((1.0 + fs) * fs.size)
    g_t = -1.0 / (ft * (1.0 + ft) * ft.size)
    return float(value), g_s, g_t


def lr_objective(f_source, f_target) -> float:
    """mean(log(f(X^s) + 1)) + mean(-log f(X^t) + log(f(X^t) + 1))."""
    return lr_objective_grad(f_source, f_target)[0]


def objective_grad(kind):
    return {BregmanKind.LS: ls_objective_grad, BregmanKind.LR: lr_objective_grad}[BregmanKind.parse(kind)]


def _weighted_parts(preds, targets, weights):
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(-1, 1)
    if t.ndim == 1:
        t = t.reshape(-1, 1)
    if p.shape != t.shape:
        raise ValueError(f"preds {p.shape} and targets {t.shape} differ in shape")
    w = np.ones(p.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != p.shape[0]:
        raise ValueError(f"{w.shape[0]} weights for {p.shape[0]} rows")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    return p, t, w


def weighted_sq_loss(preds, targets, weights=None) -> float:
    """(1/n) sum_i w_i ||y_i - yhat_i||^2; unit weights when ``weights`` is None."""
    p, t, w = _weighted_parts(preds, targets, weights)
    return float(np.mean(w * np.sum((t - p) ** 2, axis=1)))


def weighted_sq_loss_grad(preds, targets, weights=None):
    p, t, w = _weighted_parts(preds, targets, weights)
    r = p - t
    value = np.mean(w * np.sum(r**2, axis=1))
    return float(value), (2.0 / p.shape[0]) * w[:, None] * r

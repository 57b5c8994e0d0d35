"""ReLU multi-layer perceptrons with clamped outputs, exact gradients and Adam.

Depth counts hidden layers. A network with ``hidden_widths=(64, 64)`` has
three affine maps; relu follows every affine map except the last, whose
output is clamped to ``[out_lo, out_hi]`` when bounds are given.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import RngStream, sample_gaussian
from .kernels import backend


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


def relu(x):
    return np.maximum(x, 0.0)


def truncate(x, a: float, b: float):
    """Clamp to [a, b]."""
    if not np.all(np.less(a, b)):
        raise ValueError(f"truncate needs a < b, got a={a}, b={b}")
    return np.clip(x, a, b)


def truncate_relu_signed(x, a: float, b: float):
    """Clamp written as relu compositions; valid for a < 0 < b."""
    if not (np.all(np.less(a, 0)) and np.all(np.greater(b, 0))):
        raise ValueError(f"signed relu form needs a < 0 < b, got a={a}, b={b}")
    return relu(-relu(-x + b) + b) - relu(-relu(x - a) - a)


def truncate_relu_nonneg(x, a: float, b: float):
    """Clamp written as relu compositions; valid for 0 <= a < b."""
    if not (np.all(np.greater_equal(a, 0)) and np.all(np.less(a, b))):
        raise ValueError(f"non-negative relu form needs 0 <= a < b, got a={a}, b={b}")
    return relu(-relu(-x + b) + b - a) + a


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_widths: tuple = ()
    output_dim: int = 1
    out_lo: Optional[float] = None
    out_hi: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if min(self.dims) < 1:
            raise ValueError(f"all widths must be >= 1, got {self.dims}")
        if self.out_lo is not None and self.out_hi is not None and not self.out_lo < self.out_hi:
            raise ValueError(f"need out_lo < out_hi, got {self.out_lo}, {self.out_hi}")

    @property
    def dims(self) -> tuple:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)

    @property
    def n_params(self) -> int:
        d = self.dims
        return sum(k * m + m for k, m in zip(d[:-1], d[1:]))

    @property
    def bounds(self) -> tuple:
        lo = -np.inf if self.out_lo is None else float(self.out_lo)
        hi = np.inf if self.out_hi is None else float(self.out_hi)
        return lo, hi


class MlpParams:
    """Flat parameter vector with per-layer weight and bias views."""

    def __init__(self, spec: MlpSpec, flat: Optional[np.ndarray] = None):
        self.spec = spec
        if flat is None:
            flat = np.zeros(spec.n_params)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {flat.shape}")
        self.flat = flat
        self.weights = []
        self.biases = []
        off = 0
        d = spec.dims
        for k, m in zip(d[:-1], d[1:]):
            self.weights.append(flat[off:off + m * k].reshape(m, k))
            off += m * k
            self.biases.append(flat[off:off + m])
            off += m

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, self.flat.copy())

    def __repr__(self):
        return f"MlpParams(dims={self.spec.dims})"


def init_params(spec: MlpSpec, rng: RngStream) -> MlpParams:
    """He-normal weights (std sqrt(2 / fan_in)), zero biases."""
    params = MlpParams(spec)
    for W in params.weights:
        m, k = W.shape
        W[...] = sample_gaussian(rng, m, k) * np.sqrt(2.0 / k)
    return params


def _check_input(spec: MlpSpec, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, spec.input_dim)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(f"input has shape {X.shape}, network expects (n, {spec.input_dim})")
    return X


def forward(spec: MlpSpec, params: MlpParams, X) -> np.ndarray:
    X = _check_input(spec, X)
    lo, hi = spec.bounds
    return backend.predict(spec.dims, params.flat, X, lo, hi)


LossFn = Callable[[np.ndarray], tuple]


def loss_and_grad(spec: MlpSpec, params: MlpParams, X, loss_fn: LossFn):
    """Loss value and its gradient w.r.t. every weight and bias.

    ``loss_fn`` maps the (clamped) network output to ``(loss, dloss/doutput)``.
    Returns ``(loss, grads)`` with ``grads`` an :class:`MlpParams`.
    """
    X = _check_input(spec, X)
    lo, hi = spec.bounds
    out, cache = backend.forward(spec.dims, params.flat, X, lo, hi)
    loss, gout = loss_fn(out)
    loss = float(loss)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss}")
    grad = backend.backward(spec.dims, params.flat, cache, np.asarray(gout, dtype=np.float64))
    return loss, MlpParams(spec, grad)


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, spec: MlpSpec) -> "AdamState":
        return cls(np.zeros(spec.n_params), np.zeros(spec.n_params))


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, cfg: AdamConfig):
    """One bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    state.step += 1
    backend.adam_update(params.flat, grads.flat, state.m, state.v, state.step,
                        cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    return params, state


@dataclass
class MlpModel:
    spec: MlpSpec
    params: MlpParams

    @classmethod
    def create(cls, spec: MlpSpec, rng: RngStream) -> "MlpModel":
        return cls(spec, init_params(spec, rng))

    def __call__(self, X) -> np.ndarray:
        return forward(self.spec, self.params, X)

    def copy(self) -> "MlpModel":
        return MlpModel(self.spec, self.params.copy())

    def weight_norms(self) -> list:
        """Spectral norm of each weight matrix; a rough smoothness readout."""
        return [float(np.linalg.norm(W, 2)) for W in self.params.weights]


class EpochBatcher:
    """Index batches that shuffle once per epoch and sample without replacement."""

    def __init__(self, n: int, batch_size: int, rng: RngStream):
        if n < 1 or batch_size < 1:
            raise ValueError(f"need n >= 1 and batch_size >= 1, got {n}, {batch_size}")
        self.n = n
        self.batch_size = min(batch_size, n)
        self.rng = rng
        self.epoch = 0
        self._order = np.empty(0, dtype=np.int64)
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos >= self._order.size:
            self._order = self.rng.permutation(self.n)
            self._pos = 0
            self.epoch += 1
        idx = self._order[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return idx


@dataclass
class TrainResult:
    model: MlpModel
    losses: list = field(default_factory=list)


def train(model: MlpModel, iterations: int, make_batch: Callable, cfg: AdamConfig,
          callback: Optional[Callable] = None) -> TrainResult:
    """Run ``iterations`` Adam steps in place on ``model``.

    ``make_batch(step)`` returns ``(X, loss_fn)`` for that step; ``callback``
    is called as ``callback(steps_done, model)`` after every step.
    """
    state = AdamState.zeros(model.spec)
    losses = []
    for t in range(iterations):
        X, loss_fn = make_batch(t)
        try:
            loss, grads = loss_and_grad(model.spec, model.params, X, loss_fn)
        except DivergenceError as exc:
            raise DivergenceError("non-finite loss during training", t) from exc
        adam_step(model.params, grads, state, cfg)
        if not np.all(np.isfinite(model.params.flat)):
            raise DivergenceError("non-finite parameters", t)
        losses.append(loss)
        if callback is not None:
            callback(t + 1, model)
    return TrainResult(model, losses)


def save_params(params: MlpParams, path) -> None:
    """Plain-text snapshot: layer count, then ``rows cols`` of each weight
    matrix one number per line, then every weight and bias row-major."""
    lines = [str(len(params.weights))]
    for W in params.weights:
        lines.extend([str(W.shape[0]), str(W.shape[1])])
    lines.extend(repr(float(x)) for x in params.flat)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(path, out_lo: Optional[float] = None, out_hi: Optional[float] = None) -> MlpParams:
    tokens = Path(path).read_text(encoding="utf-8").split()
    n_layers = int(tokens[0])
    shapes = [(int(tokens[1 + 2 * i]), int(tokens[2 + 2 * i])) for i in range(n_layers)]
    for (m, _), (_, k) in zip(shapes[:-1], shapes[1:]):
        if m != k:
            raise ValueError(f"inconsistent layer shapes in {path}: {shapes}")
    spec = MlpSpec(shapes[0][1], tuple(m for m, _ in shapes[:-1]), shapes[-1][0], out_lo, out_hi)
    values = np.array([float(t) for t in tokens[1 + 2 * n_layers:]])
    return MlpParams(spec, values)


def hidden_layers_for(n: int) -> int:
    """Hidden-layer count floor(ln(n) / 2), at least 1."""
    return max(1, int(np.floor(np.log(n) / 2.0)))


def log_bound(n: int, kappa: float, power: float = 1.0) -> float:
    """(ln n) ** (power * (1 + kappa)); the growth schedule for output bounds."""
    return float(np.log(n) ** (power * (1.0 + kappa)))


def make_spec(input_dim: int, depth: int, width: int, output_dim: int,
              bounds: Sequence = (None, None)) -> MlpSpec:
    return MlpSpec(input_dim, (width,) * depth, output_dim, bounds[0], bounds[1])

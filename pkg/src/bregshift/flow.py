"""Conditional flow sampling through a stochastic interpolant.

The interpolant ``Y_tau = a(tau) eta + b(tau) Y`` joins standard Gaussian
noise (tau = 0) to the response (tau = 1). A network ``v(x, y, tau)`` is
regressed onto ``a'(tau) eta + b'(tau) Y``; integrating ``dZ = v(x, Z, tau)``
from Gaussian noise then draws approximately from ``Y | X = x``.

The 1-D Gaussian toy has a closed-form velocity, used to separate
integration error from learning error.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import RngStream, sample_gaussian
from .nn import (AdamConfig, DivergenceError, EpochBatcher, MlpModel, MlpSpec, hidden_layers_for,
                 log_bound, train)


@dataclass(frozen=True)
class InterpolantSpec:
    name: str
    a: Callable
    a_dot: Callable
    b: Callable
    b_dot: Callable

    def check_boundary(self, atol: float = 0.0) -> bool:
        return (abs(self.a(0.0) - 1) <= atol and abs(self.a(1.0)) <= atol
                and abs(self.b(0.0)) <= atol and abs(self.b(1.0) - 1) <= atol)


LINEAR = InterpolantSpec(
    "linear",
    a=lambda t: 1.0 - np.asarray(t, dtype=float),
    a_dot=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
    b=lambda t: np.asarray(t, dtype=float) + 0.0,
    b_dot=lambda t: np.ones_like(np.asarray(t, dtype=float)),
)

# cos/sin are not exact at pi/2 in floating point; snap the endpoints
_HALF_PI = math.pi / 2


def _cos_half(t):
    t = np.asarray(t, dtype=float)
    return np.where(t == 1.0, 0.0, np.cos(_HALF_PI * t))


def _sin_half(t):
    t = np.asarray(t, dtype=float)
    return np.where(t == 1.0, 1.0, np.sin(_HALF_PI * t))


TRIGONOMETRIC = InterpolantSpec(
    "trigonometric",
    a=_cos_half,
    a_dot=lambda t: -_HALF_PI * _sin_half(t),
    b=_sin_half,
    b_dot=lambda t: _HALF_PI * _cos_half(t),
)

INTERPOLANTS = {s.name: s for s in (LINEAR, TRIGONOMETRIC)}


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any((tau < 0) | (tau > 1)) or np.any(~np.isfinite(tau)):
        raise ValueError("tau must lie in [0, 1]")
    return tau


def _col(tau, n):
    tau = np.asarray(tau, dtype=float)
    return tau.reshape(-1, 1) if tau.ndim else np.full((n, 1), float(tau))


def interpolate(eta, y, tau, spec: InterpolantSpec = LINEAR):
    """a(tau) eta + b(tau) y; rows of ``eta``/``y`` pair with entries of ``tau``."""
    tau = _check_tau(tau)
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta.shape != y.shape:
        raise ValueError(f"eta {eta.shape} and y {y.shape} differ in shape")
    if eta.ndim < 2:
        return spec.a(tau) * eta + spec.b(tau) * y
    t = _col(tau, eta.shape[0])
    return spec.a(t) * eta + spec.b(t) * y


def velocity_target(eta, y, tau, spec: InterpolantSpec = LINEAR):
    """a'(tau) eta + b'(tau) y."""
    tau = _check_tau(tau)
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta.ndim < 2:
        return spec.a_dot(tau) * eta + spec.b_dot(tau) * y
    t = _col(tau, eta.shape[0])
    return spec.a_dot(t) * eta + spec.b_dot(t) * y


def gaussian_velocity_oracle(mu, sigma, spec: InterpolantSpec, y, tau):
    """E[a' eta + b' Y | a eta + b Y = y] for Y ~ N(mu, sigma^2), eta ~ N(0, 1)."""
    if np.any(np.asarray(sigma) < 0):
        raise ValueError("sigma must be >= 0")
    tau = np.asarray(tau, dtype=float)
    a, b = spec.a(tau), spec.b(tau)
    ad, bd = spec.a_dot(tau), spec.b_dot(tau)
    s2 = np.asarray(sigma, dtype=float) ** 2
    denom = a * a + b * b * s2
    if np.any(denom <= 0):
        raise ValueError("a(tau)^2 + b(tau)^2 sigma^2 vanishes; velocity undefined")
    mu = np.asarray(mu, dtype=float)
    out = bd * mu + (ad * a + bd * b * s2) / denom * (np.asarray(y, dtype=float) - b * mu)
    return float(out) if np.ndim(out) == 0 else out


class GaussianOracle:
    """Exact velocity for Y | X = x ~ N(mean_fn(x), sigma^2) in one dimension."""

    dy = 1

    def __init__(self, mean_fn: Callable, sigma: float, spec: InterpolantSpec = LINEAR):
        self.mean_fn = mean_fn
        self.sigma = float(sigma)
        self.interpolant = spec

    def velocity(self, x, z, tau):
        mu = np.asarray(self.mean_fn(np.asarray(x, dtype=float)), dtype=float).reshape(-1, 1)
        return gaussian_velocity_oracle(mu, self.sigma, self.interpolant, z, tau)


class ZeroVelocity:
    def __init__(self, dy: int = 1):
        self.dy = dy

    def velocity(self, x, z, tau):
        return np.zeros_like(z)


@dataclass
class FlowModel:
    net: MlpModel
    interpolant: InterpolantSpec
    dx: int
    dy: int

    def velocity(self, x, z, tau):
        """Network velocity at rows ``z`` for covariate ``x`` (one row or one per z)."""
        z = np.asarray(z, dtype=float).reshape(-1, self.dy)
        n = z.shape[0]
        x = np.asarray(x, dtype=float).reshape(-1, self.dx)
        if x.shape[0] == 1 and n != 1:
            x = np.broadcast_to(x, (n, self.dx))
        inp = np.empty((n, self.dx + self.dy + 1))
        inp[:, :self.dx] = x
        inp[:, self.dx:self.dx + self.dy] = z
        inp[:, -1] = np.broadcast_to(np.asarray(tau, dtype=float).reshape(-1), (n,))
        return self.net(inp)


@dataclass(frozen=True)
class FlowTrainConfig:
    iterations: int = 5000
    batch_size: int = 128
    learning_rate: float = 1e-3
    width: int = 64
    depth: Optional[int] = None  # None: floor(ln N / 2)
    kappa: float = 0.5
    bounded: bool = True
    resample_interpolation: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")


def flow_net_spec(n: int, dx: int, dy: int, cfg: FlowTrainConfig) -> MlpSpec:
    depth = hidden_layers_for(n) if cfg.depth is None else cfg.depth
    if cfg.bounded:
        bound = log_bound(n, cfg.kappa, power=0.5)
        return MlpSpec(dx + dy + 1, (cfg.width,) * depth, dy, -bound, bound)
    return MlpSpec(dx + dy + 1, (cfg.width,) * depth, dy)


def fit_velocity(X, Y, spec: InterpolantSpec = LINEAR, cfg: FlowTrainConfig = FlowTrainConfig(),
                 callback: Optional[Callable] = None) -> FlowModel:
    """Least-squares velocity regression at random (eta, tau) per sample.

    With ``resample_interpolation`` a fresh ``(eta_i, tau_i)`` is drawn for
    every sample at the start of each epoch; otherwise one draw is kept.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    X = X.reshape(X.shape[0], -1)
    Y = Y.reshape(Y.shape[0], -1)
    n, dx = X.shape
    dy = Y.shape[1]
    if n == 0 or Y.shape[0] != n:
        raise ValueError("need matching, nonempty X and Y")
    rng = RngStream(cfg.seed)
    net = MlpModel.create(flow_net_spec(n, dx, dy, cfg), rng.child(1))
    # zero output layer: the untrained flow is the identity map on the noise
    net.params.weights[-1][:] = 0.0
    net.params.biases[-1][:] = 0.0
    batcher = EpochBatcher(n, cfg.batch_size, rng.child(2))
    noise_rng = rng.child(3)
    state = {"epoch": -1, "eta": None, "tau": None}
    inp = np.empty((n, dx + dy + 1))
    inp[:, :dx] = X

    def draw():
        state["eta"] = sample_gaussian(noise_rng, n, dy)
        state["tau"] = noise_rng.uniform(n)
        t = state["tau"][:, None]
        inp[:, dx:dx + dy] = spec.a(t) * state["eta"] + spec.b(t) * Y
        inp[:, -1] = state["tau"]
        state["target"] = spec.a_dot(t) * state["eta"] + spec.b_dot(t) * Y

    def make_batch(_step):
        idx = batcher.next()
        if state["eta"] is None or (cfg.resample_interpolation and batcher.epoch != state["epoch"]):
            draw()
        state["epoch"] = batcher.epoch
        target = state["target"][idx]
        m = idx.size

        def loss_fn(out):
            r = out - target
            return float(np.sum(r * r) / m), (2.0 / m) * r

        return inp[idx], loss_fn

    train(net, cfg.iterations, make_batch, AdamConfig(cfg.learning_rate), callback)
    return FlowModel(net, spec, dx, dy)


@dataclass(frozen=True)
class OdeConfig:
    steps: int = 100
    integrator: str = "rk4"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


def integrate(velocity: Callable, z0: np.ndarray, ode: OdeConfig = OdeConfig()) -> np.ndarray:
    """Fixed-step integration of dz/dtau = velocity(z, tau) over [0, 1]."""
    z = np.array(z0, dtype=float)
    h = 1.0 / ode.steps
    for k in range(ode.steps):
        t = k * h
        if ode.integrator == "euler":
            z = z + h * velocity(z, t)
        else:
            k1 = velocity(z, t)
            k2 = velocity(z + 0.5 * h * k1, t + 0.5 * h)
            k3 = velocity(z + 0.5 * h * k2, t + 0.5 * h)
            k4 = velocity(z + h * k3, min(t + h, 1.0))
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise DivergenceError("non-finite state during integration", k)
    return z


def sample_ode(model, x, n: int, ode: OdeConfig = OdeConfig(), rng: Optional[RngStream] = None) -> np.ndarray:
    """n draws of Z_1 for covariate ``x``, started from Z_0 ~ N(0, I)."""
    rng = rng if rng is not None else RngStream(0)
    dy = getattr(model, "dy", 1)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    z0 = sample_gaussian(rng, n, dy)
    return integrate(lambda z, t: model.velocity(x, z, t), z0, ode)


def w2_empirical_1d(a, b) -> float:
    """Exact W2 between two equal-size empirical laws on the line."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size != b.size:
        raise ValueError(f"w2_empirical_1d needs equal sizes, got {a.size} and {b.size}")
    if a.size == 0:
        raise ValueError("empty samples")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def w2_axis_sliced(A, B) -> tuple:
    """Per-coordinate 1-D W2 and their sum; a proxy for diagonal laws."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    A = A.reshape(A.shape[0], -1)
    B = B.reshape(B.shape[0], -1)
    if A.shape[1] != B.shape[1]:
        raise ValueError("samples differ in dimension")
    per = [w2_empirical_1d(A[:, j], B[:, j]) for j in range(A.shape[1])]
    return per, float(sum(per))


def gaussian_toy(n: int, rng: RngStream, sigma: float = 0.5):
    """X ~ U(-1, 1), Y | X ~ N(X, sigma^2)."""
    X = 2.0 * rng.uniform((n, 1)) - 1.0
    Y = X + sigma * sample_gaussian(rng, n, 1)
    return X, Y


def write_samples(X, Z, path) -> None:
    """CSV ``x1..xdx,z1..zdy``: one generated point per row with its covariate."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    X = X.reshape(X.shape[0], -1)
    Z = Z.reshape(Z.shape[0], -1)
    if X.shape[0] != Z.shape[0]:
        raise ValueError("X and Z need the same number of rows")
    header = [f"x{j + 1}" for j in range(X.shape[1])] + [f"z{j + 1}" for j in range(Z.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for xr, zr in zip(X, Z):
            w.writerow([repr(float(v)) for v in xr] + [repr(float(v)) for v in zr])


def read_samples(path) -> tuple:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    dx = sum(1 for h in rows[0] if h.startswith("x"))
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    return data[:, :dx], data[:, dx:]

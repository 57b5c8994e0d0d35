"""Dense arithmetic, seeded random streams and summary statistics.

Matrices are plain ``float64`` numpy arrays. Every sampler draws from an
:class:`RngStream`, a thin owner of a counter-based Philox generator; the
Gaussian and Gamma transforms on top of its uniforms are implemented here so
the whole sampling path is fixed by the seed alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALGORITHM = "philox4x64-10"


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    """Standard matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape[0]}x{a.shape[1]} @ {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


@dataclass
class RngStream:
    """Single-owner random stream.

    Child streams are derived by seed arithmetic (``seed + index``), never by
    sharing generator state.
    """

    seed: int
    algorithm: str = field(default=ALGORITHM, init=False)

    def __post_init__(self):
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed + int(index))

    def uniform(self, size) -> np.ndarray:
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def gaussian(self, n: int, d: int = 1) -> np.ndarray:
        return sample_gaussian(self, n, d)

    def gamma(self, shape: float, rate: float, n: int) -> np.ndarray:
        return sample_gamma(self, shape, rate, n)


def _box_muller(rng: RngStream, count: int) -> np.ndarray:
    pairs = (count + 1) // 2
    u = rng.uniform((pairs, 2))
    # 1 - u lies in (0, 1], so the log is finite
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    angle = 2.0 * math.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = radius * np.cos(angle)
    z[:, 1] = radius * np.sin(angle)
    return z.reshape(-1)[:count]


def sample_gaussian(rng: RngStream, n: int, d: int = 1) -> np.ndarray:
    """n x d matrix of i.i.d. standard normal draws (Box-Muller)."""
    if n < 1 or d < 1:
        raise ValueError(f"sample_gaussian needs n, d >= 1, got n={n}, d={d}")
    return _box_muller(rng, n * d).reshape(n, d)


def _marsaglia_tsang(rng: RngStream, shape: float, n: int) -> np.ndarray:
    # unit-rate draws for shape >= 1
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        # acceptance is above 95% for shape >= 1, a small surplus fills most calls in one pass
        m = max(16, int((n - filled) * 1.1) + 8)
        x = _box_muller(rng, m)
        u = rng.uniform(m)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        logv = np.log(np.where(ok, v, 1.0))
        squeeze = u < 1.0 - 0.0331 * x**4
        full = np.log(np.where(u > 0, u, np.finfo(float).tiny)) < 0.5 * x * x + d * (1.0 - v + logv)
        accepted = (d * v)[ok & (squeeze | full)]
        take = min(accepted.size, n - filled)
        out[filled:filled + take] = accepted[:take]
        filled += take
    return out


def sample_gamma(rng: RngStream, shape: float, rate: float, n: int) -> np.ndarray:
    """n i.i.d. draws from Gamma(shape, rate), mean ``shape / rate``.

    Marsaglia-Tsang squeeze method; for shape < 1 draws Gamma(shape + 1) and
    scales by ``U ** (1 / shape)``.
    """
    if not shape > 0 or not rate > 0:
        raise ValueError(f"gamma needs shape > 0 and rate > 0, got shape={shape}, rate={rate}")
    if n < 1:
        raise ValueError(f"gamma needs n >= 1, got {n}")
    if shape < 1.0:
        g = _marsaglia_tsang(rng, shape + 1.0, n)
        u = 1.0 - rng.uniform(n)
        g = g * u ** (1.0 / shape)
    else:
        g = _marsaglia_tsang(rng, shape, n)
    g = g / rate
    # U ** (1/shape) can underflow for tiny shapes
    return np.maximum(g, np.finfo(float).tiny)


def summary(values) -> dict:
    """Sample mean and sample standard deviation (n - 1 denominator)."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError(f"summary needs at least 2 values, got {v.size}")
    return {"mean": float(v.mean()), "std": float(v.std(ddof=1))}

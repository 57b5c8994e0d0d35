"""Pure numpy MLP kernels; the reference backend.

Parameters live in one flat float64 vector. Layer ``i`` maps width
``dims[i]`` to ``dims[i + 1]`` and stores its weight matrix
(``dims[i + 1] x dims[i]``, row-major) followed by its bias.
"""
import numpy as np

NAME = "python"


class Cache:
    """Inputs of every affine layer plus the raw (pre-clamp) output."""

    __slots__ = ("acts", "raw", "lo", "hi")

    def __init__(self, acts, raw, lo, hi):
        self.acts = acts
        self.raw = raw
        self.lo = lo
        self.hi = hi


def _layers(dims, theta):
    off = 0
    out = []
    for k, m in zip(dims[:-1], dims[1:]):
        W = theta[off:off + m * k].reshape(m, k)
        off += m * k
        out.append((W, theta[off:off + m]))
        off += m
    return out


def forward(dims, theta, X, lo, hi):
    layers = _layers(dims, theta)
    acts = [X]
    h = X
    for W, b in layers[:-1]:
        h = h @ W.T + b
        np.maximum(h, 0.0, out=h)
        acts.append(h)
    W, b = layers[-1]
    raw = h @ W.T + b
    return np.clip(raw, lo, hi), Cache(acts, raw, lo, hi)


def predict(dims, theta, X, lo, hi):
    return forward(dims, theta, X, lo, hi)[0]


def backward(dims, theta, cache, gout):
    """Gradient w.r.t. ``theta`` given ``gout = dL/d(clamped output)``."""
    layers = _layers(dims, theta)
    # clamp passes gradient only strictly inside the bounds
    g = gout * ((cache.raw > cache.lo) & (cache.raw < cache.hi))
    grad = np.empty_like(theta)
    off = theta.size
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        h = cache.acts[i]
        m, k = W.shape
        off -= m
        grad[off:off + m] = g.sum(axis=0)
        off -= m * k
        grad[off:off + m * k] = (g.T @ h).ravel()
        if i > 0:
            g = (g @ W) * (h > 0)
    return grad


def adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps):
    """In-place Adam update with bias correction; ``step`` is the new count."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    theta -= lr * (m / c1) / (np.sqrt(v / c2) + eps)

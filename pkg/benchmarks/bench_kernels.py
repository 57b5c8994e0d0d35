"""Per-step timing of the compiled and numpy MLP kernels.

One training step is forward + backward + Adam update on a batch; the two
backends share the flat parameter layout, so they run the same inputs.

    python3 benchmarks/bench_kernels.py --batch 200 --repeats 5
"""
import argparse
import time

import numpy as np

from bregshift import _pykernels
from bregshift.core import RngStream
from bregshift.nn import MlpSpec, init_params

try:
    from bregshift import _ckernels
except ImportError:
    _ckernels = None

# (input, hidden widths, output): ratio nets at d=1 and d=5, the regression net, the flow net
SHAPES = [
    (1, (64, 64), 1),
    (5, (64, 64, 64, 64), 1),
    (5, (64, 64, 64), 2),
    (3, (64, 64, 64, 64), 1),
    (2, (8,), 1),
]


def time_steps(backend, spec, theta, X, gout, steps):
    lo, hi = spec.bounds
    theta = theta.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t0 = time.perf_counter()
    for k in range(1, steps + 1):
        _, cache = backend.forward(spec.dims, theta, X, lo, hi)
        grad = backend.backward(spec.dims, theta, cache, gout)
        backend.adam_update(theta, grad, m, v, k, 1e-4, 0.9, 0.999, 1e-8)
    return (time.perf_counter() - t0) / steps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--batch", type=int, default=200, help="rows per step (source + target batch)")
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--repeats", type=int, default=3, help="report the best of this many runs")
    args = ap.parse_args(argv)

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.insert(0, ("cython", _ckernels))
    else:
        print("compiled kernels not built; timing the numpy backend only")

    print(f"{'dims':<28}" + "".join(f"{name:>12}" for name, _ in backends) + ("     speedup" if len(backends) > 1 else ""))
    for din, hidden, dout in SHAPES:
        spec = MlpSpec(din, hidden, dout, 0.0, 20.0)
        r = RngStream(0)
        theta = init_params(spec, r).flat
        X = r.uniform((args.batch, din))
        gout = r.uniform((args.batch, dout)) / args.batch
        per_step = []
        for _, be in backends:
            time_steps(be, spec, theta, X, gout, 10)  # warm up
            per_step.append(min(time_steps(be, spec, theta, X, gout, args.steps) for _ in range(args.repeats)))
        row = f"{str(spec.dims):<28}" + "".join(f"{t * 1e6:>10.1f}us" for t in per_step)
        if len(per_step) > 1:
            row += f"{per_step[1] / per_step[0]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()

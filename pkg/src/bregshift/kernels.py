"""Backend selection for the MLP hot loop.

The compiled ``_ckernels`` extension is used when it imports; otherwise, or
when ``BREGSHIFT_PURE_PYTHON`` is set, the numpy reference ``_pykernels``.
Both expose ``forward``, ``predict``, ``backward`` and ``adam_update`` over
the same flat parameter layout.
"""
import os

from . import _pykernels

if os.environ.get("BREGSHIFT_PURE_PYTHON"):
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:
        backend = _pykernels

python_backend = _pykernels


def backend_name() -> str:
    return backend.NAME

"""Hot loops, compiled when the extension is built and numpy otherwise.

Set ``SPHWAVE_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _pykernels

try:
    if os.environ.get("SPHWAVE_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

TERMS = _pykernels.TERMS


def vbap_locate(inverses, sources, tol=1e-10):
    return _impl.vbap_locate(inverses, sources, float(tol))


def idhoa_cost_grad(S, U, dirs, w, alpha):
    import numpy as np

    args = [np.ascontiguousarray(x, dtype=float) for x in (S, U, dirs, w, alpha)]
    return _impl.idhoa_cost_grad(*args)

"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``ADEMSEG_PURE_PYTHON=1`` to force the numpy kernels.
"""

import os

import numpy as np

from . import _pykernels

_compiled = None
if not os.environ.get("ADEMSEG_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKENDS = ("python",) + (("compiled",) if _compiled is not None else ())
DEFAULT = "compiled" if _compiled is not None else "python"


def _resolve(backend):
    name = backend or DEFAULT
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available in this install")
        return _compiled
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown backend {backend!r}")


def window_stats(pixels, radius, clamp, s_threshold, backend=None):
    impl = _resolve(backend)
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    return impl.window_stats(px, int(radius), bool(clamp), float(s_threshold))


def fuzzy_weights(sigma, ncn, sets, domains, backend=None):
    impl = _resolve(backend)
    sigma = np.asarray(sigma, dtype=np.float64)
    shape = sigma.shape
    # the kernels take 2-D grids; any other shape is evaluated as one row
    flat = (1, sigma.size) if sigma.ndim != 2 else shape
    out = impl.fuzzy_weights(
        np.ascontiguousarray(sigma.reshape(flat)),
        np.ascontiguousarray(np.asarray(ncn, dtype=np.float64).reshape(flat)),
        np.ascontiguousarray(sets, dtype=np.float64),
        np.ascontiguousarray(domains, dtype=np.float64),
    )
    return tuple(np.asarray(a).reshape(shape) for a in out)

"""Selection of the evaluation-kernel backend.

At import time the compiled extension (``pum._ckernels``) is preferred; if it
is missing the numpy implementation (``pum._kernels_np``) is used.  The
environment variable ``PUM_BACKEND`` (``auto``/``native``/``python``) or
:func:`set_backend` overrides the choice, which the benchmark script uses to
compare the two.
"""

import os

from . import _kernels_np

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_IMPLS = {"python": _kernels_np}
if _ckernels is not None:
    _IMPLS["native"] = _ckernels

_active = None
_active_name = ""


def available_backends():
    return tuple(sorted(_IMPLS))


def set_backend(name):
    """Select 'python', 'native', or 'auto'. Returns the active name."""
    global _active, _active_name
    if name in (None, "", "auto"):
        name = "native" if "native" in _IMPLS else "python"
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} not available "
                         f"(have {available_backends()})")
    _active = _IMPLS[name]
    _active_name = name
    return name


def backend_name():
    return _active_name


def _c(a):
    import numpy as np
    return np.ascontiguousarray(a, dtype=np.float64)


def kernel_values(family, eps, A, B):
    return _active.kernel_values(family, eps, _c(A), _c(B))


def kernel_gradient(family, eps, A, B):
    return _active.kernel_gradient(family, eps, _c(A), _c(B))


def kernel_laplacian(family, eps, A, B, ndim):
    return _active.kernel_laplacian(family, eps, _c(A), _c(B), ndim)


def wendland_parts(r):
    return _active.wendland_parts(_c(r))
def kernel_bundle(family, eps, A, B, ndim):
    return _active.kernel_bundle(family, eps, _c(A), _c(B), ndim)



set_backend(os.environ.get("PUM_BACKEND", "auto"))

"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set FBLAB_KERNELS=py or =cy to force a backend; the default prefers the
compiled one.  Both implement the same contract (see _kernels_py) and the
test suite checks them against each other.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

_choice = os.environ.get("FBLAB_KERNELS", "auto").lower()
if _choice in ("auto", "cy", "cython"):
    try:
        from . import _kernels_cy  # compiled extension, built via setup.py

        BACKEND = "cython"
        _impl = _kernels_cy
    except ImportError:
        if _choice in ("cy", "cython"):
            raise


_MAX_CY_COMPONENTS = 16  # compiled nonlinearity uses a fixed scratch buffer


def _pick(v):
    return _kernels_py if v.shape[-1] > _MAX_CY_COMPONENTS else _impl


def energy(v, lamp, lamm, q, h):
    return _pick(v).energy(v, lamp, lamm, q, h)


def residual(v, lamp, lamm, q, h):
    return _pick(v).residual(v, lamp, lamm, q, h)


def jacobi_sweep(v, lamp, lamm, q, h, omega):
    return _pick(v).jacobi_sweep(v, lamp, lamm, q, h, omega)


f_nodal = _kernels_py.f_nodal
F_total = _kernels_py.F_total
laplacian = _kernels_py.laplacian

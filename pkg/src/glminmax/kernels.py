"""Batch energy kernels, compiled when available.

The Cython extension ``_kernels`` is used if it was built; otherwise the
numpy implementation in ``_kernels_py`` is used.  Set ``GLMINMAX_PURE=1``
to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("GLMINMAX_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

potential = _kernels_py.potential


def _prep(U):
    U = np.asarray(U, dtype=float)
    if U.ndim == 2:
        U = U[None]
    return np.ascontiguousarray(U)


def energy_grad(U, tail, head, weight, mass, inv_eps2, impl=None):
    """(dirichlet, potential, gradient) for a batch of fields (nf, V, 2)."""
    return (impl or _impl).energy_grad(_prep(U), tail, head, weight, mass, float(inv_eps2))


def energy(U, tail, head, weight, mass, inv_eps2, impl=None):
    return (impl or _impl).energy(_prep(U), tail, head, weight, mass, float(inv_eps2))


def truncate(U, impl=None) -> None:
    """Retract every vertex value onto the closed unit disk, in place."""
    (impl or _impl).truncate(U)

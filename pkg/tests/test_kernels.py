from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from glminmax import _kernels_py, kernels
from glminmax.glenergy import _edge_arrays
from glminmax.manifold import flat_torus, unit_sphere

compiled = pytest.importorskip("glminmax._kernels")


@pytest.fixture(scope="module", params=["torus", "sphere"])
def arrays(request):
    mesh = flat_torus(2, 16) if request.param == "torus" else unit_sphere(2)
    return mesh, _edge_arrays(mesh)


def test_backend_is_compiled():
    if os.environ.get("GLMINMAX_PURE"):
        assert kernels.BACKEND == "python"
    else:
        assert kernels.BACKEND == "cython"


def test_pure_env_selects_fallback():
    code = "import glminmax.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, GLMINMAX_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"


def test_energy_grad_parity(arrays):
    mesh, (tail, head, weight, mass) = arrays
    rng = np.random.default_rng(3)
    U = 1.5 * rng.normal(size=(4, mesh.n_vertices, 2))  # exercises the outer branch too
    a = kernels.energy_grad(U, tail, head, weight, mass, 25.0, impl=compiled)
    b = kernels.energy_grad(U, tail, head, weight, mass, 25.0, impl=_kernels_py)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
    e = kernels.energy(U, tail, head, weight, mass, 25.0, impl=compiled)
    np.testing.assert_allclose(e[0] + e[1], b[0] + b[1], rtol=1e-12)


def test_truncate_parity():
    rng = np.random.default_rng(4)
    U = 2 * rng.normal(size=(3, 500, 2))
    A, B = U.copy(), U.copy()
    kernels.truncate(A, impl=compiled)
    kernels.truncate(B, impl=_kernels_py)
    np.testing.assert_allclose(A, B, rtol=0, atol=1e-15)
    assert np.hypot(A[..., 0], A[..., 1]).max() <= 1 + 1e-15


def test_single_field_promoted(arrays):
    mesh, (tail, head, weight, mass) = arrays
    U = np.ones((mesh.n_vertices, 2)) * 0.3
    Ed, _, G = kernels.energy_grad(U, tail, head, weight, mass, 1.0)
    assert G.shape == (1, mesh.n_vertices, 2)
    assert Ed[0] == pytest.approx(0.0, abs=1e-14)

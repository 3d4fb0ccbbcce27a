from __future__ import annotations

import numpy as np
import pytest

from glminmax.errors import MeshError
from glminmax.manifold import (
    MeshManifold,
    build_model,
    components,
    flat_torus,
    harmonic_basis,
    poincare_constant,
    unit_sphere,
)


def test_sphere_counts():
    for k in range(4):
        m = unit_sphere(k)
        assert m.n_vertices == 10 * 4**k + 2
        assert m.n_cells == 20 * 4**k


def test_volumes(mesh):
    expected = 4 * np.pi if mesh.kind == "unit_sphere" else (2 * np.pi) ** mesh.dimension
    assert mesh.dec.star0.sum() == pytest.approx(mesh.total_volume, rel=1e-12)
    if mesh.is_torus:
        assert mesh.total_volume == pytest.approx(expected, rel=1e-12)
    else:
        assert mesh.total_volume == pytest.approx(expected, rel=0.05)


def test_d_squared_zero(mesh):
    dec = mesh.dec
    assert abs(dec.d1 @ dec.d0).max() == 0
    if dec.d2 is not None:
        assert abs(dec.d2 @ dec.d1).max() == 0


def test_codifferential_adjoint(mesh, rng):
    dec = mesh.dec
    for _ in range(100):
        a = rng.normal(size=mesh.n_vertices)
        b = rng.normal(size=len(dec.star1))
        lhs = np.dot(dec.star1 * (dec.d0 @ a), b)
        rhs = np.dot(dec.star0 * a, dec.codiff1(b))
        scale = np.sqrt(dec.star1 @ (dec.d0 @ a) ** 2 * (dec.star1 @ b**2))
        assert abs(lhs - rhs) <= 1e-10 * scale


def test_mesh_validates(mesh):
    mesh.validate()


def test_harmonic_dimension(sphere, torus2, torus3):
    assert harmonic_basis(sphere).shape[1] == 0
    assert harmonic_basis(torus2).shape[1] == 2
    assert harmonic_basis(torus3).shape[1] == 3


def test_harmonic_forms_closed_coclosed(torus2):
    dec = torus2.dec
    H = harmonic_basis(torus2)
    for h in H.T:
        assert np.abs(dec.d1 @ h).max() < 1e-10
        assert np.abs(dec.codiff1(h)).max() < 1e-10


def test_lambda1():
    assert poincare_constant(flat_torus(2, 32)).lambda1 == pytest.approx(1.0, rel=0.02)
    assert poincare_constant(unit_sphere(3)).lambda1 == pytest.approx(2.0, rel=0.02)


def test_text_roundtrip(tmp_path, mesh):
    path = tmp_path / "mesh.txt"
    mesh.save(path)
    back = MeshManifold.load(path)
    assert back.checksum == mesh.checksum
    np.testing.assert_array_equal(back.vertices, mesh.vertices)


def test_build_model_rejects_unknown():
    with pytest.raises(MeshError):
        build_model("klein_bottle", 4)


def test_small_torus_rejected():
    with pytest.raises(MeshError):
        flat_torus(2, 3)


def test_components(torus2):
    mask = np.zeros(torus2.n_vertices, bool)
    mask[[0, 1, 5 * 16 + 5]] = True
    comps = components(torus2, mask)
    assert sorted(len(c) for c in comps) == [1, 2]


def test_mesh_size():
    assert flat_torus(2, 32).h == pytest.approx(2 * np.pi / 32)
    assert unit_sphere(4).h < unit_sphere(3).h

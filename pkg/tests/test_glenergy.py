from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glminmax import glenergy as gl
from glminmax.errors import GLError
from glminmax.manifold import flat_torus


def test_potential_values():
    W, DW = gl.potential_eval(np.array([0.0, 0.0]))
    assert W == 0.25 and np.all(DW == 0)
    W, _ = gl.potential_eval(np.array([0.6, 0.8]))
    assert W == pytest.approx(0.0, abs=1e-15)


@given(st.floats(0.0, 10.0), st.floats(0.0, 2 * math.pi))
def test_potential_bounded_derivative(r, a):
    z = np.array([r * math.cos(a), r * math.sin(a)])
    W, DW = gl.potential_eval(z)
    assert 0.0 <= W
    assert np.linalg.norm(DW) <= gl.DW_BOUND + 1e-12


def test_potential_continuous_at_two():
    # the extension is C^1 across |z| = 2
    h = 1e-7
    Wm, Dm = gl.potential_eval(np.array([2.0 - h, 0.0]))
    Wp, Dp = gl.potential_eval(np.array([2.0 + h, 0.0]))
    assert abs(Wp - Wm) < 1e-5
    assert np.allclose(Dm, Dp, atol=1e-5)


def test_constant_unit_field_has_zero_energy(mesh):
    u = gl.ComplexField.constant(mesh, [0.6, -0.8], 0.1)
    assert gl.energy_value(u) == pytest.approx(0.0, abs=1e-12)
    assert gl.gl_residual(u) == pytest.approx(0.0, abs=1e-10)


def test_energy_split(mesh, rng):
    u = gl.ComplexField(rng.normal(size=(mesh.n_vertices, 2)), 0.3, mesh)
    rep = gl.energy(u)
    assert rep.total == pytest.approx(rep.dirichlet + rep.potential)
    assert rep.total == pytest.approx(gl.energy_value(u), rel=1e-12)
    assert rep.normalized == pytest.approx(rep.total / abs(math.log(0.3)))


def test_gradient_finite_difference(mesh, rng):
    u = gl.ComplexField(rng.normal(scale=0.7, size=(mesh.n_vertices, 2)), 0.2, mesh)
    v = rng.normal(size=u.values.shape)
    t = 1e-5
    fd = (gl.energy_value(u.with_values(u.values + t * v))
          - gl.energy_value(u.with_values(u.values - t * v))) / (2 * t)
    an = float(np.sum(gl.gradient(u) * v))
    assert abs(fd - an) <= 1e-6 * abs(an)


def test_hessian_matches_gradient(torus2, rng):
    u = gl.ComplexField(rng.normal(scale=0.5, size=(torus2.n_vertices, 2)), 0.3, torus2)
    v = rng.normal(size=u.values.shape)
    t = 1e-6
    gp = gl.gradient(u.with_values(u.values + t * v))
    gm = gl.gradient(u.with_values(u.values - t * v))
    fd = ((gp - gm) / (2 * t)).ravel()
    Hv = gl.hessian(u) @ v.ravel()
    assert np.linalg.norm(fd - Hv) <= 1e-6 * np.linalg.norm(Hv)
    H = gl.hessian(u)
    assert abs(H - H.T).max() < 1e-12


def test_truncate(mesh, rng):
    u = gl.ComplexField(3 * rng.normal(size=(mesh.n_vertices, 2)), 0.2, mesh)
    t = gl.truncate(u)
    assert t.modulus.max() <= 1.0 + 1e-15
    inside = u.modulus <= 1.0
    np.testing.assert_array_equal(t.values[inside], u.values[inside])
    # truncation does not increase the energy
    assert gl.energy_value(t) <= gl.energy_value(u)


def test_exact_torus_solution_residual_decays():
    res = []
    for m in (16, 32, 64):
        mesh = flat_torus(2, m)
        eps = 0.05
        a = math.sqrt(1 - eps**2)
        x = mesh.vertices[:, 0]
        u = gl.ComplexField(a * np.column_stack([np.cos(x), np.sin(x)]), eps, mesh)
        res.append(gl.gl_residual(u))
    assert res[0] / res[1] > 3.5 and res[1] / res[2] > 3.5


def test_field_roundtrip(tmp_path, torus2, rng):
    u = gl.ComplexField(rng.normal(size=(torus2.n_vertices, 2)), 0.125, torus2)
    u.save(tmp_path / "u.txt")
    back = gl.ComplexField.load(tmp_path / "u.txt", torus2)
    np.testing.assert_array_equal(back.values, u.values)
    assert back.eps == u.eps


def test_field_rejects_other_mesh(tmp_path, torus2, sphere):
    u = gl.ComplexField.constant(torus2, [1, 0], 0.1)
    u.save(tmp_path / "u.txt")
    with pytest.raises(GLError):
        gl.ComplexField.load(tmp_path / "u.txt", sphere)


def test_field_validation(torus2):
    with pytest.raises(GLError):
        gl.ComplexField(np.zeros((3, 2)), 0.1, torus2)
    with pytest.raises(GLError):
        gl.ComplexField(np.zeros((torus2.n_vertices, 2)), -0.1, torus2)
    bad = np.zeros((torus2.n_vertices, 2))
    bad[0, 0] = np.nan
    with pytest.raises(GLError):
        gl.ComplexField(bad, 0.1, torus2)


def test_stress_energy_constant_field(sphere):
    u = gl.ComplexField.constant(sphere, [1, 0], 0.1)
    s = gl.stress_energy(u)
    assert np.abs(s.residuals).max() < 1e-12
    assert len(s.names) == len(s.residuals)


def test_stress_energy_exact_solution_small():
    mesh = flat_torus(2, 32)
    eps = 0.1
    a = math.sqrt(1 - eps**2)
    x = mesh.vertices[:, 0]
    u = gl.ComplexField(a * np.column_stack([np.cos(x), np.sin(x)]), eps, mesh)
    s = gl.stress_energy(u)
    total = gl.energy_value(u)
    assert np.abs(s.residuals).max() < 1e-2 * total


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_batch_matches_single(seed):
    mesh = flat_torus(2, 8)
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(3, mesh.n_vertices, 2))
    batch = gl.BatchEnergy(mesh, 0.25)
    E, G = batch.energy_grad(U)
    for i in range(3):
        u = gl.ComplexField(U[i], 0.25, mesh)
        assert E[i] == pytest.approx(gl.energy_value(u), rel=1e-13)
        np.testing.assert_allclose(G[i], gl.gradient(u), rtol=1e-12, atol=1e-12)

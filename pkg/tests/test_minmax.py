from __future__ import annotations

import math

import numpy as np
import pytest

from glminmax import glenergy as gl
from glminmax.errors import ConfigError, ConvergenceError, ResolutionError
from glminmax.manifold import flat_torus
from glminmax.minmax import (
    FlowConfig,
    _PeriodicSolver,
    cepsilon_sweep,
    check_eps_list,
    minmax,
    morse_index,
    pull_down,
    refine_to_critical,
)
from glminmax.sweepfamily import build_family, build_sweep_map


@pytest.fixture(scope="module")
def torus():
    return flat_torus(2, 16)


@pytest.fixture(scope="module")
def family(torus):
    return build_family(torus, build_sweep_map(torus, seed=0), 0.3, (4, 12))


def test_flow_config_validation():
    with pytest.raises(ConfigError):
        FlowConfig(step=0)
    with pytest.raises(ConfigError):
        FlowConfig(window=5)
    with pytest.raises(ConfigError):
        FlowConfig(max_iter=-1)


def test_periodic_solver_exact(torus):
    eps = 0.3
    solver = _PeriodicSolver(torus, eps)
    P = torus.dec.stiffness + np.diag(torus.dec.star0) / eps**2
    b = np.random.default_rng(1).normal(size=(torus.n_vertices, 3))
    x = solver.solve(b)
    assert np.abs(P @ x - b).max() < 1e-10 * np.abs(b).max()


def test_pull_down_monotone_and_pinned(family):
    flowed, hist = pull_down(family, FlowConfig(max_iter=40))
    assert np.all(np.diff(hist.max_energy) <= 1e-12 * hist.max_energy[0])
    flowed.check_boundary()
    assert hist.max_energy[-1] < family.energies().max()
    # the input family is not modified
    family.check_boundary()
    assert family.energies().max() == pytest.approx(family.constants["max_energy"])


def test_pull_down_zero_iterations(family):
    flowed, hist = pull_down(family, FlowConfig(max_iter=0, truncate=False))
    np.testing.assert_array_equal(flowed.fields, family.fields)
    assert hist.iterations == 0


def test_refine_exact_solution():
    mesh = flat_torus(2, 32)
    eps = 0.2
    x = mesh.vertices[:, 0]
    rng = np.random.default_rng(2)
    start = 0.9 * np.column_stack([np.cos(x), np.sin(x)]) + 0.01 * rng.normal(size=(mesh.n_vertices, 2))
    ref = refine_to_critical(gl.ComplexField(start, eps, mesh), tol=1e-9)
    assert ref.residual <= 1e-9
    assert gl.gl_residual(ref.field) == pytest.approx(ref.residual, rel=1e-6, abs=1e-12)
    # degree-one critical point: constant modulus close to sqrt(1 - eps^2)
    assert np.ptp(ref.field.modulus) < 1e-6
    assert ref.field.modulus.mean() == pytest.approx(math.sqrt(1 - eps**2), rel=1e-2)


def test_refine_failure_carries_best():
    mesh = flat_torus(2, 16)
    u = gl.truncate(gl.ComplexField(np.random.default_rng(3).normal(size=(mesh.n_vertices, 2)), 0.3, mesh))
    with pytest.raises(ConvergenceError) as info:
        refine_to_critical(u, tol=1e-30, max_iter=2, free_steps=1)
    assert info.value.best is not None
    assert info.value.residual is not None


def test_morse_index_constant_and_zero(torus):
    u = gl.ComplexField.constant(torus, [1.0, 0.0], 0.3)
    assert morse_index(u, k=6)[0] == 0
    # at u = 0 the second variation is K - M/eps^2; with eps large only
    # the constants lie below 1/eps^2, once per real component
    z = gl.ComplexField.constant(torus, [0.0, 0.0], 1.5)
    assert morse_index(z, k=6)[0] == 2


def test_check_eps_list(torus):
    assert check_eps_list(torus, [0.3, 0.2]) == [0.3, 0.2]
    with pytest.raises(ConfigError):
        check_eps_list(torus, [0.2, 0.3])
    with pytest.raises(ConfigError):
        check_eps_list(torus, [0.2, -0.1])
    with pytest.raises(ResolutionError):
        check_eps_list(torus, [0.01])


def test_minmax_small_run(family):
    res = minmax(family, FlowConfig(max_iter=150), tol=1e-8, index_k=6)
    assert res.residual <= 1e-8
    assert res.energy_refined > 0
    assert res.c_estimate <= family.constants["max_energy"]
    assert res.max_node not in np.flatnonzero(family.boundary)
    assert res.morse_index >= 0
    assert res.family is not None
    res.family.check_boundary()


def test_sweep_fit(torus):
    sweep = build_sweep_map(torus, seed=0)
    table = cepsilon_sweep(torus, sweep, [0.6, 0.4], FlowConfig(max_iter=60), (3, 8), index_k=0)
    assert len(table.results) == 2
    x = [r.log_eps for r in table.results]
    y = [r.c_estimate for r in table.results]
    assert table.C1 == pytest.approx((y[1] - y[0]) / (x[1] - x[0]))
    assert len(list(table.rows(with_time=False))[0]) == 7

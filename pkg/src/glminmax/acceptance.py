"""Acceptance checks for the library, one function per criterion.

Run ``python3 -m glminmax.acceptance [numbers...]`` to print one PASS/FAIL
line per criterion.  The expensive pipeline results (the sphere sweep and a
critical point on the 3-torus) are computed once per process and shared.
"""

from __future__ import annotations

import contextlib
import io
import math
import sys
import tempfile
import time
from dataclasses import dataclass
from functools import cache
from pathlib import Path

import numpy as np

from . import concentration as cc
from . import glenergy as gl
from .manifold import flat_torus, poincare_constant, unit_sphere
from .minmax import FlowConfig, MinMaxResult, cepsilon_sweep, minmax, refine_to_critical
from .sweepfamily import build_family, build_sweep_map

SPHERE_K = 4
SPHERE_EPS = (0.2, 0.1, 0.05)
SPHERE_GRID = (8, 24)
TORUS3_M = 16
TORUS3_EPS = 0.3
TOL = 1e-8
FLOW = FlowConfig(max_iter=300)


@dataclass
class Outcome:
    number: int
    title: str
    ok: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.number:2d}. {self.title}: {self.detail}"


# ---------------------------------------------------------------------------
# shared computations


@cache
def sphere_mesh():
    return unit_sphere(SPHERE_K)


@cache
def sphere_sweep() -> tuple[MinMaxResult, ...]:
    mesh = sphere_mesh()
    sweep = build_sweep_map(mesh, seed=0)
    table = cepsilon_sweep(mesh, sweep, SPHERE_EPS, FLOW, SPHERE_GRID, TOL)
    return tuple(table.results)


@cache
def sphere_hodge():
    return tuple(cc.hodge_decompose(r.refined) for r in sphere_sweep())


@cache
def torus3_critical() -> MinMaxResult:
    mesh = flat_torus(3, TORUS3_M)
    sweep = build_sweep_map(mesh, seed=0)
    return minmax(build_family(mesh, sweep, TORUS3_EPS, (6, 16)), FLOW, TOL, index_k=0)


def remark_field(mesh, k: int, eps: float) -> gl.ComplexField:
    """(1 - k^2 eps^2)^(1/2) e^{ikx} on a flat torus."""
    a = math.sqrt(1.0 - k * k * eps * eps)
    x = mesh.vertices[:, 0]
    return gl.ComplexField(a * np.column_stack([np.cos(k * x), np.sin(k * x)]), eps, mesh)


@cache
def remark_refined(k: int = 1, eps: float = 0.05, m: int = 32) -> gl.ComplexField:
    return refine_to_critical(remark_field(flat_torus(2, m), k, eps), TOL).field


# ---------------------------------------------------------------------------
# criteria


def c01_gradient() -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    worst = 0.0
    t = 1e-5
    for mesh in (flat_torus(2, 32), flat_torus(3, 16), unit_sphere(3)):
        batch = gl.BatchEnergy(mesh, 0.2)
        for _ in range(20):
            U = rng.normal(scale=0.8, size=(1, mesh.n_vertices, 2))
            Vd = rng.normal(size=U.shape)
            _, G = batch.energy_grad(U)
            Ep = batch.energy(U + t * Vd)[0]
            Em = batch.energy(U - t * Vd)[0]
            fd = (Ep - Em) / (2 * t)
            an = float(np.sum(G[0] * Vd))
            worst = max(worst, abs(fd - an) / abs(an))
    return worst <= 1e-6, f"max relative error {worst:.2e} (limit 1e-6)"


def c02_exact_solutions() -> tuple[bool, str]:
    ratios = []
    for k in (1, 2):
        r = [gl.gl_residual(remark_field(flat_torus(2, m), k, 0.05)) for m in (32, 64)]
        ratios.append(r[0] / r[1])
    ok = all(x >= 3.5 for x in ratios)
    return ok, "residual ratios m=32->64: " + ", ".join(f"k={k}: {x:.3f}" for k, x in
                                                      zip((1, 2), ratios)) + " (need >= 3.5)"


def c03_vortex_law() -> tuple[bool, str]:
    from .cli import main

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(["vortex-law", "1e-2", "1e-3", "1e-4"])
    slope = float(buf.getvalue().split("slope")[1].split()[0])
    rel = abs(slope - math.pi) / math.pi
    return code == 0 and rel <= 0.02, f"slope {slope:.6f}, relative deviation from pi {rel:.2e}"


def c04_energy_scaling() -> tuple[bool, str]:
    res = sphere_sweep()
    norm = np.array([r.normalized for r in res])
    positive = all(r.energy_refined > 0 for r in res)
    nontrivial = all(r.min_modulus**2 < 7 / 8 for r in res)
    band = norm.max() / norm.min() if norm.min() > 0 else math.inf
    ok = positive and nontrivial and band <= 3.0
    parts = [f"eps={r.eps}: E={r.energy_refined:.4f}, E/|log eps|={r.normalized:.4f}, "
             f"min|u|^2={r.min_modulus**2:.3f}" for r in res]
    return ok, "; ".join(parts) + f"; band factor {band:.3f} (limit 3)"


def _critical_points():
    pts = [(f"S2 eps={r.eps}", r.refined) for r in sphere_sweep()]
    pts.append((f"T3 eps={TORUS3_EPS}", torus3_critical().refined))
    pts.append(("T2 exact k=1", remark_refined()))
    return pts


def c05_divergence_free() -> tuple[bool, str]:
    vals = [(name, cc.prejacobian(u).div_residual) for name, u in _critical_points()]
    worst = max(v for _, v in vals)
    return worst <= 10 * TOL, f"max ||d*ju|| {worst:.2e} (limit {10 * TOL:.0e}) over {len(vals)} points"


def c06_bochner() -> tuple[bool, str]:
    details, ok = [], True
    pts = [(n, u) for n, u in _critical_points() if not n.startswith("T2")]
    for k in (1, 2):
        pts.append((f"T2 exact k={k}", remark_field(flat_torus(2, 32), k, 0.05)))
    for name, u in pts:
        b = cc.bochner_check(u, 0.0)
        limit = 5 * u.mesh.h**2 / u.eps**2
        ok &= b.max_defect <= limit
        details.append(f"{name}: {b.max_defect:.3g} <= {limit:.3g}")
    return ok, "; ".join(details)


def c07_hodge() -> tuple[bool, str]:
    ratios = [p.norms["h"] / p.norms["gamma"] for p in sphere_hodge()]
    tor = cc.hodge_decompose(remark_refined())
    tr = tor.norms["h"] / tor.norms["gamma"]
    ok = max(ratios) <= 1e-8 and tr >= 0.9
    return ok, (f"S2 max ||h||/||gamma|| {max(ratios):.2e} (limit 1e-8); "
                f"T2 exact ||h||/||gamma|| {tr:.4f} (need >= 0.9)")


def c08_dtheta() -> tuple[bool, str]:
    table = cc.dtheta_subcritical([(r.eps, p) for r, p in zip(sphere_sweep(), sphere_hodge())])
    half = table[:, 3]
    full = table[:, 4]
    growth = half[1:] / half[:-1]
    ok = bool(np.all(growth <= 2.0) and np.all(np.diff(full) < 0))
    return ok, ("int|dtheta|^2/|log eps|^(1/2) = " + ", ".join(f"{x:.3e}" for x in half)
                + "; growth " + ", ".join(f"{g:.2f}" for g in growth) + " (limit 2)"
                + "; per |log eps|: " + ", ".join(f"{x:.3e}" for x in full))


def c09_density() -> tuple[bool, str]:
    r = next(x for x in sphere_sweep() if x.eps == 0.05)
    u = r.refined
    mesh = u.mesh
    radii = np.linspace(3 * mesh.h, 0.5, 8)
    clusters = cc.zero_clusters(u)
    lumped = cc.vertex_energy(u)
    zero_min = min(cc.density_profile(u, cc.cluster_center(mesh, c), radii, lumped=lumped)
                   .values.min() for c in clusters) if clusters else 0.0
    ctrl = cc.far_vertex(mesh, clusters)
    cprof = cc.density_profile(u, ctrl, radii, lumped=lumped)
    ok = bool(clusters) and zero_min >= 0.5 and cprof.values.max() <= 0.1
    over = radii[cprof.values > 0.1]
    note = f", exceeds 0.1 for r >= {over.min():.3f}" if len(over) else ""
    return ok, (f"{len(clusters)} zero clusters, min density {zero_min:.3f} (need >= 0.5); "
                f"control vertex max density {cprof.values.max():.3f} (limit 0.1){note}")


def c10_barrier() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    details, ok = [], True
    analytic = {"flat_torus_2d": 1.0, "unit_sphere": 2.0}
    for mesh in (flat_torus(2, 32), unit_sphere(3)):
        lam = poincare_constant(mesh).lambda1
        m = mesh.dec.star0
        vol = m.sum()
        ok &= abs(lam - analytic[mesh.kind]) <= 0.02 * analytic[mesh.kind]
        worst = math.inf
        for eps in (0.2, 0.05):
            batch = gl.BatchEnergy(mesh, eps)
            bound = min(lam / 8.0, gl.potential_eval(np.array([0.5, 0.0]))[0] / eps**2) * vol / 2
            for _ in range(50):
                amp = 10 ** rng.uniform(-2, 0.5)
                U = amp * rng.normal(size=(mesh.n_vertices, 2))
                if rng.random() < 0.5:  # smooth component
                    X = mesh.vertices
                    w = rng.normal(size=(X.shape[1], 2))
                    U = amp * np.column_stack([np.cos(X @ w[:, 0]), np.sin(X @ w[:, 1])])
                U -= (m @ U) / vol
                worst = min(worst, batch.energy(U[None])[0] / bound)
        ok &= worst >= 1.0
        details.append(f"{mesh.kind}: lambda1={lam:.5f}, min E/bound={worst:.3f}")
    return ok, "; ".join(details) + " (100 fields per mesh)"


def c11_degree() -> tuple[bool, str]:
    mesh = flat_torus(2, 32)
    sweep = build_sweep_map(mesh, seed=0)
    mins = []
    for grid in ((4, 16), (8, 32), (16, 64)):
        fam = build_family(mesh, sweep, 0.1, grid)
        mins.append(float(np.hypot(*fam.averages().T).min()))
    ok = mins[-1] <= 0.1 and all(b <= a for a, b in zip(mins, mins[1:]))
    return ok, "min |average| over grids (4,16),(8,32),(16,64): " + ", ".join(f"{x:.4f}" for x in mins)


def c12_reproducibility() -> tuple[bool, str]:
    from .cli import RunConfig, run

    cfg = RunConfig(model="flat_torus_2d", resolution=32, eps=[0.2], grid=(4, 12),
                    flow=FlowConfig(max_iter=60), hodge=False, density=False,
                    ellipticity=False, bochner=False, stress=False)
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for name in ("a", "b"):
            code = run(cfg, Path(tmp) / name)
            outs.append((code, (Path(tmp) / name / "summary.tsv").read_bytes()))
    ok = outs[0][0] == outs[1][0] == 0 and outs[0][1] == outs[1][1]
    return ok, f"exit codes {outs[0][0]}, {outs[1][0]}; summaries identical: {outs[0][1] == outs[1][1]}"


CRITERIA = {
    1: ("gradient consistency", c01_gradient),
    2: ("exact torus solutions converge at O(h^2)", c02_exact_solutions),
    3: ("planar vortex energy law", c03_vortex_law),
    4: ("energy scaling on the sphere", c04_energy_scaling),
    5: ("divergence-free prejacobian", c05_divergence_free),
    6: ("Bochner gradient bound", c06_bochner),
    7: ("Hodge exactness and harmonic dichotomy", c07_hodge),
    8: ("dtheta subcriticality", c08_dtheta),
    9: ("density positivity and decay", c09_density),
    10: ("zero-average barrier and lambda1", c10_barrier),
    11: ("degree obstruction", c11_degree),
    12: ("reproducible summaries", c12_reproducibility),
}


def evaluate(number: int) -> Outcome:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # report, do not crash the listing
        ok, detail = False, f"error: {type(exc).__name__}: {exc}"
    return Outcome(number, title, bool(ok), detail, time.perf_counter() - t0)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    numbers = [int(a) for a in argv] or sorted(CRITERIA)
    outcomes = []
    for n in numbers:
        out = evaluate(n)
        print(out.line() + f" [{out.seconds:.1f}s]", flush=True)
        outcomes.append(out)
    passed = sum(o.ok for o in outcomes)
    print(f"{passed}/{len(outcomes)} criteria passed")
    return 0 if passed == len(outcomes) else 1


if __name__ == "__main__":
    sys.exit(main())

"""Diagnostics of energy concentration for critical fields.

Edge 1-forms live on the edges of the chain complex, 2-forms on its faces;
both use the diagonal Hodge stars of ``MeshManifold.dec``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import dijkstra

from .errors import ConvergenceError, ResolutionError
from .glenergy import ComplexField, energy_density, stress_energy
from .manifold import OMEGA, MeshManifold, components, harmonic_basis

SEVEN_EIGHTHS = 7.0 / 8.0
ZERO_MOD2 = 0.25
ETA0 = 0.01
DELTA0 = 0.5
LP_EXPONENTS = (1.1, 1.25)
XI_GROWTH_WARN = 2.0  # soft check on the d* xi tables


# ---------------------------------------------------------------------------
# edge bookkeeping


def edge_lookup(mesh: MeshManifold) -> dict[tuple[int, int], tuple[int, int]]:
    """Map an ordered vertex pair to (edge index, orientation sign)."""
    table = {}
    for k, (a, b) in enumerate(mesh.dec.edges):
        table[(int(a), int(b))] = (k, 1)
        table[(int(b), int(a))] = (k, -1)
    return table


def loop_integral(mesh: MeshManifold, form: np.ndarray, loop) -> float:
    """Sum of an edge 1-form along a closed vertex path (last vertex joins the first)."""
    table = edge_lookup(mesh)
    loop = list(loop)
    total = 0.0
    for a, b in zip(loop, loop[1:] + loop[:1]):
        k, s = table[(int(a), int(b))]
        total += s * form[k]
    return total


def _path_edges(mesh: MeshManifold) -> tuple[np.ndarray, np.ndarray]:
    """Edge index and sign of each step v_{i-1} -> v_i along every simplex."""
    table = edge_lookup(mesh)
    S = mesh.simplices
    idx = np.empty((len(S), mesh.dimension), dtype=np.int64)
    sgn = np.empty_like(idx)
    for i in range(mesh.dimension):
        for s, (a, b) in enumerate(zip(S[:, i], S[:, i + 1])):
            idx[s, i], sgn[s, i] = table[(int(a), int(b))]
    return idx, sgn


def sharp(mesh: MeshManifold, form: np.ndarray) -> np.ndarray:
    """Constant vector per simplex reproducing the form on the simplex path edges."""
    idx, sgn = _path_edges(mesh)
    incr = np.cumsum(form[idx] * sgn, axis=1)
    return np.einsum("sdn,sn->sd", mesh.grad_basis, incr)


def lp_norm(mesh: MeshManifold, form: np.ndarray, p: float) -> float:
    vec = sharp(mesh, form)
    mag = np.linalg.norm(vec, axis=1)
    return float(np.sum(mesh.simplex_volume * mag**p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# prejacobian


@dataclass
class PreJacobian:
    ju: np.ndarray = field(repr=False)  # edge 1-form
    divergence: np.ndarray = field(repr=False)  # d* ju, vertex function
    curl: np.ndarray = field(repr=False)  # d ju, face 2-form
    div_residual: float = 0.0

    def loop(self, mesh: MeshManifold, vertices) -> float:
        return loop_integral(mesh, self.ju, vertices)


def edge_current(u: ComplexField) -> np.ndarray:
    """u^1 du^2 - u^2 du^1 on each edge with u averaged over the endpoints.

    For the midpoint value this equals the cross product u_a x u_b.
    """
    e = u.mesh.dec.edges
    a, b = u.values[e[:, 0]], u.values[e[:, 1]]
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def prejacobian(u: ComplexField) -> PreJacobian:
    dec = u.mesh.dec
    ju = edge_current(u)
    div = dec.codiff1(ju)
    res = math.sqrt(float(np.dot(dec.star0 * div, div)))
    return PreJacobian(ju, div, dec.d1 @ ju, res)


def decomposition_defect(u: ComplexField) -> np.ndarray:
    """Per-simplex |u|^2|du|^2 - |ju|^2 - |u|^2|d|u||^2 with cell-constant u and du."""
    mesh = u.mesh
    G = mesh.simplex_gradients(u.values)  # (S, 2, d)
    ubar = u.values[mesh.simplices].mean(axis=1)
    m2 = np.einsum("si,si->s", ubar, ubar)
    jvec = ubar[:, 0, None] * G[:, 1] - ubar[:, 1, None] * G[:, 0]
    radial = np.einsum("si,sid->sd", ubar, G)  # |u| d|u|
    lhs = m2 * np.einsum("sid,sid->s", G, G)
    rhs = np.einsum("sd,sd->s", jvec, jvec) + np.einsum("sd,sd->s", radial, radial)
    return lhs - rhs


# ---------------------------------------------------------------------------
# Bochner bound and sublevel sets


@dataclass
class BochnerReport:
    defect: np.ndarray = field(repr=False)
    max_defect: float
    violating_fraction: float
    A: float


def bochner_check(u: ComplexField, A: float = 0.0) -> BochnerReport:
    """Per-simplex excess of |du|^2 over (1/eps^2 + A)(1 - |u|^2).

    |du|^2 is the squared P1 gradient, |u|^2 the mean of the vertex values.
    """
    mesh = u.mesh
    G = mesh.simplex_gradients(u.values)
    du2 = np.einsum("sid,sid->s", G, G)
    mod2 = np.einsum("vi,vi->v", u.values, u.values)[mesh.simplices].mean(axis=1)
    excess = du2 - (1.0 / u.eps**2 + A) * (1.0 - mod2)
    defect = np.maximum(excess, 0.0)
    return BochnerReport(defect, float(defect.max()), float(np.mean(defect > 0)), A)


def sublevel_volume(u: ComplexField, t_list) -> np.ndarray:
    """Rows (t, |{|u|^2 <= t}|, C(t) = volume (1 - t)^2 / eps^2) with lumped volumes."""
    t = np.asarray(t_list, dtype=float)
    if np.any((t < 0) | (t >= 1)):
        raise ValueError("sublevel thresholds must lie in [0, 1)")
    mod2 = np.einsum("vi,vi->v", u.values, u.values)
    m = u.mesh.dec.star0
    vol = np.array([m[mod2 <= x].sum() for x in t])
    return np.column_stack([t, vol, vol * (1.0 - t) ** 2 / u.eps**2])


# ---------------------------------------------------------------------------
# cutoff and modified current

# f = 1 on [0, 1/2], f = 1/t on [3/4, inf); in between f' rises to a plateau c
# on [1/2, 1/2 + CUT_RAMP] and is blended into -1/t^2 on [CUT_BLEND, 3/4] with
# the C^1 smoothstep s(x) = 3x^2 - 2x^3, so f is C^2 and |f'| <= 16/9.
CUT_LO, CUT_HI = 0.5, 0.75
CUT_RAMP = 0.05
CUT_BLEND = 0.72
_L = CUT_HI - CUT_BLEND
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _blend_parts(t):
    """Integrals from CUT_BLEND to t of 1 - s and of -s/tau^2 (s in the local variable)."""
    t = np.asarray(t, dtype=float)
    half = 0.5 * (t - CUT_BLEND)
    tau = CUT_BLEND + half[..., None] * (_GL_X + 1.0)
    s = _smoothstep((tau - CUT_BLEND) / _L)
    return (half * np.sum(_GL_W * (1.0 - s), axis=-1),
            half * np.sum(_GL_W * (-s / tau**2), axis=-1))


_PLATEAU_LEN = CUT_BLEND - CUT_LO - CUT_RAMP
_B_HI, _T_HI = _blend_parts(CUT_HI)
CUT_PLATEAU = float((1.0 / 3.0 - _T_HI) / (CUT_RAMP / 2.0 + _PLATEAU_LEN + _B_HI))


def cutoff(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    c = CUT_PLATEAU
    x = np.clip((t - CUT_LO) / CUT_RAMP, 0.0, 1.0)
    ramp = c * CUT_RAMP * (x**3 - x**4 / 2.0)  # integral of c s(x)
    plateau = c * np.clip(t - CUT_LO - CUT_RAMP, 0.0, _PLATEAU_LEN)
    tb = np.clip(t, CUT_BLEND, CUT_HI)
    b, tail = _blend_parts(tb)
    blend = c * b + tail
    inner = 1.0 + ramp + plateau + blend
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t <= CUT_LO, 1.0, np.where(t >= CUT_HI, 1.0 / t, inner))


def cutoff_derivative(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    c = CUT_PLATEAU
    x = np.clip((t - CUT_LO) / CUT_RAMP, 0.0, 1.0)
    s_ramp = 3 * x**2 - 2 * x**3
    s_blend = _smoothstep((t - CUT_BLEND) / _L)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mid = np.where(t < CUT_BLEND, c * s_ramp, (1.0 - s_blend) * c - s_blend / t**2)
        return np.where(t <= CUT_LO, 0.0, np.where(t >= CUT_HI, -1.0 / t**2, mid))


def modified_current(u: ComplexField) -> np.ndarray:
    """gamma = f(|u|^2) ju on edges, |u|^2 averaged over the endpoints."""
    e = u.mesh.dec.edges
    mod2 = np.einsum("vi,vi->v", u.values, u.values)
    return cutoff(0.5 * (mod2[e[:, 0]] + mod2[e[:, 1]])) * edge_current(u)


# ---------------------------------------------------------------------------
# Hodge decomposition


@dataclass
class HodgeParts:
    gamma: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    dtheta: np.ndarray = field(repr=False)
    dstar_xi: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    residual: float = 0.0  # distance of h from the harmonic space
    norms: dict = field(default_factory=dict)

    @property
    def dtheta_energy(self) -> float:
        return self.norms["dtheta"] ** 2


def _pinned_solve(A: sp.spmatrix, b: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Solve a singular symmetric system with one-dimensional kernel via a border."""
    k = sp.csr_matrix(kernel[:, None])
    B = sp.bmat([[A, k], [k.T, None]], format="csc")
    return spla.splu(B).solve(np.concatenate([b, [0.0]]))[:-1]


def hodge_decompose(u: ComplexField | None = None, gamma: np.ndarray | None = None,
                    mesh: MeshManifold | None = None, rtol: float = 1e-13) -> HodgeParts:
    """Split gamma = d theta + d* xi + h.

    theta solves the vertex Poisson problem with right side d* gamma; xi
    solves d d* xi = d gamma on 2-forms.  h is the remainder, and the
    reported residual is its distance from the discrete harmonic forms.
    ``gamma`` defaults to the modified current of ``u``.
    """
    if gamma is None:
        if u is None:
            raise ValueError("need a field or a 1-form")
        gamma = modified_current(u)
    mesh = mesh or u.mesh
    dec = mesh.dec
    gamma = np.asarray(gamma, dtype=float)

    rhs0 = dec.d0.T @ (dec.star1 * gamma)
    theta = _pinned_solve(dec.stiffness, rhs0, np.ones(mesh.n_vertices))
    theta -= theta.mean()
    dtheta = dec.d0 @ theta

    # psi = star2 xi solves (d1 star1^-1 d1^T) psi = d1 gamma
    A = (dec.d1 @ sp.diags(1.0 / dec.star1) @ dec.d1.T).tocsr()
    b = dec.d1 @ gamma
    if mesh.dimension == 2:
        psi = _pinned_solve(A, b, np.ones(A.shape[0]))
    else:
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            psi = np.zeros_like(b)
        else:
            pre = sp.diags(1.0 / A.diagonal())
            psi, info = spla.cg(A, b, rtol=rtol, atol=0.0, M=pre, maxiter=20 * A.shape[0])
            rel = np.linalg.norm(A @ psi - b) / bnorm
            if info != 0 and rel > 1e3 * rtol:
                raise ConvergenceError(f"2-form solve stopped at relative residual {rel:.3e}",
                                       residual=rel, iterations=info, best=psi)
    xi = psi / dec.star2
    dstar_xi = dec.codiff2(xi)
    h = gamma - dtheta - dstar_xi

    basis = harmonic_basis(mesh) if mesh.betti1_hint else np.zeros((len(gamma), 0))
    proj = basis @ (basis.T @ (dec.star1 * h))
    residual = dec.norm1(h - proj)
    norms = {
        "gamma": dec.norm1(gamma),
        "dtheta": dec.norm1(dtheta),
        "dstar_xi": dec.norm1(dstar_xi),
        "h": dec.norm1(h),
        "h_dtheta": abs(dec.inner1(h, dtheta)),
        "h_dstar_xi": abs(dec.inner1(h, dstar_xi)),
    }
    return HodgeParts(gamma, theta, xi, dtheta, dstar_xi, h, residual, norms)


def dtheta_subcritical(rows) -> np.ndarray:
    """Table of (eps, |log eps|, int|dtheta|^2, /|log eps|^(1/2), /|log eps|).

    ``rows`` is a sequence of (eps, HodgeParts) pairs, sorted here by
    decreasing eps.
    """
    rows = sorted(rows, key=lambda r: -r[0])
    if len(rows) < 3:
        raise ValueError("need at least three eps values")
    out = []
    for eps, parts in rows:
        L = abs(math.log(eps))
        d = parts.dtheta_energy
        out.append((eps, L, d, d / math.sqrt(L), d / L))
    return np.array(out)


def dstar_xi_table(rows, exponents=LP_EXPONENTS) -> np.ndarray:
    """Rows (eps, ||d* xi||_p for each p) for a sweep of (eps, mesh, HodgeParts)."""
    return np.array([[eps] + [lp_norm(mesh, parts.dstar_xi, p) for p in exponents]
                     for eps, mesh, parts in sorted(rows, key=lambda r: -r[0])])


# ---------------------------------------------------------------------------
# zero set and density profiles


def face_windings(u: ComplexField) -> tuple[np.ndarray, np.ndarray]:
    """Triangles of the simplices and the winding number of u around each."""
    mesh = u.mesh
    S = mesh.simplices
    tris = set()
    for i in range(S.shape[1]):
        for j in range(i + 1, S.shape[1]):
            for k in range(j + 1, S.shape[1]):
                tris.update(map(tuple, np.sort(S[:, [i, j, k]], axis=1).tolist()))
    T = np.array(sorted(tris), dtype=np.int64)
    ang = np.arctan2(u.values[:, 1], u.values[:, 0])
    total = np.zeros(len(T))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        d = ang[T[:, b]] - ang[T[:, a]]
        total += (d + np.pi) % (2 * np.pi) - np.pi
    return T, np.rint(total / (2 * np.pi)).astype(int)


def zero_clusters(u: ComplexField, threshold: float = ZERO_MOD2) -> list[np.ndarray]:
    """Adjacency clusters of near-zero vertices.

    A vertex belongs to the zero set if |u|^2 < threshold or if it lies on a
    triangle around which u winds; the second rule catches vortex cores that
    fall between vertices on coarse meshes.
    """
    mod2 = np.einsum("vi,vi->v", u.values, u.values)
    mask = mod2 < threshold
    T, w = face_windings(u)
    mask[T[w != 0].ravel()] = True
    return components(u.mesh, mask)


def cluster_center(mesh: MeshManifold, cluster: np.ndarray) -> int:
    """Vertex nearest the centroid of a cluster (circular mean on tori)."""
    X = mesh.vertices[cluster]
    if mesh.is_torus:
        ang = X * (2 * np.pi / mesh.period)
        c = np.arctan2(np.sin(ang).mean(0), np.cos(ang).mean(0)) % (2 * np.pi)
        c = c * mesh.period / (2 * np.pi)
        d = np.abs(mesh.vertices - c)
        d = np.minimum(d, mesh.period - d)
        dist = np.linalg.norm(d, axis=1)
    else:
        c = X.mean(0)
        c = c / np.linalg.norm(c)
        dist = np.linalg.norm(mesh.vertices - c, axis=1)
    return int(np.argmin(dist))


def vertex_energy(u: ComplexField) -> np.ndarray:
    """Energy lumped to vertices: each simplex shares its energy equally."""
    mesh = u.mesh
    e = energy_density(u) * mesh.simplex_volume
    n1 = mesh.simplices.shape[1]
    return np.bincount(mesh.simplices.ravel(), weights=np.repeat(e / n1, n1),
                       minlength=mesh.n_vertices)


@dataclass
class DensityProfile:
    center: int
    radii: np.ndarray
    values: np.ndarray  # mu(B_r) / (omega r^(n-2))
    masses: np.ndarray  # mu(B_r)


def density_profile(u: ComplexField, center: int, radii, *, lumped=None) -> DensityProfile:
    mesh = u.mesh
    radii = np.asarray(radii, dtype=float)
    floor = 3.0 * mesh.h
    if np.any(radii < floor * (1 - 1e-12)):
        raise ResolutionError(f"radii below the resolution floor 3h = {floor:.4g}")
    e = vertex_energy(u) if lumped is None else lumped
    dist = dijkstra(mesh.distance_graph, indices=int(center), limit=float(radii.max()))
    L = abs(math.log(u.eps))
    masses = np.array([e[dist <= r].sum() / L for r in radii])
    n = mesh.dimension
    values = masses / (OMEGA[n] * radii ** (n - 2))
    return DensityProfile(int(center), radii, values, masses)


def far_vertex(mesh: MeshManifold, clusters) -> int:
    """Vertex maximizing the graph distance to every cluster."""
    if not clusters:
        return 0
    src = np.concatenate(clusters)
    dist = dijkstra(mesh.distance_graph, indices=src, min_only=True)
    return int(np.argmax(dist))


@dataclass
class EllipticityFlags:
    eta0: float
    delta0: float
    ball_energy: np.ndarray = field(repr=False)
    low_energy: np.ndarray = field(repr=False)
    modulus_ok: np.ndarray = field(repr=False)
    threshold: float = SEVEN_EIGHTHS

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.low_energy & ~self.modulus_ok))


def ball_energies(u: ComplexField, radius: float, chunk: int = 256) -> np.ndarray:
    """Integral of e_eps over the graph ball of the given radius about every vertex."""
    mesh = u.mesh
    e = vertex_energy(u)
    out = np.empty(mesh.n_vertices)
    G = mesh.distance_graph
    for start in range(0, mesh.n_vertices, chunk):
        idx = np.arange(start, min(start + chunk, mesh.n_vertices))
        D = dijkstra(G, indices=idx, limit=radius)
        out[idx] = (np.isfinite(D) & (D <= radius)) @ e
    return out


def eta_ellipticity_scan(u: ComplexField, eta0: float = ETA0, delta0: float = DELTA0,
                         threshold: float = SEVEN_EIGHTHS) -> EllipticityFlags:
    if not u.eps < delta0:
        raise ValueError(f"need eps < delta0, got eps={u.eps}, delta0={delta0}")
    n = u.mesh.dimension
    E = ball_energies(u, delta0)
    low = delta0 ** (2 - n) * E <= eta0 * abs(math.log(u.eps / delta0))
    mod2 = np.einsum("vi,vi->v", u.values, u.values)
    return EllipticityFlags(eta0, delta0, E, low, mod2 >= threshold, threshold)


# ---------------------------------------------------------------------------
# report


@dataclass
class ConcentrationReport:
    eps: float
    scalars: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> {"columns": [...], "rows": [[...]]}
    forms: dict = field(default_factory=dict, repr=False)  # name -> array

    SCHEMA = "glminmax-concentration-v1"

    def to_json(self) -> str:
        doc = {
            "schema": self.SCHEMA,
            "eps": self.eps,
            "scalars": self.scalars,
            "tables": self.tables,
            "forms": {name: f"form_{name}.txt" for name in sorted(self.forms)},
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, arr in self.forms.items():
            np.savetxt(d / f"form_{name}.txt", np.asarray(arr), fmt="%.17g",
                       header=f"glminmax form {name}")
        (d / "report.json").write_text(self.to_json())

    @classmethod
    def load(cls, directory) -> ConcentrationReport:
        d = Path(directory)
        doc = json.loads((d / "report.json").read_text())
        if doc.get("schema") != cls.SCHEMA:
            raise ValueError(f"{d}: unknown report schema {doc.get('schema')!r}")
        forms = {name: np.loadtxt(d / fn) for name, fn in doc["forms"].items()}
        return cls(doc["eps"], doc["scalars"], doc["tables"], forms)


def analyze(u: ComplexField, *, hodge: bool = True, density: bool = True,
            ellipticity: bool = True, bochner: bool = True, stress: bool = True,
            eta0: float = ETA0, delta0: float = DELTA0, A: float | None = None,
            sublevels=(0.25, 0.5, 0.75)) -> ConcentrationReport:
    """Run the enabled diagnostics on one field."""
    mesh = u.mesh
    rep = ConcentrationReport(u.eps)
    pj = prejacobian(u)
    rep.scalars["div_ju"] = pj.div_residual
    rep.scalars["min_modulus"] = float(u.modulus.min())
    rep.scalars["decomposition_defect"] = float(np.abs(decomposition_defect(u)).max())
    rep.forms["ju"] = pj.ju
    sub = sublevel_volume(u, sublevels)
    rep.tables["sublevel"] = {"columns": ["t", "volume", "C"], "rows": sub.tolist()}

    if bochner:
        b = bochner_check(u, mesh.ricci_A if A is None else A)
        rep.scalars.update(bochner_max_defect=b.max_defect, bochner_fraction=b.violating_fraction)
    if hodge:
        hp = hodge_decompose(u)
        rep.scalars.update({f"hodge_{k}": v for k, v in hp.norms.items()})
        rep.scalars["hodge_residual"] = hp.residual
        rep.scalars["dtheta_energy"] = hp.dtheta_energy
        for p in LP_EXPONENTS:
            rep.scalars[f"dstar_xi_L{p}"] = lp_norm(mesh, hp.dstar_xi, p)
        rep.forms.update(gamma=hp.gamma, theta=hp.theta, dtheta=hp.dtheta,
                         dstar_xi=hp.dstar_xi, h=hp.h)
    if density:
        clusters = zero_clusters(u)
        rep.scalars["zero_clusters"] = len(clusters)
        radii = np.linspace(3.0 * mesh.h, max(delta0, 3.0 * mesh.h), 6)
        lumped = vertex_energy(u)
        rows = []
        for c in clusters:
            prof = density_profile(u, cluster_center(mesh, c), radii, lumped=lumped)
            rows += [[prof.center, r, v] for r, v in zip(prof.radii, prof.values)]
        ctrl = far_vertex(mesh, clusters)
        prof = density_profile(u, ctrl, radii, lumped=lumped)
        rep.scalars["control_vertex"] = ctrl
        rep.tables["density"] = {"columns": ["center", "radius", "density"], "rows": rows}
        rep.tables["control_density"] = {
            "columns": ["center", "radius", "density"],
            "rows": [[ctrl, r, v] for r, v in zip(prof.radii, prof.values)],
        }
    if ellipticity and u.eps < delta0:
        fl = eta_ellipticity_scan(u, eta0, delta0)
        rep.scalars.update(eta0=eta0, delta0=delta0, eta_low_energy=int(fl.low_energy.sum()),
                           eta_violations=fl.violations)
    if stress:
        st = stress_energy(u)
        rep.scalars["stress_max_residual"] = float(np.abs(st.residuals).max())
    return rep

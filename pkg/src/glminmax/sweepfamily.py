"""Admissible two-parameter families built from the planar model vortex.

A family assigns a field to every node of a polar grid over the closed unit
disk; nodes on the outer ring carry the constant map equal to their
parameter.  Interior nodes hold ``v_eps(f(x) + y / (1 - |y|))`` where ``f`` is
a generic linear projection of the embedded mesh onto a plane.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import FamilyError, MeshError, ResolutionError
from .glenergy import BatchEnergy, ComplexField
from .manifold import MeshManifold

RANK_TOL = 1e-6
MAX_DRAWS = 64
TRANSLATE_CLAMP = 10.0
MIN_QUADRATURE = 4


def model_vortex(z, eps: float) -> np.ndarray:
    """The degree-one model map: z/|z| outside the disk of radius eps, z/eps inside."""
    z = np.asarray(z, dtype=float)
    r = np.hypot(z[..., 0], z[..., 1])
    scale = 1.0 / np.maximum(r, eps)
    return z * scale[..., None]


def vortex_disk_energy(eps: float, R: float, quadrature_n: int = 64) -> float:
    """Planar GL energy of the model vortex on the disk of radius R.

    Radial Gauss-Legendre quadrature of the energy density: on the core
    |dv|^2 = 2/eps^2 plus the potential, outside |dv|^2 = 1/r^2 and W = 0.
    The outer integral is taken in the variable log r.
    """
    if not 0 < eps <= R:
        raise ValueError(f"need 0 < eps <= R, got eps={eps}, R={R}")
    if quadrature_n < MIN_QUADRATURE:
        raise ResolutionError(f"quadrature_n={quadrature_n} below minimum {MIN_QUADRATURE}")
    x, w = np.polynomial.legendre.leggauss(quadrature_n)

    # core: r in [0, eps]
    r = 0.5 * eps * (x + 1.0)
    s = r / eps
    dens = 1.0 / eps**2 + 0.25 * (1.0 - s**2) ** 2 / eps**2
    core = 0.5 * eps * np.sum(w * dens * 2.0 * math.pi * r)
    if R == eps:
        return float(core)

    # annulus: t = log r in [log eps, log R], dr = r dt
    a, b = math.log(eps), math.log(R)
    t = a + 0.5 * (b - a) * (x + 1.0)
    r = np.exp(t)
    dens = 0.5 / r**2
    outer = 0.5 * (b - a) * np.sum(w * dens * 2.0 * math.pi * r * r)
    return float(core + outer)


def vortex_law(eps_list, R: float = 1.0, quadrature_n: int = 64) -> dict:
    """Energies over an eps sweep and the least-squares slope against log(1/eps)."""
    eps_arr = np.asarray(eps_list, dtype=float)
    E = np.array([vortex_disk_energy(e, R, quadrature_n) for e in eps_arr])
    slope, intercept = np.polyfit(np.log(R / eps_arr), E, 1)
    return {"eps": eps_arr, "energy": E, "slope": float(slope), "intercept": float(intercept)}


# ---------------------------------------------------------------------------
# sweep maps


def embedding(mesh: MeshManifold) -> np.ndarray:
    """Bi-Lipschitz embedding of the vertices: R^3 for the sphere, circles for tori."""
    if not mesh.is_torus:
        return mesh.vertices.copy()
    x = mesh.vertices
    return np.concatenate([np.stack([np.cos(x[:, a]), np.sin(x[:, a])], axis=1)
                           for a in range(mesh.dimension)], axis=1)


@dataclass(eq=False)
class SweepMap:
    values: np.ndarray  # f at vertices, (V, 2)
    plane: np.ndarray  # orthonormal (L, 2)
    seed: int | None
    jmin: float
    lipschitz: float
    fiber_bound: float
    draws: int

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.values.min(axis=0), self.values.max(axis=0)
        return float(np.hypot(*(hi - lo)))


def _jacobians(mesh: MeshManifold, f: np.ndarray):
    G = mesh.simplex_gradients(f)  # (S, 2, d)
    sv = np.linalg.svd(G, compute_uv=False)  # (S, 2)
    jac = np.sqrt(np.abs(np.linalg.det(G @ G.transpose(0, 2, 1))))
    return jac, sv


def _edge_ratios(mesh: MeshManifold, f: np.ndarray) -> np.ndarray:
    pairs, lengths = mesh.graph_edges
    df = f[pairs[:, 1]] - f[pairs[:, 0]]
    return np.hypot(df[:, 0], df[:, 1]) / lengths


def fiber_measures(mesh: MeshManifold, f: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """(n-2)-measure of the level sets f^{-1}(z) of the piecewise-linear map.

    n = 2: number of preimage points; n = 3: total length of the level curve.
    """
    S = mesh.simplices
    F = f[S]  # (S, n+1, 2)
    A = np.concatenate([F.transpose(0, 2, 1), np.ones((len(S), 1, S.shape[1]))], axis=1)
    out = np.empty(len(samples))
    if mesh.dimension == 2:
        Ainv = np.linalg.inv(A)
        for k, z in enumerate(samples):
            lam = Ainv @ np.array([z[0], z[1], 1.0])
            out[k] = np.count_nonzero(np.all(lam >= 0.0, axis=1))
        return out
    pinv = np.linalg.pinv(A)  # (S, 4, 3)
    _, _, Vt = np.linalg.svd(A)
    kern = Vt[:, -1, :]  # (S, 4)
    # displacement of the level line per unit of the kernel parameter
    step = np.linalg.norm(np.einsum("si,sid->sd", kern[:, 1:], mesh.simplex_edges), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, z in enumerate(samples):
            lam = pinv @ np.array([z[0], z[1], 1.0])
            ratio = -lam / kern
            lo = np.where(kern > 0, ratio, -np.inf).max(axis=1)
            hi = np.where(kern < 0, ratio, np.inf).min(axis=1)
            seg = np.clip(hi - lo, 0.0, None)
            seg[~np.isfinite(seg)] = 0.0
            out[k] = float(np.sum(seg * step))
    return out


def build_sweep_map(mesh: MeshManifold, seed: int = 0, plane: np.ndarray | None = None,
                    n_samples: int = 15) -> SweepMap:
    """Project the embedded mesh onto a random 2-plane satisfying the rank conditions.

    Planes are drawn from a seeded generator until every simplex has a
    rank-2 Jacobian and every edge a rank-1 image (singular values and edge
    stretch at least RANK_TOL).  An explicit ``plane`` is used as given.
    """
    X = embedding(mesh)
    L = X.shape[1]
    rng = np.random.default_rng(seed)
    draws = 0
    while True:
        draws += 1
        if plane is None:
            Q, _ = np.linalg.qr(rng.standard_normal((L, 2)))
        else:
            Q = np.asarray(plane, dtype=float)
        f = X @ Q
        jac, sv = _jacobians(mesh, f)
        ok = sv[:, 1].min() >= RANK_TOL and _edge_ratios(mesh, f).min() >= RANK_TOL
        if ok:
            break
        if plane is not None:
            raise MeshError("the given plane fails the per-cell rank conditions")
        if draws >= MAX_DRAWS:
            raise MeshError(f"{MAX_DRAWS} consecutive projections failed the rank conditions")
    lo, hi = f.min(axis=0), f.max(axis=0)
    # offset grid avoids samples on simplex boundaries
    g = np.linspace(0.0, 1.0, n_samples + 2)[1:-1] + 0.5 / (n_samples * math.pi)
    gx, gy = np.meshgrid(lo[0] + g * (hi[0] - lo[0]), lo[1] + g * (hi[1] - lo[1]))
    fibers = fiber_measures(mesh, f, np.stack([gx.ravel(), gy.ravel()], axis=1))
    return SweepMap(
        values=f, plane=Q, seed=seed if plane is None else None,
        jmin=float(jac.min()), lipschitz=float(sv[:, 0].max()),
        fiber_bound=float(fibers.max()), draws=draws,
    )


# ---------------------------------------------------------------------------
# disk families


def polar_grid(n_r: int, n_t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parameters, ring index and angle index of every node; node 0 is the center."""
    if n_r < 1 or n_t < 3:
        raise FamilyError(f"grid ({n_r}, {n_t}) too small")
    params = [np.zeros(2)]
    ring = [0]
    angle = [0]
    for i in range(1, n_r + 1):
        r = i / n_r
        for j in range(n_t):
            t = 2.0 * math.pi * j / n_t
            y = np.array([math.cos(t), math.sin(t)])
            params.append(y if i == n_r else r * y)
            ring.append(i)
            angle.append(j)
    return np.array(params), np.array(ring), np.array(angle)


@dataclass(eq=False)
class DiskFamily:
    mesh: MeshManifold
    eps: float
    n_r: int
    n_t: int
    params: np.ndarray
    fields: np.ndarray  # (N, V, 2)
    sweep_seed: int | None = None
    constants: dict = field(default_factory=dict)

    @cached_property
    def _grid(self):
        return polar_grid(self.n_r, self.n_t)

    @property
    def ring(self) -> np.ndarray:
        return self._grid[1]

    @property
    def boundary(self) -> np.ndarray:
        return self.ring == self.n_r

    @property
    def n_nodes(self) -> int:
        return len(self.params)

    def node(self, i: int) -> ComplexField:
        return ComplexField(self.fields[i], self.eps, self.mesh)

    def energies(self) -> np.ndarray:
        return BatchEnergy(self.mesh, self.eps).energy(self.fields)

    def check_boundary(self) -> None:
        """Raise unless every boundary node is exactly the constant map y."""
        b = np.flatnonzero(self.boundary)
        if not np.array_equal(self.fields[b], np.broadcast_to(self.params[b][:, None, :],
                                                              self.fields[b].shape)):
            raise FamilyError("boundary nodes are not pinned to the constant maps y")

    def neighbor_pairs(self) -> np.ndarray:
        _, ring, angle = self._grid
        index = {(int(r), int(a)): k for k, (r, a) in enumerate(zip(ring, angle))}
        pairs = []
        for j in range(self.n_t):
            pairs.append((0, index[(1, j)]))
        for i in range(1, self.n_r + 1):
            for j in range(self.n_t):
                pairs.append((index[(i, j)], index[(i, (j + 1) % self.n_t)]))
                if i < self.n_r:
                    pairs.append((index[(i, j)], index[(i + 1, j)]))
        return np.array(pairs)

    def continuity_modulus(self) -> float:
        """Largest H^1 distance between adjacent nodes."""
        dec = self.mesh.dec
        pairs = self.neighbor_pairs()
        D = self.fields[pairs[:, 0]] - self.fields[pairs[:, 1]]
        l2 = np.einsum("pvi,pvi,v->p", D, D, dec.star0)
        K = dec.stiffness
        h1 = l2 + np.array([np.einsum("vi,vi->", d, K @ d) for d in D])
        return float(np.sqrt(h1.max()))

    def averages(self) -> np.ndarray:
        """Mean value of each node's field over M, shape (N, 2)."""
        m = self.mesh.dec.star0
        return np.einsum("nvi,v->ni", self.fields, m) / m.sum()

    # persistence: directory with one field file per saved node and an index
    def save(self, directory, nodes=None) -> None:
        """Write ``family.json`` and field files for ``nodes`` (default: all)."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        nodes = range(self.n_nodes) if nodes is None else sorted({int(k) for k in nodes})
        names = {}
        for k in nodes:
            name = f"node_{k:04d}.txt"
            self.node(k).save(d / name)
            names[str(k)] = name
        index = {
            "schema": "glminmax-family-v1",
            "eps": self.eps,
            "n_r": self.n_r,
            "n_t": self.n_t,
            "sweep_seed": self.sweep_seed,
            "constants": self.constants,
            "mesh": self.mesh.checksum,
            "params": self.params.tolist(),
            "boundary": np.flatnonzero(self.boundary).tolist(),
            "energies": self.energies().tolist(),
            "fields": names,
        }
        (d / "family.json").write_text(json.dumps(index, indent=1))

    @staticmethod
    def read_index(directory) -> dict:
        return json.loads((Path(directory) / "family.json").read_text())

    @classmethod
    def load(cls, directory, mesh: MeshManifold) -> DiskFamily:
        d = Path(directory)
        index = cls.read_index(d)
        if index["mesh"] != mesh.checksum:
            raise FamilyError("family was saved on a different mesh")
        n = len(index["params"])
        missing = [k for k in range(n) if str(k) not in index["fields"]]
        if missing:
            raise FamilyError(f"{len(missing)} of {n} node fields were not saved")
        fields = np.stack([ComplexField.load(d / index["fields"][str(k)], mesh).values
                           for k in range(n)])
        return cls(mesh, float(index["eps"]), int(index["n_r"]), int(index["n_t"]),
                   np.array(index["params"]), fields, index["sweep_seed"], index["constants"])


def translate(y: np.ndarray, clamp: float) -> np.ndarray:
    """y / (1 - |y|) with magnitude capped at ``clamp``."""
    r = np.hypot(y[..., 0], y[..., 1])
    with np.errstate(divide="ignore"):
        mag = np.where(r < 1.0, r / np.maximum(1.0 - r, 1e-300), np.inf)
    mag = np.minimum(mag, clamp)
    unit = np.divide(y, r[..., None], out=np.zeros_like(y), where=r[..., None] > 0)
    return unit * mag[..., None]


def certified_constants(sweep: SweepMap) -> tuple[float, float]:
    """Constants of the bound E <= C1 |log eps| + C2 from the coarea estimate.

    With H the fiber bound and J the Jacobian floor, the exterior part
    contributes (H/J) Lip^2 (pi/2) log(diam/eps) and the core (H/J) 9 pi/4.
    """
    ratio = sweep.fiber_bound / sweep.jmin
    c1 = ratio * sweep.lipschitz**2 * math.pi / 2.0
    c2 = ratio * (sweep.lipschitz**2 * math.pi / 2.0 * math.log(max(sweep.diameter, 1.0))
                  + 9.0 * math.pi / 4.0)
    return c1, c2


def build_family(mesh: MeshManifold, sweep: SweepMap, eps: float,
                 grid: tuple[int, int] = (8, 24)) -> DiskFamily:
    if not eps > 0:
        raise FamilyError(f"eps must be positive, got {eps}")
    n_r, n_t = grid
    params, ring, _ = polar_grid(n_r, n_t)
    clamp = TRANSLATE_CLAMP * sweep.diameter
    shift = translate(params, clamp)
    fields = model_vortex(sweep.values[None, :, :] + shift[:, None, :], eps)
    boundary = ring == n_r
    fields[boundary] = params[boundary][:, None, :]
    c1, c2 = certified_constants(sweep)
    family = DiskFamily(mesh, float(eps), n_r, n_t, params, np.ascontiguousarray(fields),
                        sweep.seed, {"C1": c1, "C2": c2, "jmin": sweep.jmin,
                                     "lipschitz": sweep.lipschitz,
                                     "fiber_bound": sweep.fiber_bound})
    family.constants["max_energy"] = float(family.energies().max())
    return family

"""Model manifolds and their discrete exterior calculus.

Three closed geometries are supported: the unit sphere (icosahedral
subdivision), and flat tori of side 2*pi in two and three dimensions
(uniform periodic grids).  Discrete 1-forms live on edges, 2-forms on
faces, and all Hodge stars are diagonal.

On the tori the chain complex is cubical (edges along the axes, square
faces, cubes) while cell-wise quantities such as gradients and energy
densities are evaluated on the Freudenthal/Kuhn simplicial subdivision of
each box.  With that subdivision the piecewise-linear stiffness matrix
coincides with ``d0.T @ star1 @ d0`` of the cubical complex, so both views
describe the same Dirichlet energy.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, MeshError

MODELS = ("unit_sphere", "flat_torus_2d", "flat_torus_3d")
TWO_PI = 2.0 * math.pi
MIN_GRID = 8
VOLUME_TOL = 1e-14

# unit (n-2)-ball volumes
OMEGA = {2: 1.0, 3: 2.0}
_HEADER_KEYS = {"kind", "dimension", "ambient", "vertices", "cells", "cell_size",
                "betti1", "ricci_A"}


@dataclass(eq=False)
class MeshManifold:
    """A closed, discretized Riemannian manifold.

    ``cells`` are triangles for the sphere and grid boxes (corner ``c`` at
    ``base + sum of unit steps for the set bits of c``) for the tori.
    """

    kind: str
    dimension: int
    vertices: np.ndarray
    cells: np.ndarray
    betti1_hint: int
    ricci_A: float = 0.0

    def __post_init__(self):
        if self.kind not in MODELS:
            raise MeshError(f"unknown model {self.kind!r}")
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if self.kind != "unit_sphere":
            m = round(self.n_vertices ** (1.0 / self.dimension))
            if m**self.dimension != self.n_vertices:
                raise MeshError("torus vertex count is not a perfect power")
            if m < MIN_GRID:
                raise MeshError(f"grid m={m} below minimum {MIN_GRID}")

    # -- basic sizes -------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def is_torus(self) -> bool:
        return self.kind != "unit_sphere"

    @property
    def grid_m(self) -> int:
        return round(self.n_vertices ** (1.0 / self.dimension))

    @property
    def period(self) -> float:
        return TWO_PI

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    # -- simplicial view ---------------------------------------------------
    @cached_property
    def _simplex_data(self):
        if not self.is_torus:
            simplices = self.cells.copy()
            X = self.vertices[simplices]
            edges = X[:, 1:, :] - X[:, :1, :]
            owner = np.arange(self.n_cells)
            return simplices, edges, owner
        n, m = self.dimension, self.grid_m
        h = TWO_PI / m
        simplices, edges, owner = [], [], []
        for perm in itertools.permutations(range(n)):
            bits = [0]
            vecs = []
            step = np.zeros(n)
            for a in perm:
                bits.append(bits[-1] | (1 << a))
                step = step.copy()
                step[a] += h
                vecs.append(step)
            simplices.append(self.cells[:, bits])
            edges.append(np.broadcast_to(np.array(vecs), (self.n_cells, n, n)))
            owner.append(np.arange(self.n_cells))
        # interleave so that the simplices of one box are contiguous
        simplices = np.stack(simplices, axis=1).reshape(-1, n + 1)
        edges = np.stack(edges, axis=1).reshape(-1, n, n)
        owner = np.stack(owner, axis=1).reshape(-1)
        return simplices, np.ascontiguousarray(edges), owner

    @property
    def simplices(self) -> np.ndarray:
        return self._simplex_data[0]

    @property
    def simplex_edges(self) -> np.ndarray:
        """Edge vectors ``x_i - x_0`` of each simplex, shape (S, n, d)."""
        return self._simplex_data[1]

    @property
    def simplex_cell(self) -> np.ndarray:
        return self._simplex_data[2]

    @cached_property
    def simplex_volume(self) -> np.ndarray:
        E = self.simplex_edges
        gram = E @ E.transpose(0, 2, 1)
        return np.sqrt(np.abs(np.linalg.det(gram))) / math.factorial(self.dimension)

    @cached_property
    def grad_basis(self) -> np.ndarray:
        """Per-simplex pseudo-inverse B with grad f = B @ (f_i - f_0), shape (S, d, n)."""
        E = self.simplex_edges
        gram = E @ E.transpose(0, 2, 1)
        return E.transpose(0, 2, 1) @ np.linalg.inv(gram)

    @cached_property
    def tangent_projector(self) -> np.ndarray:
        """Orthogonal projector of R^d onto each simplex plane, shape (S, d, d)."""
        return self.grad_basis @ self.simplex_edges

    @cached_property
    def simplex_centroids(self) -> np.ndarray:
        X0 = self.vertices[self.simplices[:, 0]]
        return X0 + self.simplex_edges.sum(axis=1) / (self.dimension + 1)

    def simplex_gradients(self, values: np.ndarray) -> np.ndarray:
        """Gradients of the piecewise-linear interpolant.

        ``values`` has shape (V,) or (V, k); the result has shape (S, d) or
        (S, k, d).
        """
        vals = values[self.simplices]
        diffs = vals[:, 1:] - vals[:, :1]
        if values.ndim == 1:
            return np.einsum("sdn,sn->sd", self.grad_basis, diffs)
        return np.einsum("sdn,snk->skd", self.grad_basis, diffs)

    @cached_property
    def vertex_mass(self) -> np.ndarray:
        """Lumped (barycentric) mass: each simplex gives vol/(n+1) to its vertices."""
        share = np.repeat(self.simplex_volume / (self.dimension + 1), self.dimension + 1)
        return np.bincount(self.simplices.ravel(), weights=share, minlength=self.n_vertices)

    @cached_property
    def total_volume(self) -> float:
        return float(self.simplex_volume.sum())

    # -- graph view (for geodesic balls) -----------------------------------
    @cached_property
    def graph_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique simplicial edges (i < j) and their metric lengths."""
        n = self.dimension
        pairs, lengths = [], []
        E = self.simplex_edges
        for a, b in itertools.combinations(range(n + 1), 2):
            va = np.zeros_like(E[:, 0]) if a == 0 else E[:, a - 1]
            vb = E[:, b - 1]
            pairs.append(np.stack([self.simplices[:, a], self.simplices[:, b]], axis=1))
            lengths.append(np.linalg.norm(vb - va, axis=1))
        pairs = np.sort(np.concatenate(pairs), axis=1)
        lengths = np.concatenate(lengths)
        key = pairs[:, 0] * self.n_vertices + pairs[:, 1]
        _, idx = np.unique(key, return_index=True)
        return pairs[idx], lengths[idx]

    @cached_property
    def distance_graph(self) -> sp.csr_matrix:
        pairs, lengths = self.graph_edges
        V = self.n_vertices
        G = sp.coo_matrix((lengths, (pairs[:, 0], pairs[:, 1])), shape=(V, V))
        return (G + G.T).tocsr()

    # -- calculus ----------------------------------------------------------
    @cached_property
    def dec(self) -> DECOperators:
        return assemble_dec(self)

    @property
    def h(self) -> float:
        """Mesh scale: mean primal edge length of the chain complex."""
        if self.is_torus:
            return TWO_PI / self.grid_m
        return float(self.dec.edge_length.mean())

    # -- persistence -------------------------------------------------------
    def to_text(self) -> str:
        lines = [
            "# glminmax mesh v1",
            f"kind {self.kind}",
            f"dimension {self.dimension}",
            f"ambient {self.ambient_dim}",
            f"vertices {self.n_vertices}",
            f"cells {self.n_cells}",
            f"cell_size {self.cells.shape[1]}",
            f"betti1 {self.betti1_hint}",
            f"ricci_A {self.ricci_A!r}",
            "# vertex block",
        ]
        lines.extend(" ".join(f"{x:.17g}" for x in row) for row in self.vertices)
        lines.append("# cell block")
        lines.extend(" ".join(str(int(i)) for i in row) for row in self.cells)
        return "\n".join(lines) + "\n"

    @cached_property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> MeshManifold:
        header: dict[str, str] = {}
        rows = []
        for line in text.splitlines():
            if not line or line.startswith("#"):
                continue
            head, _, rest = line.partition(" ")
            if head in _HEADER_KEYS:
                header[head] = rest.strip()
            else:
                rows.append(line)
        try:
            nv, nc = int(header["vertices"]), int(header["cells"])
            amb = int(header["ambient"])
        except KeyError as exc:
            raise MeshError(f"mesh header missing {exc}") from None
        if len(rows) != nv + nc:
            raise MeshError(f"expected {nv + nc} data rows, found {len(rows)}")
        verts = np.array([[float(x) for x in r.split()] for r in rows[:nv]]).reshape(nv, amb)
        cells = np.array([[int(x) for x in r.split()] for r in rows[nv:]], dtype=np.int64)
        mesh = cls(
            kind=header["kind"],
            dimension=int(header["dimension"]),
            vertices=verts,
            cells=cells,
            betti1_hint=int(header["betti1"]),
            ricci_A=float(header["ricci_A"]),
        )
        mesh.validate()
        return mesh

    @classmethod
    def load(cls, path) -> MeshManifold:
        return cls.from_text(Path(path).read_text())

    # -- checks ------------------------------------------------------------
    def validate(self) -> None:
        vol = self.simplex_volume
        scale = self.h ** self.dimension
        if np.any(vol <= VOLUME_TOL * scale):
            bad = int(np.argmin(vol))
            raise MeshError(f"degenerate simplex {bad} with volume {vol[bad]:.3e}")
        top = self.dec.d_top
        per_face = np.asarray(abs(top).sum(axis=0)).ravel()
        if not np.all(per_face == 2):
            raise MeshError("mesh is not closed: a codimension-1 face is not shared by two cells")


def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = np.array(verts, dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True), np.array(faces, dtype=np.int64)


def _subdivide(verts: np.ndarray, faces: np.ndarray):
    cache: dict[tuple[int, int], int] = {}
    new_verts = list(verts)

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            p = verts[a] + verts[b]
            new_verts.append(p / np.linalg.norm(p))
            cache[key] = len(new_verts) - 1
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(new_verts), np.array(out, dtype=np.int64)


def unit_sphere(k: int) -> MeshManifold:
    if k < 0:
        raise MeshError("refinement level must be >= 0")
    verts, faces = _icosahedron()
    for _ in range(k):
        verts, faces = _subdivide(verts, faces)
    # orient every triangle with an outward normal
    X = verts[faces]
    normal = np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0])
    flip = np.einsum("ij,ij->i", normal, X.sum(axis=1)) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return MeshManifold("unit_sphere", 2, verts, faces, betti1_hint=0, ricci_A=0.0)


def _grid_index(idx: np.ndarray, m: int) -> np.ndarray:
    """Flat index of integer grid coordinates (last axis), wrapped periodically."""
    idx = np.mod(idx, m)
    return sum(idx[..., a] * m**a for a in range(idx.shape[-1]))


def flat_torus(n: int, m: int) -> MeshManifold:
    if m < MIN_GRID:
        raise MeshError(f"grid m={m} is below the usable resolution {MIN_GRID}")
    coords = np.stack(np.meshgrid(*[np.arange(m)] * n, indexing="ij"), axis=-1)
    # flat index i0 + m*i1 + ...: transpose so that axis 0 varies fastest
    coords = coords.transpose(*reversed(range(n)), n).reshape(-1, n)
    verts = coords * (TWO_PI / m)
    corners = np.array([[(c >> a) & 1 for a in range(n)] for c in range(2**n)])
    cells = _grid_index(coords[:, None, :] + corners[None, :, :], m)
    kind = "flat_torus_2d" if n == 2 else "flat_torus_3d"
    return MeshManifold(kind, n, verts, cells, betti1_hint=n, ricci_A=0.0)


def build_model(model: str, resolution: int) -> MeshManifold:
    """Build one of the model geometries.

    ``resolution`` is the subdivision level k for ``unit_sphere`` and the
    grid size m for the tori.
    """
    if model == "unit_sphere":
        mesh = unit_sphere(resolution)
    elif model == "flat_torus_2d":
        mesh = flat_torus(2, resolution)
    elif model == "flat_torus_3d":
        mesh = flat_torus(3, resolution)
    else:
        raise MeshError(f"unknown model {model!r}; expected one of {MODELS}")
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# discrete exterior calculus


@dataclass(eq=False)
class DECOperators:
    d0: sp.csr_matrix
    d1: sp.csr_matrix
    d2: sp.csr_matrix | None
    star0: np.ndarray
    star1: np.ndarray
    star2: np.ndarray
    star3: np.ndarray | None
    edges: np.ndarray
    edge_length: np.ndarray

    @property
    def d_top(self) -> sp.csr_matrix:
        return self.d2 if self.d2 is not None else self.d1

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """K = d0^T star1 d0; the Dirichlet form of vertex functions."""
        return (self.d0.T @ sp.diags(self.star1) @ self.d0).tocsr()

    # codifferentials (adjoints of d under the star inner products)
    def codiff1(self, alpha: np.ndarray) -> np.ndarray:
        """d* on 1-forms, returns a vertex function."""
        return (self.d0.T @ (self.star1 * alpha)) / self.star0

    def codiff2(self, xi: np.ndarray) -> np.ndarray:
        """d* on 2-forms, returns a 1-form."""
        return (self.d1.T @ (self.star2 * xi)) / self.star1

    def codiff3(self, omega: np.ndarray) -> np.ndarray:
        return (self.d2.T @ (self.star3 * omega)) / self.star2

    def inner0(self, a, b) -> float:
        return float(np.dot(self.star0 * a, b))

    def inner1(self, a, b) -> float:
        return float(np.dot(self.star1 * a, b))

    def inner2(self, a, b) -> float:
        return float(np.dot(self.star2 * a, b))

    def norm1(self, a) -> float:
        return math.sqrt(max(self.inner1(a, a), 0.0))

    def scalar_laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.codiff1(self.d0 @ f)

    def hodge_laplacian1(self, alpha: np.ndarray) -> np.ndarray:
        return self.d0 @ self.codiff1(alpha) + self.codiff2(self.d1 @ alpha)

    @cached_property
    def hodge1_symmetric(self) -> sp.csr_matrix:
        """star1 @ Delta_H on 1-forms (symmetric positive semidefinite)."""
        S1 = sp.diags(self.star1)
        A = S1 @ self.d0 @ sp.diags(1.0 / self.star0) @ self.d0.T @ S1
        A = A + self.d1.T @ sp.diags(self.star2) @ self.d1
        return A.tocsr()

    @cached_property
    def hodge2_symmetric(self) -> sp.csr_matrix:
        """star2 @ Delta_H on 2-forms (symmetric positive semidefinite)."""
        S2 = sp.diags(self.star2)
        A = S2 @ self.d1 @ sp.diags(1.0 / self.star1) @ self.d1.T @ S2
        if self.d2 is not None:
            A = A + self.d2.T @ sp.diags(self.star3) @ self.d2
        return A.tocsr()


def _incidence(rows: np.ndarray, cols: np.ndarray, signs: np.ndarray, shape) -> sp.csr_matrix:
    return sp.csr_matrix((signs.astype(float), (rows, cols)), shape=shape)


def _sphere_dec(mesh: MeshManifold) -> DECOperators:
    F = mesh.cells
    V = mesh.n_vertices
    directed = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    lo, hi = directed.min(axis=1), directed.max(axis=1)
    key = lo * V + hi
    uniq, inv = np.unique(key, return_inverse=True)
    edges = np.stack([uniq // V, uniq % V], axis=1)
    E = len(edges)
    ne = np.arange(E)
    d0 = _incidence(np.repeat(ne, 2), edges.ravel(), np.tile([-1, 1], E), (E, V))
    nf = len(F)
    sign = np.where(directed[:, 0] == lo, 1, -1)
    d1 = _incidence(np.tile(np.arange(nf), 3), inv, sign, (nf, E))

    X = mesh.vertices[F]
    area = 0.5 * np.linalg.norm(np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), axis=1)
    # cotangent of the angle opposite each of the three directed edges
    cot = np.empty((nf, 3))
    for k, (a, b, c) in enumerate([(0, 1, 2), (1, 2, 0), (2, 0, 1)]):
        u, v = X[:, a] - X[:, c], X[:, b] - X[:, c]
        cot[:, k] = np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
    star1 = 0.5 * np.bincount(inv, weights=cot.T.ravel(), minlength=E)
    length = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    return DECOperators(
        d0=d0, d1=d1, d2=None,
        star0=mesh.vertex_mass.copy(), star1=star1, star2=1.0 / area, star3=None,
        edges=edges, edge_length=length,
    )


def _torus_dec(mesh: MeshManifold) -> DECOperators:
    n, m = mesh.dimension, mesh.grid_m
    V = mesh.n_vertices
    h = TWO_PI / m
    coords = np.round(mesh.vertices / h).astype(np.int64)
    unit = np.eye(n, dtype=np.int64)
    v = np.arange(V)

    def shift(a):
        return _grid_index(coords + unit[a], m)

    # edges: index a*V + v, oriented along +e_a
    E = n * V
    rows = np.concatenate([a * V + v for a in range(n)])
    tails = np.concatenate([v for _ in range(n)])
    heads = np.concatenate([shift(a) for a in range(n)])
    d0 = _incidence(np.concatenate([rows, rows]), np.concatenate([tails, heads]),
                    np.concatenate([-np.ones(E), np.ones(E)]), (E, V))
    edges = np.stack([tails, heads], axis=1)

    planes = list(itertools.combinations(range(n), 2))
    nf = len(planes) * V
    r, c, s = [], [], []
    for p, (a, b) in enumerate(planes):
        f = p * V + v
        for col, sign in ((a * V + v, 1), (b * V + shift(a), 1),
                          (a * V + shift(b), -1), (b * V + v, -1)):
            r.append(f), c.append(col), s.append(np.full(V, sign))
    d1 = _incidence(np.concatenate(r), np.concatenate(c), np.concatenate(s), (nf, E))

    d2 = None
    star3 = None
    if n == 3:
        r, c, s = [], [], []
        for k in range(3):
            others = tuple(x for x in range(3) if x != k)
            p = planes.index(others)
            sign = (-1) ** k
            r += [v, v]
            c += [p * V + shift(k), p * V + v]
            s += [np.full(V, sign), np.full(V, -sign)]
        d2 = _incidence(np.concatenate(r), np.concatenate(c), np.concatenate(s), (V, nf))
        star3 = np.full(V, h ** -3.0)

    star2 = np.full(nf, h ** -2.0 if n == 2 else 1.0 / h)
    return DECOperators(
        d0=d0, d1=d1, d2=d2,
        star0=np.full(V, h**n), star1=np.full(E, h ** (n - 2.0)), star2=star2, star3=star3,
        edges=edges, edge_length=np.full(E, h),
    )


def assemble_dec(mesh: MeshManifold) -> DECOperators:
    dec = _torus_dec(mesh) if mesh.is_torus else _sphere_dec(mesh)
    if np.any(dec.star1 <= 0):
        raise MeshError("non-positive primal-dual edge ratio; mesh is not well centered")
    return dec


# ---------------------------------------------------------------------------
# spectral data


@dataclass(frozen=True)
class SpectralInfo:
    lambda1: float
    harmonic_dim: int
    low_eigenvalues: tuple[float, ...]
    hodge_eigenvalues: tuple[float, ...]


def _start_vector(size: int) -> np.ndarray:
    return np.random.default_rng(12345).standard_normal(size)


def _lowest(A: sp.spmatrix, M: sp.spmatrix, k: int, sigma: float) -> np.ndarray:
    try:
        vals = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM",
                          v0=_start_vector(A.shape[0]), return_eigenvectors=False,
                          maxiter=5000, tol=1e-12)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"eigen-solver did not converge ({len(exc.eigenvalues)} of {k} eigenvalues)",
            iterations=5000,
        ) from None
    return np.sort(vals)


def harmonic_basis(mesh: MeshManifold, dec: DECOperators | None = None) -> np.ndarray:
    """Star1-orthonormal basis of discrete harmonic 1-forms, shape (E, b1)."""
    dec = dec or mesh.dec
    A = dec.hodge1_symmetric
    M = sp.diags(dec.star1).tocsc()
    k = mesh.betti1_hint + 3
    vals, vecs = spla.eigsh(A, k=k, M=M, sigma=-0.1, which="LM", v0=_start_vector(A.shape[0]),
                            maxiter=5000, tol=1e-12)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    scale = max(vals[-1], 1.0)
    keep = np.abs(vals) < 1e-6 * scale
    basis = vecs[:, keep]
    # re-orthonormalize in the star1 inner product
    if basis.shape[1]:
        G = basis.T @ (dec.star1[:, None] * basis)
        L = np.linalg.cholesky(G)
        basis = np.linalg.solve(L, basis.T).T
    return basis


def poincare_constant(mesh: MeshManifold, dec: DECOperators | None = None) -> SpectralInfo:
    dec = dec or mesh.dec
    K = dec.stiffness
    M = sp.diags(dec.star0).tocsc()
    low = _lowest(K, M, k=6, sigma=-0.1)
    scale = max(abs(low[-1]), 1e-300)
    nonzero = low[np.abs(low) > 1e-8 * scale]
    if not len(nonzero):
        raise ConvergenceError("no nonzero eigenvalue found among the lowest six")
    A = dec.hodge1_symmetric
    S1 = sp.diags(dec.star1).tocsc()
    hodge = _lowest(A, S1, k=mesh.betti1_hint + 3, sigma=-0.1)
    hscale = max(hodge[-1], 1.0)
    harmonic = int(np.sum(np.abs(hodge) < 1e-6 * hscale))
    return SpectralInfo(
        lambda1=float(nonzero[0]),
        harmonic_dim=harmonic,
        low_eigenvalues=tuple(float(x) for x in low),
        hodge_eigenvalues=tuple(float(x) for x in hodge),
    )


def components(mesh: MeshManifold, mask: np.ndarray) -> list[np.ndarray]:
    """Connected clusters (along graph edges) of the vertices selected by ``mask``."""
    idx = np.flatnonzero(mask)
    if not len(idx):
        return []
    G = mesh.distance_graph[idx][:, idx]
    ncomp, labels = connected_components(G, directed=False)
    return [idx[labels == c] for c in range(ncomp)]

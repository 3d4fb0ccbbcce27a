"""The Ginzburg-Landau functional on a discretized manifold.

Energy of a vertex field u with values in R^2::

    E(u) = 1/2 (d0 u)^T star1 (d0 u) + eps^-2 sum_v m_v W(u_v)

The Dirichlet part equals the piecewise-linear (P1) Dirichlet integral and
the potential is mass-lumped, so ``gradient`` is the exact derivative of
``energy``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import GLError
from .manifold import MeshManifold

# W(z) = 9/4 + 6 tanh(|z| - 2) for |z| >= 2, matched C^1 to the quartic
OUTER_BASE = kernels._kernels_py.OUTER_BASE
OUTER_SLOPE = kernels._kernels_py.OUTER_SLOPE
DW_BOUND = OUTER_SLOPE  # sup |DW|, attained at |z| = 2


def potential_eval(z):
    """Return ``(W(z), DW(z))`` for a point or an array of points (..., 2)."""
    z = np.asarray(z, dtype=float)
    W, DW = kernels.potential(z)
    if z.ndim == 1:
        return float(W), DW
    return W, DW


def potential_hessian(z: np.ndarray) -> np.ndarray:
    """Second derivative of W at each point, shape (..., 2, 2)."""
    z = np.asarray(z, dtype=float)
    r2 = np.einsum("...i,...i->...", z, z)
    eye = np.eye(2)
    zz = z[..., :, None] * z[..., None, :]
    H = -(1.0 - r2)[..., None, None] * eye + 2.0 * zz
    outer = r2 >= 4.0
    if np.any(outer):
        r = np.sqrt(r2[outer])
        t = np.tanh(r - 2.0)
        d1 = OUTER_SLOPE * (1.0 - t * t)
        d2 = -2.0 * OUTER_SLOPE * t * (1.0 - t * t)
        nn = zz[outer] / r2[outer][:, None, None]
        H[outer] = d2[:, None, None] * nn + (d1 / r)[:, None, None] * (eye - nn)
    return H


@dataclass(eq=False)
class ComplexField:
    """A vertex field u: M -> R^2 together with its length scale eps."""

    values: np.ndarray
    eps: float
    mesh: MeshManifold

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices, 2):
            raise GLError(f"field shape {self.values.shape} does not match mesh")
        if not self.eps > 0:
            raise GLError(f"eps must be positive, got {self.eps}")
        if not np.all(np.isfinite(self.values)):
            raise GLError("field has non-finite entries")

    def with_values(self, values: np.ndarray) -> ComplexField:
        return ComplexField(values, self.eps, self.mesh)

    @property
    def modulus(self) -> np.ndarray:
        return np.hypot(self.values[:, 0], self.values[:, 1])

    @classmethod
    def constant(cls, mesh: MeshManifold, z, eps: float) -> ComplexField:
        return cls(np.tile(np.asarray(z, dtype=float), (mesh.n_vertices, 1)), eps, mesh)

    # plain-text persistence: header, then one "re im" line per vertex
    def to_text(self) -> str:
        lines = [
            "# glminmax field v1",
            f"# eps {self.eps!r}",
            f"# mesh {self.mesh.checksum}",
            f"# vertices {self.mesh.n_vertices}",
        ]
        lines.extend(f"{a:.17g} {b:.17g}" for a, b in self.values)
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, mesh: MeshManifold) -> ComplexField:
        header, rows = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2:
                    header[parts[0]] = parts[1]
            elif line.strip():
                rows.append(line)
        if header.get("mesh") != mesh.checksum:
            raise GLError(f"{path}: field was saved on a different mesh")
        values = np.array([[float(x) for x in r.split()] for r in rows])
        return cls(values.reshape(-1, 2), float(header["eps"]), mesh)


def _edge_arrays(mesh: MeshManifold):
    dec = mesh.dec
    tail = np.ascontiguousarray(dec.edges[:, 0], dtype=np.int64)
    head = np.ascontiguousarray(dec.edges[:, 1], dtype=np.int64)
    return tail, head, np.ascontiguousarray(dec.star1), np.ascontiguousarray(dec.star0)


class BatchEnergy:
    """Energy and gradient of many fields on one mesh at one eps."""

    def __init__(self, mesh: MeshManifold, eps: float):
        self.mesh = mesh
        self.eps = float(eps)
        self.inv_eps2 = 1.0 / self.eps**2
        self.tail, self.head, self.weight, self.mass = _edge_arrays(mesh)

    def energy(self, U: np.ndarray) -> np.ndarray:
        Ed, Ep = kernels.energy(U, self.tail, self.head, self.weight, self.mass, self.inv_eps2)
        return Ed + Ep

    def energy_grad(self, U: np.ndarray):
        Ed, Ep, G = kernels.energy_grad(U, self.tail, self.head, self.weight, self.mass,
                                        self.inv_eps2)
        return Ed + Ep, G


@dataclass
class EnergyReport:
    total: float
    dirichlet: float
    potential: float
    normalized: float
    density: np.ndarray = field(repr=False)  # per simplex


def _abs_log(eps: float) -> float:
    return abs(math.log(eps))


def cell_gradients(u: ComplexField) -> np.ndarray:
    """P1 gradient of each component on each simplex, shape (S, 2, d)."""
    return u.mesh.simplex_gradients(u.values)


def energy_density(u: ComplexField) -> np.ndarray:
    """Per-simplex e_eps(u); integrates (with simplex volumes) to the total energy."""
    mesh = u.mesh
    G = cell_gradients(u)
    W, _ = kernels.potential(u.values)
    return 0.5 * np.einsum("sci,sci->s", G, G) + W[mesh.simplices].mean(axis=1) / u.eps**2


def energy(u: ComplexField) -> EnergyReport:
    mesh = u.mesh
    dec = mesh.dec
    du = dec.d0 @ u.values
    dirichlet = 0.5 * float(np.einsum("ei,ei,e->", du, du, dec.star1))
    W, _ = kernels.potential(u.values)
    pot = float(W @ dec.star0) / u.eps**2
    total = dirichlet + pot
    logeps = _abs_log(u.eps)
    return EnergyReport(
        total=total,
        dirichlet=dirichlet,
        potential=pot,
        normalized=total / logeps if logeps > 0 else math.inf,
        density=energy_density(u),
    )


def energy_value(u: ComplexField) -> float:
    return float(BatchEnergy(u.mesh, u.eps).energy(u.values)[0])


def gradient(u: ComplexField) -> np.ndarray:
    """Exact gradient of the discrete energy w.r.t. the vertex values, shape (V, 2)."""
    _, G = BatchEnergy(u.mesh, u.eps).energy_grad(u.values)
    return G[0]


def residual_norm(mesh: MeshManifold, g: np.ndarray) -> float:
    """Mass-inverse weighted norm sqrt(g^T M^-1 g) of a cofield."""
    return math.sqrt(float(np.einsum("vi,vi,v->", g, g, 1.0 / mesh.dec.star0)))


def gl_residual(u: ComplexField) -> float:
    """L2 norm of the strong-form residual M^-1 grad E, the discrete (GL) defect."""
    return residual_norm(u.mesh, gradient(u))


def hessian(u: ComplexField) -> sp.csr_matrix:
    """Exact second variation of the discrete energy, ordering 2*v + component."""
    mesh = u.mesh
    K = mesh.dec.stiffness
    H2 = potential_hessian(u.values) * (mesh.dec.star0 / u.eps**2)[:, None, None]
    return (sp.kron(K, sp.identity(2)) + sp.block_diag(list(H2))).tocsr()


def truncate(u: ComplexField) -> ComplexField:
    """Compose with the nearest-point retraction onto the closed unit disk."""
    U = u.values.copy()[None]
    kernels.truncate(U)
    return u.with_values(U[0])


# ---------------------------------------------------------------------------
# stress-energy tensor

TestField = Callable[[np.ndarray], np.ndarray]


def default_test_fields(mesh: MeshManifold) -> list[tuple[str, TestField]]:
    """Named vector fields X given by their ambient Jacobian DX at points."""
    fields: list[tuple[str, TestField]] = []
    if not mesh.is_torus:
        for k in range(3):
            def conformal(x, k=k):
                x = x / np.linalg.norm(x, axis=1, keepdims=True)
                J = -x[:, k, None, None] * np.eye(3)
                J[:, :, k] -= x
                return J

            def rotation(x, k=k):
                w = np.zeros(3)
                w[k] = 1.0
                J = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
                return np.broadcast_to(J, (len(x), 3, 3))

            fields.append((f"grad_x{k}", conformal))
            fields.append((f"rot_x{k}", rotation))
        return fields
    n = mesh.dimension
    for i in range(n):
        for j in range(n):
            def sin_field(x, i=i, j=j):
                J = np.zeros((len(x), n, n))
                J[:, i, j] = np.cos(x[:, j])
                return J

            def cos_field(x, i=i, j=j):
                J = np.zeros((len(x), n, n))
                J[:, i, j] = -np.sin(x[:, j])
                return J

            fields.append((f"sin(x{j})e{i}", sin_field))
            fields.append((f"cos(x{j})e{i}", cos_field))
    return fields


@dataclass
class StressEnergy:
    tensor: np.ndarray = field(repr=False)  # (S, d, d)
    density: np.ndarray = field(repr=False)
    names: list[str]
    residuals: np.ndarray
    dudu_trace: np.ndarray = field(repr=False)

    @property
    def normalized(self) -> np.ndarray:
        """P = Id - du*du / e on simplices with positive energy density."""
        e = self.density
        T = self.tensor
        out = np.zeros_like(T)
        pos = e > 0
        out[pos] = T[pos] / e[pos, None, None]
        return out


def stress_energy(u: ComplexField,
                  test_fields: Sequence[tuple[str, TestField]] | None = None) -> StressEnergy:
    mesh = u.mesh
    G = cell_gradients(u)
    dudu = np.einsum("sci,scj->sij", G, G)
    e = energy_density(u)
    T = e[:, None, None] * mesh.tangent_projector - dudu
    T = 0.5 * (T + T.transpose(0, 2, 1))
    fields = list(test_fields) if test_fields is not None else default_test_fields(mesh)
    pts = mesh.simplex_centroids
    vol = mesh.simplex_volume
    res = np.array([np.einsum("s,sij,sij->", vol, T, fn(pts)) for _, fn in fields])
    return StressEnergy(T, e, [name for name, _ in fields], res,
                        np.einsum("sii->s", dudu))

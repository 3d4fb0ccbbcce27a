"""Min-max estimation: pull a family down the energy landscape, then refine.

The flow moves every interior node of a DiskFamily by a preconditioned
gradient step ``u <- u - a P^{-1} grad E`` with ``P = K + M / eps^2`` and a
per-node step size adapted so that no node's energy increases.  The node of
largest energy at the end is refined by a phase-bordered Newton iteration to
a discrete critical point.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import glenergy as gl
from . import kernels
from .errors import ConfigError, ConvergenceError, ResolutionError
from .glenergy import BatchEnergy, ComplexField
from .manifold import MeshManifold
from .sweepfamily import DiskFamily, SweepMap, build_family

log = logging.getLogger(__name__)

MIN_STEP = 1e-14
MAX_STEP_GROWTH = 16.0
NONTRIVIAL_MOD2 = 7.0 / 8.0


@dataclass(frozen=True)
class FlowConfig:
    step: float = 1.0
    line_search: bool = True
    max_iter: int = 400
    truncate: bool = True
    window: int = 20
    rtol: float = 1e-8

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError(f"flow step must be positive, got {self.step}")
        if self.window < 10:
            raise ConfigError(f"flow window must be at least 10, got {self.window}")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")
        if not self.rtol >= 0:
            raise ConfigError("rtol must be non-negative")


@dataclass
class FlowHistory:
    max_energy: np.ndarray
    iterations: int
    converged: bool
    stagnated: bool
    max_node: int


class _PeriodicSolver:
    """Solve (K + M/eps^2) x = b on a periodic grid by FFT diagonalization."""

    def __init__(self, mesh: MeshManifold, eps: float):
        n, m, h = mesh.dimension, mesh.grid_m, mesh.h
        freq = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.fftfreq(m))
        sym = np.zeros((m,) * n)
        for a in range(n):
            shape = [1] * n
            shape[a] = m
            sym = sym + freq.reshape(shape)
        self.shape = (m,) * n
        self.symbol = h ** (n - 2) * sym + h**n / eps**2

    def solve(self, b: np.ndarray) -> np.ndarray:
        k = b.shape[1]
        B = np.fft.fftn(b.reshape(self.shape + (k,)), axes=range(len(self.shape)))
        B /= self.symbol[..., None]
        x = np.fft.ifftn(B, axes=range(len(self.shape))).real
        return x.reshape(-1, k)


def _sobolev_solver(mesh: MeshManifold, eps: float):
    if mesh.is_torus:
        return _PeriodicSolver(mesh, eps)
    dec = mesh.dec
    P = (dec.stiffness + sp.diags(dec.star0 / eps**2)).tocsc()
    return spla.splu(P)


def pull_down(family: DiskFamily, cfg: FlowConfig = FlowConfig()) -> tuple[DiskFamily, FlowHistory]:
    """Flow all interior nodes simultaneously; boundary nodes are never touched."""
    family.check_boundary()
    mesh = family.mesh
    batch = BatchEnergy(mesh, family.eps)
    inner = np.flatnonzero(~family.boundary)
    fields = family.fields.copy()
    U = np.ascontiguousarray(fields[inner])
    if cfg.truncate:
        # truncation never raises energy, so starting from the retracted family is harmless
        kernels.truncate(U)
    solver = _sobolev_solver(mesh, family.eps)
    V, n = mesh.n_vertices, len(inner)

    E, G = batch.energy_grad(U)
    alpha = np.full(n, cfg.step)
    history = [float(E.max()) if n else 0.0]
    converged = stagnated = False
    it = 0
    while it < cfg.max_iter and n:
        it += 1
        rhs = G.transpose(1, 0, 2).reshape(V, 2 * n)
        D = solver.solve(rhs).reshape(V, n, 2).transpose(1, 0, 2)
        trial = np.ascontiguousarray(U - alpha[:, None, None] * D)
        if cfg.truncate:
            kernels.truncate(trial)
        Et = batch.energy(trial)
        ok = Et <= E if cfg.line_search else np.ones(n, bool)
        U[ok] = trial[ok]
        alpha[ok] = np.minimum(alpha[ok] * 1.25, MAX_STEP_GROWTH * cfg.step)
        alpha[~ok] *= 0.5
        if ok.any():
            E_ok, G_ok = batch.energy_grad(U[ok])
            E[ok], G[ok] = E_ok, G_ok
        history.append(float(E.max()))
        top = int(np.argmax(E))
        if alpha[top] < MIN_STEP:
            stagnated = True
            break
        if len(history) > cfg.window:
            ref = history[-cfg.window - 1]
            if ref - history[-1] <= cfg.rtol * abs(ref):
                converged = True
                break

    fields[inner] = U
    flowed = DiskFamily(mesh, family.eps, family.n_r, family.n_t, family.params.copy(),
                        fields, family.sweep_seed, dict(family.constants))
    energies = np.zeros(family.n_nodes)
    energies[inner] = E
    top = int(np.argmax(energies))  # first index on ties
    return flowed, FlowHistory(np.array(history), it, converged, stagnated, top)


# ---------------------------------------------------------------------------
# refinement


@dataclass
class Refinement:
    field: ComplexField
    residual: float
    iterations: int
    energy_initial: float
    energy_final: float
    newton_steps: int = 0
    fallback_steps: int = 0


def _merit(u: ComplexField) -> tuple[float, np.ndarray]:
    g = gl.gradient(u)
    r = gl.residual_norm(u.mesh, g)
    return r, g


def _bordered_newton(H: sp.csr_matrix, g: np.ndarray, phase: np.ndarray):
    """Newton step with the global phase direction removed by a Lagrange border."""
    c = sp.csr_matrix(phase[:, None])
    A = sp.bmat([[H, c], [c.T, None]], format="csc")
    rhs = np.concatenate([-g, [0.0]])
    with np.errstate(all="ignore"):
        sol = spla.splu(A).solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("singular bordered system")
    return sol[:-1]


def _lm_step(H: sp.csr_matrix, g: np.ndarray, minv: np.ndarray, mu: float, m2: np.ndarray):
    """Levenberg-Marquardt step on the residual merit 1/2 g^T M^-1 g."""
    Minv = sp.diags(minv)
    A = (H @ Minv @ H + mu * sp.diags(m2)).tocsc()
    return spla.spsolve(A, -(H @ (minv * g)))


def refine_to_critical(u0: ComplexField, tol: float = 1e-8, max_iter: int = 60,
                       free_steps: int = 30) -> Refinement:
    """Drive the discrete energy gradient to zero starting from ``u0``.

    Newton on the exact Hessian, bordered against the phase rotation that
    leaves the energy invariant.  Near saddles the residual typically rises
    before the quadratic phase sets in, so up to ``free_steps`` full steps
    are taken unconditionally (watchdog).  If that does not converge the
    iteration restarts from the best field with backtracking on the residual
    and a Levenberg-Marquardt fallback.  Raises ConvergenceError carrying the
    best field seen when ``max_iter`` is exhausted.
    """
    if not tol > 0:
        raise ConfigError("tolerance must be positive")
    if np.max(u0.modulus) > 1.0 + 1e-12:
        raise gl.GLError("initial field must satisfy |u| <= 1")
    mesh = u0.mesh
    m2 = np.repeat(mesh.dec.star0, 2)
    minv = 1.0 / m2
    e0 = gl.energy_value(u0)
    u = u0
    r, g = _merit(u)
    r0 = r
    best = (r, u, g)
    it = newton = fallback = 0

    def newton_step(u, g):
        phase = np.column_stack([-u.values[:, 1], u.values[:, 0]]).ravel()
        H = gl.hessian(u)
        try:
            return H, _bordered_newton(H, g.ravel(), phase)
        except RuntimeError:
            return H, None

    # watchdog phase
    while r > tol and it < min(free_steps, max_iter):
        it += 1
        _, step = newton_step(u, g)
        if step is None:
            break
        trial = u.with_values(u.values + step.reshape(-1, 2))
        r, g = _merit(trial)
        u = trial
        newton += 1
        log.debug("newton %d: residual %.3e", it, r)
        if r < best[0]:
            best = (r, u, g)
        if not np.isfinite(r) or r > 1e4 * r0:
            break

    r, u, g = best
    mu = 1.0 / u.eps**2
    while r > tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"refinement stalled at residual {r:.3e} after {it} iterations",
                residual=r, iterations=it, best=u)
        it += 1
        H, step = newton_step(u, g)
        accepted = False
        if step is not None:
            t = 1.0
            while t >= 1.0 / 64:
                trial = u.with_values(u.values + t * step.reshape(-1, 2))
                rt, gt = _merit(trial)
                if rt < r:
                    u, r, g = trial, rt, gt
                    accepted = True
                    newton += 1
                    log.debug("damped newton %d: t=%g residual %.3e", it, t, r)
                    break
                t *= 0.5
        if not accepted:
            for _ in range(12):
                step = _lm_step(H, g.ravel(), minv, mu, m2)
                trial = u.with_values(u.values + step.reshape(-1, 2))
                rt, gt = _merit(trial)
                if rt < r:
                    u, r, g = trial, rt, gt
                    mu = max(mu / 4.0, 1e-12)
                    accepted = True
                    fallback += 1
                    log.debug("lm %d: mu=%.3g residual %.3e", it, mu, r)
                    break
                mu *= 8.0
        if not accepted:
            raise ConvergenceError(f"no residual-reducing step at residual {r:.3e}",
                                   residual=r, iterations=it, best=u)

    if np.max(u.modulus) > 1.0:
        # remove rounding overshoot; keep it only if it does not spoil the residual
        ut = gl.truncate(u)
        rt, _ = _merit(ut)
        if rt <= tol:
            u, r = ut, rt
    return Refinement(u, r, it, e0, gl.energy_value(u), newton, fallback)


def morse_index(u: ComplexField, k: int = 20) -> tuple[int, np.ndarray]:
    """Count negative eigenvalues among the ``k`` lowest of the second variation.

    The generalized problem H x = lam M x is solved in shift-invert mode
    about a shift below the spectrum's lower bound -1/eps^2.
    """
    H = gl.hessian(u)
    m2 = sp.diags(np.repeat(u.mesh.dec.star0, 2)).tocsc()
    k = min(k, H.shape[0] - 2)
    v0 = np.random.default_rng(12345).standard_normal(H.shape[0])
    vals = spla.eigsh(H.tocsc(), k=k, M=m2, sigma=-1.5 / u.eps**2, which="LM",
                      v0=v0, return_eigenvectors=False)
    vals = np.sort(vals)
    tol = 1e-6 / u.eps**2
    return int(np.count_nonzero(vals < -tol)), vals


# ---------------------------------------------------------------------------
# results and sweeps


@dataclass
class MinMaxResult:
    eps: float
    c_estimate: float
    history: np.ndarray = field(repr=False)
    max_node: int = 0
    refined: ComplexField | None = field(default=None, repr=False)
    residual: float = math.nan
    energy_refined: float = math.nan
    energy_slice: float = math.nan
    morse_index: int = -1
    eigenvalues: np.ndarray = field(default=None, repr=False)
    min_modulus: float = math.nan
    flow: FlowHistory | None = field(default=None, repr=False)
    refine_iterations: int = 0
    wall_time: float = 0.0
    family: DiskFamily | None = field(default=None, repr=False)  # after the flow

    @property
    def log_eps(self) -> float:
        return abs(math.log(self.eps))

    @property
    def nontrivial(self) -> bool:
        return self.energy_refined > 0 and self.min_modulus**2 < NONTRIVIAL_MOD2

    @property
    def normalized(self) -> float:
        return self.energy_refined / self.log_eps


def minmax(family: DiskFamily, cfg: FlowConfig = FlowConfig(), tol: float = 1e-8,
           refine_iter: int = 60, index_k: int = 20) -> MinMaxResult:
    t0 = time.perf_counter()
    flowed, hist = pull_down(family, cfg)
    slice_ = flowed.node(hist.max_node)
    ref = refine_to_critical(slice_, tol, refine_iter)
    idx, vals = morse_index(ref.field, index_k) if index_k > 0 else (-1, np.array([]))
    return MinMaxResult(
        eps=family.eps,
        c_estimate=float(hist.max_energy[-1]),
        history=hist.max_energy,
        max_node=hist.max_node,
        refined=ref.field,
        residual=ref.residual,
        energy_refined=ref.energy_final,
        energy_slice=ref.energy_initial,
        morse_index=idx,
        eigenvalues=vals,
        min_modulus=float(ref.field.modulus.min()),
        flow=hist,
        refine_iterations=ref.iterations,
        wall_time=time.perf_counter() - t0,
        family=flowed,
    )


@dataclass
class SweepTable:
    results: list[MinMaxResult]
    C1: float
    C2: float

    COLUMNS = ("eps", "abs_log_eps", "c_estimate", "refined_energy", "residual",
               "min_modulus", "morse_index", "wall_time")

    def rows(self, with_time: bool = True):
        for r in self.results:
            row = [r.eps, r.log_eps, r.c_estimate, r.energy_refined, r.residual,
                   r.min_modulus, r.morse_index]
            if with_time:
                row.append(r.wall_time)
            yield row

    @property
    def normalized(self) -> np.ndarray:
        return np.array([r.normalized for r in self.results])


def check_eps_list(mesh: MeshManifold, eps_list) -> list[float]:
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ConfigError("empty eps list")
    if any(not e > 0 for e in eps):
        raise ConfigError("eps values must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps list must be strictly decreasing")
    floor = mesh.h / 4.0
    low = [e for e in eps if e < floor]
    if low:
        raise ResolutionError(f"eps {low} below the mesh floor h/4 = {floor:.4g}")
    return eps


def cepsilon_sweep(mesh: MeshManifold, sweep: SweepMap, eps_list, cfg: FlowConfig = FlowConfig(),
                   grid: tuple[int, int] = (8, 24), tol: float = 1e-8, workers: int = 1,
                   index_k: int = 20) -> SweepTable:
    """Min-max estimates over a decreasing eps list and the affine law in |log eps|."""
    eps = check_eps_list(mesh, eps_list)

    def one(e: float) -> MinMaxResult:
        return minmax(build_family(mesh, sweep, e, grid), cfg, tol, index_k=index_k)

    if workers > 1 and len(eps) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, eps))
    else:
        results = [one(e) for e in eps]
    if len(results) >= 2:
        x = np.array([r.log_eps for r in results])
        y = np.array([r.c_estimate for r in results])
        C1, C2 = (float(c) for c in np.polyfit(x, y, 1))
    else:
        C1 = C2 = math.nan
    return SweepTable(results, C1, C2)

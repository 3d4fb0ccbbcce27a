"""Pure numpy implementation of the batch kernels (fallback for ``_kernels``)."""

from __future__ import annotations

import numpy as np

OUTER_SLOPE = 6.0
OUTER_BASE = 2.25


def potential(U: np.ndarray):
    """W and DW for an array of points with trailing axis of length 2."""
    r2 = np.einsum("...i,...i->...", U, U)
    inner = r2 < 4.0
    s = 1.0 - r2
    W = np.where(inner, 0.25 * s * s, 0.0)
    coef = np.where(inner, -s, 0.0)
    if not inner.all():
        r = np.sqrt(np.where(inner, 4.0, r2))
        t = np.tanh(r - 2.0)
        W = np.where(inner, W, OUTER_BASE + OUTER_SLOPE * t)
        coef = np.where(inner, coef, OUTER_SLOPE * (1.0 - t * t) / r)
    return W, coef[..., None] * U


def _dirichlet(U, tail, head, weight):
    nf, nv, _ = U.shape
    wD = weight[None, :, None] * (U[:, head] - U[:, tail])
    Ed = 0.5 * np.einsum("fei,fei->f", wD, U[:, head] - U[:, tail])
    offset = (np.arange(nf) * nv)[:, None]
    idx = np.concatenate([head[None, :] + offset, tail[None, :] + offset], axis=1).ravel()
    G = np.empty((nf, nv, 2))
    for c in range(2):
        vals = np.concatenate([wD[..., c], -wD[..., c]], axis=1).ravel()
        G[..., c] = np.bincount(idx, weights=vals, minlength=nf * nv).reshape(nf, nv)
    return Ed, G


def energy_grad(U, tail, head, weight, mass, inv_eps2):
    Ed, G = _dirichlet(U, tail, head, weight)
    W, DW = potential(U)
    c = mass * inv_eps2
    Ep = W @ c
    G = G + c[None, :, None] * DW
    return Ed, Ep, np.ascontiguousarray(G)


def energy(U, tail, head, weight, mass, inv_eps2):
    D = U[:, head] - U[:, tail]
    Ed = 0.5 * np.einsum("fei,fei,e->f", D, D, weight)
    W, _ = potential(U)
    return Ed, (W @ mass) * inv_eps2


def truncate(U):
    r2 = np.einsum("fvi,fvi->fv", U, U)
    big = r2 > 1.0
    if big.any():
        U[big] /= np.sqrt(r2[big])[:, None]

"""First-order exponential (integrating-factor) collision step for Maxwell molecules.

Over a step of length ``dt`` each particle independently

* keeps its velocity with probability ``A = exp(-lam)``,
* undergoes one gain collision with probability ``B = lam * exp(-lam)``,
* is redrawn from the local Maxwellian with probability ``C = 1 - A - B``,

where ``lam = mu * dt / eps`` and ``mu = rho`` for Maxwell molecules.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .grid import conserved_to_primitive
from .particles import CellIndex, ParticleEnsemble


@dataclass(frozen=True)
class CollisionWeights:
    lam: float
    A: float
    B: float
    C: float

    @property
    def damping(self) -> float:
        """``A + B``: the weight of the non-resampled part of the update."""
        return self.A + self.B


def collision_weights(mu, dt, eps) -> CollisionWeights:
    if eps == 0:
        return CollisionWeights(np.inf, 0.0, 0.0, 1.0)
    lam = mu * dt / eps
    if lam < 0:
        raise ValueError("mu * dt / eps must be non-negative")
    A = float(np.exp(-lam))
    # lam * exp(-lam) underflows cleanly; inf * 0 is avoided above
    B = float(lam * A) if np.isfinite(lam) else 0.0
    # -expm1 keeps C accurate for small lam
    C = float(-np.expm1(-lam) - B)
    C = max(C, 0.0)
    return CollisionWeights(float(lam), A, B, C)


def check_kernel(gamma=0.0):
    """Only the Maxwell-molecule kernel (velocity exponent 0) is supported."""
    if gamma != 0:
        raise NotImplementedError("only Maxwell molecules (gamma = 0) are implemented")


def gain_sample(v, partner_v, n_unit):
    """Post-collision velocity in centre-of-mass form; broadcasts over rows."""
    v = np.asarray(v, dtype=float)
    partner_v = np.asarray(partner_v, dtype=float)
    g = np.linalg.norm(v - partner_v, axis=-1, keepdims=True)
    return 0.5 * (v + partner_v) + 0.5 * g * np.asarray(n_unit, dtype=float)


@dataclass
class CellCollisionStats:
    kept: int = 0
    collided: int = 0
    resampled: int = 0
    no_partner: int = 0


def _draws(rng, n):
    """Fixed draw layout per cell: uniforms (branch, partner, cos, azimuth) and normals."""
    return rng.random((n, 4)), rng.standard_normal((n, 3))


def _apply(v, uni, nor, start, count, A, AB, u_cell, sqrtT):
    """Vectorized collision of particles grouped by cell.

    ``start``/``count`` give each particle's cell offset and size; ``A``, ``AB``,
    ``u_cell``, ``sqrtT`` are per particle. Returns ``(new_v, resampled, collided, lonely)``.
    """
    r = uni[:, 0]
    resample = r >= AB
    collide = (r >= A) & ~resample
    lonely = collide & (count < 2)
    collide &= count >= 2
    out = v.copy()
    ic = np.flatnonzero(collide)
    if ic.size:
        local = ic - start[ic]
        m = count[ic] - 1
        k = np.minimum((uni[ic, 1] * m).astype(np.int64), m - 1)
        partner = start[ic] + k + (k >= local)
        cos_t = 2.0 * uni[ic, 2] - 1.0
        phi = 2.0 * np.pi * uni[ic, 3]
        sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
        dirs = np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])
        out[ic] = gain_sample(v[ic], v[partner], dirs)
    ir = np.flatnonzero(resample)
    if ir.size:
        out[ir] = u_cell[ir] + sqrtT[ir, None] * nor[ir]
    return out, resample, collide, lonely


def collide_cell(v, U_cell, weights: CollisionWeights, rng):
    """Collide the velocities ``v`` (shape ``(n, 3)``) of one cell.

    Returns ``(new_v, resampled_mask, stats)``. Partners for gain collisions are
    taken from the frozen pre-step velocities, never the particle itself; a lone
    particle drawn for a collision keeps its velocity.
    """
    v = np.asarray(v, dtype=float)
    n = len(v)
    stats = CellCollisionStats()
    if n == 0:
        return v.copy(), np.zeros(0, dtype=bool), stats
    uni, nor = _draws(rng, n)
    A, AB = weights.A, weights.A + weights.B
    if AB < 1.0:
        _, u, T, _ = conserved_to_primitive(U_cell)
    else:
        u, T = np.zeros(3), 1.0
    ones = np.ones(n)
    out, resample, collide, lonely = _apply(
        v, uni, nor, np.zeros(n, dtype=np.int64), np.full(n, n), A * ones, AB * ones,
        np.broadcast_to(u, (n, 3)), np.sqrt(T) * ones)
    stats.collided = int(collide.sum())
    stats.resampled = int(resample.sum())
    stats.no_partner = int(lonely.sum())
    stats.kept = n - stats.collided - stats.resampled
    return out, resample, stats


def cell_weights(rho, dt, eps):
    """Per-cell collision weights with ``mu = rho``."""
    return [collision_weights(float(r), dt, eps) for r in np.asarray(rho)]


def collide_all(ens: ParticleEnsemble, index: CellIndex, U, weights, seed, step, workers=1):
    """Collide every cell in place and set ``ens.resampled``.

    ``U`` holds the per-cell Maxwellian states, ``weights`` one
    :class:`CollisionWeights` per cell. Cell ``j`` draws from the stream
    ``(seed, step, j)`` exactly as :func:`collide_cell` would, so the result does
    not depend on ``workers``.
    """
    n_cells = len(weights)
    counts = index.counts
    A = np.array([w.A for w in weights])
    AB = np.array([w.A + w.B for w in weights])
    needs_T = (AB < 1.0) & (counts > 0)
    u_cell = np.zeros((n_cells, 3))
    sqrtT = np.ones(n_cells)
    if needs_T.any():
        _, u, T, _ = conserved_to_primitive(np.asarray(U)[needs_T])
        u_cell[needs_T] = u
        sqrtT[needs_T] = np.sqrt(T)

    def draw(j):
        if counts[j] == 0:
            return np.empty((0, 4)), np.empty((0, 3))
        return _draws(streams.stream(seed, streams.COLLIDE, step, j), int(counts[j]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(draw, range(n_cells)))
    else:
        blocks = [draw(j) for j in range(n_cells)]
    uni = np.concatenate([b[0] for b in blocks])
    nor = np.concatenate([b[1] for b in blocks])

    order = index.order
    cell = np.repeat(np.arange(n_cells), counts)
    start = index.starts[:-1][cell]
    v_sorted = ens.v[order]
    out, resample, collide, lonely = _apply(
        v_sorted, uni, nor, start, counts[cell], A[cell], AB[cell], u_cell[cell], sqrtT[cell])
    ens.v[order] = out
    ens.resampled = np.zeros(len(ens), dtype=bool)
    ens.resampled[order] = resample
    return dict(
        collided=np.bincount(cell, weights=collide, minlength=n_cells).astype(int),
        resampled=np.bincount(cell, weights=resample, minlength=n_cells).astype(int),
        no_partner=np.bincount(cell, weights=lonely, minlength=n_cells).astype(int),
    )

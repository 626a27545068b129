"""Per-cell moment matching of the particles to the moment-solver state.

Mass is matched by giving all particles of a cell the same weight; mean
velocity and energy by the affine map ``V -> (V - u_p) / c + u`` with
``c^2`` the ratio of particle to target internal energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .grid import Grid, conserved_to_primitive
from .particles import CellIndex, ParticleEnsemble, reconstruct_moments, sample_maxwellian


@dataclass
class MatchReport:
    pre: np.ndarray
    post: np.ndarray
    target: np.ndarray
    scale: np.ndarray
    skipped: np.ndarray
    resampled: np.ndarray

    @property
    def n_skipped(self) -> int:
        return int(self.skipped.sum())


def match_mass(alpha, rho_target, dx, m_p):
    """Uniform weights giving the cell the density ``rho_target``."""
    n = len(alpha)
    if n == 0:
        raise ValueError("cannot match the mass of an empty cell")
    if not rho_target > 0:
        raise ValueError("target density must be positive")
    return np.full(n, rho_target * dx / (m_p * n))


def _target_internal(u_target, e_target):
    internal = e_target - 0.5 * float(np.dot(u_target, u_target))
    if not internal > 0:
        raise ValueError(f"non-positive target internal energy {internal!r}")
    return internal


def match_velocity_energy(v, u_target, e_target, rng=None):
    """Map velocities so their mean is ``u_target`` and mean ``|V|^2/2`` is ``e_target``.

    Returns ``(new_v, c, resampled)``. A cell without velocity spread is first
    redrawn from the target Maxwellian (needs ``rng``); a single particle is
    placed at ``u_target``.
    """
    v = np.asarray(v, dtype=float)
    u_target = np.asarray(u_target, dtype=float)
    internal = _target_internal(u_target, e_target)
    resampled = False
    u_p = v.mean(axis=0)
    dv = v - u_p
    spread = 0.5 * np.mean(np.sum(dv * dv, axis=1))
    if not spread > 0:
        if len(v) < 2 or rng is None:
            return np.broadcast_to(u_target, v.shape).copy(), np.nan, True
        v = sample_maxwellian(1.0, u_target, 2.0 * internal / 3.0, len(v), rng)
        resampled = True
        u_p = v.mean(axis=0)
        dv = v - u_p
        spread = 0.5 * np.mean(np.sum(dv * dv, axis=1))
    c = np.sqrt(spread / internal)
    return dv / c + u_target, c, resampled


def affine_match(v, cell, w, u_target, internal_target, n_cells):
    """Vectorized affine map per cell with ``w``-weighted means.

    Returns ``(new_v, scale, ok)``; cells without weight or velocity spread
    (``ok`` false) are left unchanged.
    """
    W = np.bincount(cell, weights=w, minlength=n_cells)
    Wsafe = np.where(W > 0, W, 1.0)
    u_p = np.column_stack(
        [np.bincount(cell, weights=w * v[:, c], minlength=n_cells) for c in range(3)]
    ) / Wsafe[:, None]
    dv = v - u_p[cell]
    spread = 0.5 * np.bincount(cell, weights=w * np.sum(dv * dv, axis=1), minlength=n_cells) / Wsafe
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.sqrt(spread / internal_target)
    ok = (W > 0) & (scale > 0) & np.isfinite(scale)
    okp = ok[cell]
    new_v = v.copy()
    new_v[okp] = dv[okp] / scale[cell][okp, None] + u_target[cell][okp]
    return new_v, scale, ok


def match_cells(ens: ParticleEnsemble, index: CellIndex, U_target, grid: Grid,
                seed: int = 0, step: int = 0) -> MatchReport:
    """Match every non-empty cell in place to ``U_target``.

    Empty cells are skipped; single-particle cells cannot carry a temperature
    and are skipped after their mass and velocity are set.
    """
    rho_t, u_t, T_t, _ = conserved_to_primitive(U_target)
    e_t = U_target[:, 4] / rho_t
    n = grid.n_cells
    counts = index.counts
    cell = index.cell
    nz = counts > 0

    pre, _ = reconstruct_moments(ens, grid)

    safe = np.maximum(counts, 1)
    ens.alpha = rho_t[cell] * grid.dx / (ens.m_p * safe[cell])
    ens.v, scale, ok = affine_match(ens.v, cell, np.ones(len(ens)), u_t, 1.5 * T_t, n)

    resampled = np.zeros(n, dtype=bool)
    skipped = ~nz
    for j in np.flatnonzero(nz & ~ok):
        members = index.members(j)
        g = streams.stream(seed, streams.MATCH, step, j)
        new_v, c, _ = match_velocity_energy(ens.v[members], u_t[j], e_t[j], g)
        ens.v[members] = new_v
        scale[j] = c
        resampled[j] = True
        if len(members) < 2:
            skipped[j] = True
    scale[~nz] = np.nan
    post, _ = reconstruct_moments(ens, grid)
    return MatchReport(pre, post, np.asarray(U_target, dtype=float).copy(), scale, skipped,
                       resampled)

"""Non-equilibrium closure: damped flux moments of ``g = f - M[U]``.

After a collision step the distribution is ``f = D g' + (1 - D) M[U]`` with
``D = A + B``, where ``g'`` is represented by the particles that were not
redrawn from the Maxwellian. The flux moments of ``g`` are then
``D (<v_x m g'> - <v_x m M[U]>)``; the Maxwellian part is analytic.
"""

from __future__ import annotations

import numpy as np

from .boundary import Boundary
from .euler import check_state, conservative_update, ghost_cells, limited_slopes
from .grid import NVAR, Grid, euler_flux
from .particles import ParticleEnsemble, cell_sums, deposit

# flux moments <v_x m g> that change sign under x -> -x
ODD_FLUX = np.array([True, False, True, True, True])


def particle_flux_moments(v):
    """Per-particle ``v_x * (1, v, |v|^2/2)``."""
    vx = v[:, 0]
    return np.column_stack([vx, vx[:, None] * v, vx * 0.5 * np.sum(v * v, axis=1)])


def g_moments_damped(ens: ParticleEnsemble, grid: Grid, U, damping, kernel="pc",
                     periodic=False):
    """Damped non-equilibrium flux moments per cell, shape ``(n_cells, 5)``.

    ``damping`` is the per-cell ``D = A + B`` (array or sequence of
    :class:`~mgmc.collision.CollisionWeights`). Cells with ``D == 0`` or without
    non-resampled particles contribute exactly zero.
    """
    D = np.array([getattr(w, "damping", w) for w in damping], dtype=float)
    G = np.zeros((grid.n_cells, NVAR))
    live = D > 0
    if not live.any():
        return G
    keep = ~ens.resampled
    idx, w = deposit(ens.x[keep], grid, kernel, periodic)
    q = particle_flux_moments(ens.v[keep])
    sums = cell_sums(np.column_stack([np.ones(len(q)), q]), idx, w, grid.n_cells)
    live &= sums[:, 0] > 0
    rows = np.flatnonzero(live)
    rho = U[rows, 0]
    m_hat = rho[:, None] * sums[rows, 1:] / sums[rows, 0][:, None]
    G[rows] = D[rows, None] * (m_hat - euler_flux(U[rows]))
    return G


def moving_average(field, weights, left: Boundary, right: Boundary):
    """``out_j = sum_k w_k field_{j-k}`` for ``k = -K..K``.

    Ghost values wrap for periodic domains and copy the edge cell otherwise.
    """
    w = np.asarray(weights, dtype=float)
    K = len(w) // 2
    field = np.asarray(field, dtype=float)
    if K == 0:
        return w[0] * field
    n = len(field)
    mode = "wrap" if left.kind == "periodic" else "edge"
    padded = np.pad(field, [(K, K)] + [(0, 0)] * (field.ndim - 1), mode=mode)
    out = np.zeros_like(field)
    for i, wk in enumerate(w):
        k = i - K
        out += wk * padded[K - k:K - k + n]
    return out


def noneq_flux_interfaces(G, left: Boundary, right: Boundary):
    """Diffusion-free MUSCL fluxes of the filtered closure moments.

    Ghosts: periodic wrap, parity mirror at walls (keeps the wall mass flux
    zero), edge copy at reservoirs.
    """
    Gg = ghost_cells(G, left, right, odd=ODD_FLUX, reservoir="edge")
    s = limited_slopes(Gg)
    n = len(G)
    j = np.arange(1, n + 2)
    return 0.5 * (Gg[j] + Gg[j + 1]) + 0.25 * (s[j - 1] - s[j])


def moment_update_stage2(Ustar, dt, dx, Psi):
    Unew = conservative_update(Ustar, dt, dx, Psi)
    check_state(Unew, "closure update")
    return Unew

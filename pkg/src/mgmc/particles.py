"""Particle ensemble: Maxwellian sampling, free transport, binning, moments.

A particle ``i`` carries mass ``m_p * alpha_i``; the reconstructed density of
cell ``j`` is ``m_p / dx * sum(alpha_i)`` over the particles binned there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .boundary import Boundary, check_pair
from .grid import NVAR, Grid, conserved_to_primitive


class TimeStepTooLarge(RuntimeError):
    pass


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    m_p: float
    resampled: np.ndarray | None = None

    def __post_init__(self):
        if self.resampled is None:
            self.resampled = np.zeros(len(self.x), dtype=bool)
        if not self.m_p > 0:
            raise ValueError("particle mass unit m_p must be positive")

    def __len__(self):
        return len(self.x)

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(
            self.x.copy(), self.v.copy(), self.alpha.copy(), self.m_p, self.resampled.copy()
        )

    def take(self, keep) -> "ParticleEnsemble":
        return ParticleEnsemble(
            self.x[keep], self.v[keep], self.alpha[keep], self.m_p, self.resampled[keep]
        )

    def extend(self, x, v, alpha):
        self.x = np.concatenate([self.x, x])
        self.v = np.concatenate([self.v, v])
        self.alpha = np.concatenate([self.alpha, alpha])
        self.resampled = np.concatenate([self.resampled, np.zeros(len(x), dtype=bool)])


@dataclass
class CellIndex:
    """Particles grouped by cell: ``order[starts[j]:starts[j+1]]`` lists cell ``j``."""

    cell: np.ndarray
    order: np.ndarray
    starts: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.starts)

    def members(self, j: int) -> np.ndarray:
        return self.order[self.starts[j]:self.starts[j + 1]]


def sample_maxwellian(rho, u, T, count, rng):
    """Draw ``count`` velocities ``u + sqrt(T) * xi`` with ``xi`` standard normal in 3D."""
    del rho  # density only sets the particle count, not the velocity law
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T!r}")
    if count < 0:
        raise ValueError("count must be non-negative")
    u = np.asarray(u, dtype=float)
    return u + np.sqrt(T) * rng.standard_normal((int(count), 3))


def _largest_remainder(shares, total):
    quotas = shares / shares.sum() * total
    counts = np.floor(quotas).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        # stable sort keeps ties in cell order
        idx = np.argsort(-(quotas - counts), kind="stable")[:short]
        counts[idx] += 1
    return counts


def init_from_macro(U, grid: Grid, particles_per_cell: int, seed: int) -> ParticleEnsemble:
    """Sample an ensemble whose reconstructed density equals ``U``'s exactly.

    The total count is ``particles_per_cell * n_cells``, split among cells in
    proportion to the cell mass.
    """
    rho, u, T, _ = conserved_to_primitive(U)
    mass = rho * grid.dx
    total = int(particles_per_cell) * grid.n_cells
    if total <= 0:
        raise ValueError("need a positive particle budget")
    counts = _largest_remainder(mass, total)
    m_p = float(mass.sum() / total)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        warnings.warn(f"{empty.size} cells received no particles (first: {empty[0]})")

    xs, vs, alphas = [], [], []
    for j in range(grid.n_cells):
        n = int(counts[j])
        if n == 0:
            continue
        g = streams.stream(seed, streams.INIT, 0, j)
        x0 = grid.x_min + j * grid.dx
        xs.append(x0 + grid.dx * g.random(n))
        vs.append(sample_maxwellian(rho[j], u[j], T[j], n, g))
        alphas.append(np.full(n, mass[j] / (m_p * n)))
    x = np.concatenate(xs)
    # guard the half-open cell convention against round-off at the right edge
    x = np.minimum(x, np.nextafter(grid.x_max, grid.x_min))
    return ParticleEnsemble(x, np.concatenate(vs), np.concatenate(alphas), m_p)


def _reservoir_influx(side, bc: Boundary, grid: Grid, m_p, dt, g):
    """Particles entering from a Maxwellian reservoir during ``dt``.

    Reservoir particles are laid out uniformly in a buffer outside the face,
    streamed for ``dt``, and those that cross the face are kept.
    """
    u = np.asarray(bc.u, dtype=float)
    width = (abs(u[0]) + 8.0 * np.sqrt(bc.T)) * dt
    expected = bc.rho * width / m_p
    n = int(np.floor(expected))
    n += int(g.random() < expected - n)
    v = sample_maxwellian(bc.rho, u, bc.T, n, g)
    s = width * g.random(n)
    if side == "left":
        x = grid.x_min - s + v[:, 0] * dt
        keep = x >= grid.x_min
    else:
        x = grid.x_max + s + v[:, 0] * dt
        keep = x < grid.x_max
    x, v = x[keep], v[keep]
    x = np.clip(x, grid.x_min, np.nextafter(grid.x_max, grid.x_min))
    return x, v


def transport(ens: ParticleEnsemble, dt, grid: Grid, left: Boundary, right: Boundary,
              seed: int = 0, step: int = 0) -> ParticleEnsemble:
    """Free streaming ``X += V_x dt`` followed by the boundary rules (in place)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    check_pair(left, right)
    L = grid.length
    disp = ens.v[:, 0] * dt
    if len(disp) and np.max(np.abs(disp)) > L:
        raise TimeStepTooLarge(
            f"particle displacement {np.max(np.abs(disp)):.3g} exceeds the domain length {L:.3g}"
        )
    ens.x = ens.x + disp

    if left.kind == "periodic":
        ens.x = grid.x_min + np.mod(ens.x - grid.x_min, L)
        ens.x[ens.x >= grid.x_max] = grid.x_min
    else:
        # at most two reflections since |displacement| <= L
        for _ in range(2):
            if left.kind == "wall":
                out = ens.x < grid.x_min
                ens.x[out] = 2.0 * grid.x_min - ens.x[out]
                ens.v[out, 0] = -ens.v[out, 0]
            if right.kind == "wall":
                out = ens.x >= grid.x_max
                ens.x[out] = 2.0 * grid.x_max - ens.x[out]
                ens.v[out, 0] = -ens.v[out, 0]
                # a particle landing exactly on the wall belongs to the last cell
                ens.x[out & (ens.x >= grid.x_max)] = np.nextafter(grid.x_max, grid.x_min)
        inside = (ens.x >= grid.x_min) & (ens.x < grid.x_max)
        if not inside.all():
            ens = ens.take(inside)
        for side, bc in (("left", left), ("right", right)):
            if bc.is_reservoir:
                g = streams.stream(seed, streams.INFLOW, step, 0 if side == "left" else 1)
                x, v = _reservoir_influx(side, bc, grid, ens.m_p, dt, g)
                ens.extend(x, v, np.ones(len(x)))
    return ens


def bin_particles(ens: ParticleEnsemble, grid: Grid) -> CellIndex:
    cell = grid.cell_of(ens.x)
    order = np.argsort(cell, kind="stable")
    starts = np.zeros(grid.n_cells + 1, dtype=np.int64)
    np.cumsum(np.bincount(cell, minlength=grid.n_cells), out=starts[1:])
    return CellIndex(cell, order, starts)


def deposit(x, grid: Grid, kernel: str = "pc", periodic: bool = False):
    """Cell indices and weights of each particle's share, shape ``(npart, k)``.

    ``pc`` assigns the whole particle to its cell; ``ngp`` spreads it linearly
    between the two nearest cell centres (triangle kernel of width ``2 dx``).
    Shares of every particle sum to one.
    """
    if kernel == "pc":
        return grid.cell_of(x)[:, None], np.ones((len(x), 1))
    if kernel != "ngp":
        raise ValueError(f"unknown kernel {kernel!r}")
    s = (np.asarray(x) - grid.x_min) / grid.dx - 0.5
    j0 = np.floor(s).astype(np.int64)
    f = s - j0
    idx = np.stack([j0, j0 + 1], axis=1)
    w = np.stack([1.0 - f, f], axis=1)
    n = grid.n_cells
    if periodic:
        idx = np.mod(idx, n)
    else:
        idx = np.clip(idx, 0, n - 1)
    return idx, w


def cell_sums(values, idx, w, n_cells):
    """``out[j] = sum_i w_ij * values_i`` for ``values`` of shape ``(npart, k)``."""
    values = np.asarray(values, dtype=float)
    flat_idx = idx.ravel()
    out = np.empty((n_cells, values.shape[1]))
    for c in range(values.shape[1]):
        contrib = (w * values[:, c][:, None]).ravel()
        out[:, c] = np.bincount(flat_idx, weights=contrib, minlength=n_cells)
    return out


def reconstruct_moments(ens: ParticleEnsemble, grid: Grid, kernel: str = "pc",
                        periodic: bool = False):
    """Per-cell conserved moments ``(rho, rho u, rho e)`` from the particles.

    Returns ``(U, empty)``; rows of empty cells are NaN and flagged in ``empty``.
    """
    idx, w = deposit(ens.x, grid, kernel, periodic)
    a = ens.alpha
    v = ens.v
    vals = np.column_stack([a, a[:, None] * v, a * 0.5 * np.sum(v * v, axis=1)])
    S = cell_sums(vals, idx, w, grid.n_cells)
    empty = ~(S[:, 0] > 0)
    U = np.full((grid.n_cells, NVAR), np.nan)
    ok = ~empty
    rho = ens.m_p / grid.dx * S[ok, 0]
    U[ok, 0] = rho
    U[ok, 1:] = rho[:, None] * S[ok, 1:] / S[ok, 0][:, None]
    return U, empty

"""1D grid, macroscopic state storage and Maxwellian moment relations.

Conserved states are stored as arrays of shape ``(n_cells, 5)`` holding
``(rho, rho*u_x, rho*u_y, rho*u_z, E)`` with ``E = rho*|u|^2/2 + 3/2*rho*T``
(monatomic gas, unit gas constant, ``p = rho*T``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAMMA = 5.0 / 3.0
NVAR = 5

RHO, MX, MY, MZ, ENERGY = range(NVAR)


class DegenerateStateError(ValueError):
    """Raised when a cell has non-positive density or temperature."""

    def __init__(self, message, cells=None):
        super().__init__(message)
        self.cells = cells if cells is not None else []


@dataclass(frozen=True)
class Grid:
    n_cells: int
    x_min: float = 0.0
    x_max: float = 1.0

    def __post_init__(self):
        if self.n_cells <= 0:
            raise ValueError(f"n_cells must be positive, got {self.n_cells}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    def cell_of(self, x):
        """Index of the cell containing ``x``; clipped so ``x_max`` maps to the last cell."""
        j = np.floor((np.asarray(x) - self.x_min) / self.dx).astype(np.int64)
        return np.clip(j, 0, self.n_cells - 1)


@dataclass
class SchemeParams:
    """Numerical parameters shared by the drivers.

    ``eps = 0`` selects the exact fluid limit (every collision resamples).
    """

    eps: float = 1e-2
    cfl: float = 0.5
    filter_weights: tuple = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)
    kernel: str = "pc"
    mu_rule: str = "density"
    fixed_dt: float | None = None
    workers: int = 1
    dsmc_conservative: bool = True

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        w = np.asarray(self.filter_weights, dtype=float)
        if w.ndim != 1 or len(w) % 2 != 1:
            raise ValueError("filter weights need odd length 2K+1")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("filter weights must be non-negative and sum to 1")
        if self.kernel not in ("pc", "ngp"):
            raise ValueError(f"unknown reconstruction kernel {self.kernel!r}")
        if self.mu_rule != "density":
            raise ValueError("only the Maxwell-molecule rule mu = rho is supported")

    @property
    def filter_half_width(self) -> int:
        return len(self.filter_weights) // 2


def _atleast_2d_state(U):
    U = np.asarray(U, dtype=float)
    return U[None, :] if U.ndim == 1 else U


def _check(rho, T):
    bad = np.flatnonzero(~(rho > 0) | ~(T > 0))
    if bad.size:
        j = int(bad[0])
        raise DegenerateStateError(
            f"degenerate state in cell {j}: rho={float(np.ravel(rho)[j])!r}, "
            f"T={float(np.ravel(T)[j])!r}",
            cells=bad.tolist(),
        )


def conserved_to_primitive(U):
    """Return ``(rho, u, T, p)`` for a state of shape ``(5,)`` or ``(n, 5)``.

    ``u`` has shape ``(..., 3)``. Raises :class:`DegenerateStateError` naming the
    first offending cell if density or temperature is not positive.
    """
    single = np.ndim(U) == 1
    U = _atleast_2d_state(U)
    rho = U[:, RHO]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = U[:, MX:ENERGY] / rho[:, None]
        T = (2.0 * U[:, ENERGY] - rho * np.sum(u * u, axis=1)) / (3.0 * rho)
    _check(rho, T)
    p = rho * T
    if single:
        return rho[0], u[0], T[0], p[0]
    return rho, u, T, p


def primitive_to_conserved(rho, u, T):
    """Inverse of :func:`conserved_to_primitive`; broadcasts over cells."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        raise ValueError("u must be a 3-vector (or array of 3-vectors)")
    single = rho.ndim == 0 and u.ndim == 1
    rho2 = np.atleast_1d(rho)
    T2 = np.atleast_1d(T)
    u2 = np.atleast_2d(u)
    n = max(len(rho2), len(T2), len(u2))
    rho2 = np.broadcast_to(rho2, (n,))
    T2 = np.broadcast_to(T2, (n,))
    u2 = np.broadcast_to(u2, (n, 3))
    _check(rho2, T2)
    U = np.empty((n, NVAR))
    U[:, RHO] = rho2
    U[:, MX:ENERGY] = rho2[:, None] * u2
    U[:, ENERGY] = 0.5 * rho2 * np.sum(u2 * u2, axis=1) + 1.5 * rho2 * T2
    return U[0] if single else U


def euler_flux(U):
    """x-direction flux ``<v_x m M[U]>`` of conserved states (no validation)."""
    U = np.asarray(U, dtype=float)
    rho = U[..., RHO]
    ux = U[..., MX] / rho
    mom2 = U[..., MX] ** 2 + U[..., MY] ** 2 + U[..., MZ] ** 2
    p = (2.0 / 3.0) * (U[..., ENERGY] - 0.5 * mom2 / rho)
    F = np.empty_like(U)
    F[..., RHO] = U[..., MX]
    F[..., MX:ENERGY] = U[..., MX:ENERGY] * ux[..., None]
    F[..., MX] += p
    F[..., ENERGY] = (U[..., ENERGY] + p) * ux
    return F


def maxwellian_flux_moments(rho, u, T):
    """Flux moments ``(rho u_x, rho u_x u + p e_x, (E + p) u_x)`` of a Maxwellian."""
    U = primitive_to_conserved(rho, u, T)
    return euler_flux(U)


def sound_speed(T):
    return np.sqrt(GAMMA * np.asarray(T, dtype=float))


def max_eigenvalue(U) -> float:
    """Largest characteristic speed ``max_j |u_x| + sqrt(5 T / 3)``."""
    _, u, T, _ = conserved_to_primitive(_atleast_2d_state(U))
    return float(np.max(np.abs(u[:, 0]) + sound_speed(T)))


def totals(U, dx) -> np.ndarray:
    """Cell-integrated conserved quantities."""
    return np.sum(np.asarray(U), axis=0) * dx

"""Second-order MUSCL central scheme for the equilibrium (Euler) fluxes.

Numerical flux at interface ``j+1/2``::

    psi = (F_j + F_{j+1})/2 - a/2 (U_{j+1} - U_j) + (s+_j - s-_{j+1})/4
    s±_j = (w±_{j+1} - w±_j) * phi(chi±_j),   w± = F ± a U
    chi±_j = (w±_j - w±_{j-1}) / (w±_{j+1} - w±_j)

with the Van Leer limiter ``phi`` applied componentwise.
"""

from __future__ import annotations

import numpy as np

from .boundary import Boundary
from .grid import DegenerateStateError, conserved_to_primitive, euler_flux

NGHOST = 2
RATIO_TOL = 1e-12


class StepFailure(RuntimeError):
    """A conservative update produced a non-physical state."""


def van_leer(chi):
    chi = np.asarray(chi, dtype=float)
    pos = chi > 0
    # evaluate only where chi > 0 so chi = -1 never divides by zero
    return np.where(pos, 2.0 * np.where(pos, chi, 0.0) / (1.0 + np.where(pos, chi, 0.0)), 0.0)


def limited_slopes(w):
    """``(w_{j+1} - w_j) * phi(chi_j)`` for the interior rows ``1..len(w)-2``.

    Components whose forward difference is negligible
    (``|den| <= 1e-12 (1 + |num|)``) fall back to zero slope.
    """
    d = np.diff(w, axis=0)
    num, den = d[:-1], d[1:]
    degenerate = np.abs(den) <= RATIO_TOL * (1.0 + np.abs(num))
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    phi = np.where(degenerate, 0.0, van_leer(chi))
    return den * phi


# conserved components that change sign under x -> -x
_ODD_CONSERVED = np.array([False, True, False, False, False])


def ghost_cells(U, left: Boundary, right: Boundary, odd=_ODD_CONSERVED, nghost=NGHOST,
                reservoir="state"):
    """Pad a per-cell field with ``nghost`` cells per side.

    ``periodic`` wraps, ``wall`` mirrors and flips the sign of the ``odd``
    components. Reservoir sides use the reservoir's conserved state, or copy the
    edge cell when ``reservoir="edge"`` (fields that are not conserved states).
    """
    U = np.asarray(U, dtype=float)
    n = len(U)
    out = np.empty((n + 2 * nghost,) + U.shape[1:])
    out[nghost:nghost + n] = U
    sign = np.where(odd, -1.0, 1.0)
    for side, bc in (("left", left), ("right", right)):
        for k in range(nghost):
            if side == "left":
                dst, src_p, src_m = nghost - 1 - k, n - 1 - k, k
            else:
                dst, src_p, src_m = nghost + n + k, k, n - 1 - k
            if bc.kind == "periodic":
                out[dst] = U[src_p]
            elif bc.kind == "wall":
                out[dst] = U[src_m] * sign
            elif reservoir == "state":
                out[dst] = bc.state
            else:
                out[dst] = U[0] if side == "left" else U[-1]
    return out


def euler_flux_interfaces(U, alpha, left: Boundary, right: Boundary):
    """Numerical fluxes at the ``n + 1`` interfaces ``-1/2 .. n-1/2``."""
    Ug = ghost_cells(U, left, right)
    F = euler_flux(Ug)
    wp = F + alpha * Ug
    wm = F - alpha * Ug
    # slopes for padded rows 1..n+2
    sp = limited_slopes(wp)
    sm = limited_slopes(wm)
    n = len(U)
    j = np.arange(NGHOST - 1, NGHOST + n)  # padded index of the left cell
    return (
        0.5 * (F[j] + F[j + 1])
        - 0.5 * alpha * (Ug[j + 1] - Ug[j])
        + 0.25 * (sp[j - 1] - sm[j])
    )


def conservative_update(U, dt, dx, fluxes):
    return U - (dt / dx) * (fluxes[1:] - fluxes[:-1])


def check_state(U, stage):
    try:
        conserved_to_primitive(U)
    except DegenerateStateError as err:
        raise StepFailure(f"{stage}: {err} (time step too large for the CFL condition?)") from err


def euler_update(U, dt, dx, fluxes):
    """``U* = U - dt/dx (psi_{j+1/2} - psi_{j-1/2})``; fails on non-physical output."""
    Ustar = conservative_update(U, dt, dx, fluxes)
    check_state(Ustar, "euler update")
    return Ustar

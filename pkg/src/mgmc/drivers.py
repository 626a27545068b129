"""Time-marching loops: moment-guided Monte Carlo, plain DSMC, Euler only."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .boundary import Boundary
from .closure import g_moments_damped, moment_update_stage2, moving_average, noneq_flux_interfaces
from .collision import CollisionWeights, cell_weights, collide_all
from .euler import euler_flux_interfaces, euler_update
from .grid import Grid, SchemeParams, conserved_to_primitive, max_eigenvalue, totals
from .matching import MatchReport, affine_match, match_cells
from .particles import (
    ParticleEnsemble,
    bin_particles,
    init_from_macro,
    reconstruct_moments,
    transport,
)

log = logging.getLogger(__name__)

METHODS = ("mgmc", "dsmc", "euler")


class StageError(RuntimeError):
    def __init__(self, stage, step, t, cause):
        super().__init__(f"step {step} (t={t:.6g}), stage '{stage}': {cause}")
        self.stage = stage
        self.step = step


@dataclass
class Domain:
    grid: Grid
    left: Boundary
    right: Boundary

    @property
    def periodic(self) -> bool:
        return self.left.kind == "periodic"


@dataclass
class RunState:
    t: float
    n: int
    U: np.ndarray
    ens: ParticleEnsemble | None
    g_filtered: np.ndarray
    seed: int
    last_match: MatchReport | None = None
    diagnostics: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)


def initial_state(U0, domain: Domain, method: str, particles_per_cell: int = 0, seed: int = 0):
    U0 = np.array(U0, dtype=float)
    conserved_to_primitive(U0)
    ens = None
    if method in ("mgmc", "dsmc"):
        ens = init_from_macro(U0, domain.grid, particles_per_cell, seed)
    return RunState(0.0, 0, U0, ens, np.zeros_like(U0), int(seed))


def select_dt(ens, U, grid: Grid, cfl: float) -> float:
    """``cfl * min(dx / max|V_x|, dx / max eigenvalue)``; independent of eps."""
    dt = grid.dx / max_eigenvalue(U)
    if ens is not None and len(ens):
        vmax = float(np.max(np.abs(ens.v[:, 0])))
        if vmax > 0:
            dt = min(dt, grid.dx / vmax)
    return cfl * dt


@contextmanager
def _stage(name, state):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, state.n + 1, state.t, exc) from exc


def moment_update(U, g_filtered, dt, domain: Domain):
    """Euler part then closure correction; returns ``U^{n+1}``."""
    alpha = max_eigenvalue(U)
    psi = euler_flux_interfaces(U, alpha, domain.left, domain.right)
    Ustar = euler_update(U, dt, domain.grid.dx, psi)
    Psi = noneq_flux_interfaces(g_filtered, domain.left, domain.right)
    return moment_update_stage2(Ustar, dt, domain.grid.dx, Psi)


def _record(state, dt, domain, skipped=0):
    tot = totals(state.U, domain.grid.dx)
    state.diagnostics.append(
        dict(step=state.n, t=state.t, dt=dt, total_mass=tot[0], total_mom_x=tot[1],
             total_E=tot[4], cells_skipped=skipped)
    )


def mgmc_step(state: RunState, params: SchemeParams, domain: Domain, dt: float) -> RunState:
    grid = domain.grid
    step = state.n + 1
    with _stage("moment update", state):
        U = moment_update(state.U, state.g_filtered, dt, domain)
    with _stage("transport", state):
        ens = transport(state.ens, dt, grid, domain.left, domain.right, state.seed, step)
    index = bin_particles(ens, grid)
    with _stage("matching", state):
        report = match_cells(ens, index, U, grid, state.seed, step)
    with _stage("collision", state):
        weights = cell_weights(U[:, 0], dt, params.eps)
        collide_all(ens, index, U, weights, state.seed, step, params.workers)
    with _stage("closure", state):
        G = g_moments_damped(ens, grid, U, weights, params.kernel, domain.periodic)
        g_filtered = moving_average(G, params.filter_weights, domain.left, domain.right)
    state.U, state.ens, state.g_filtered = U, ens, g_filtered
    state.last_match = report
    state.t += dt
    state.n = step
    _record(state, dt, domain, report.n_skipped)
    return state


_NO_COLLISION = CollisionWeights(0.0, 1.0, 0.0, 0.0)


def valid_cells(U):
    """Rows of ``U`` with positive density and temperature (NaN rows are invalid)."""
    rho = U[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        T = (2.0 * U[:, 4] - np.sum(U[:, 1:4] ** 2, axis=1) / rho) / (3.0 * rho)
        return (rho > 0) & (T > 0)


def dsmc_step(state: RunState, params: SchemeParams, domain: Domain, dt: float) -> RunState:
    """Transport, then collisions towards the particles' own local Maxwellian.

    Unless ``params.dsmc_conservative`` is false, each cell's momentum and energy
    are restored after the collisions with the affine velocity map.
    """
    grid = domain.grid
    step = state.n + 1
    with _stage("transport", state):
        ens = transport(state.ens, dt, grid, domain.left, domain.right, state.seed, step)
    index = bin_particles(ens, grid)
    Ut, _ = reconstruct_moments(ens, grid, params.kernel, domain.periodic)
    valid = valid_cells(Ut) & (index.counts >= 2)
    with _stage("collision", state):
        weights = [w if ok else _NO_COLLISION
                   for w, ok in zip(cell_weights(np.where(valid, Ut[:, 0], 1.0), dt, params.eps), valid)]
        pre, _ = reconstruct_moments(ens, grid, "pc", domain.periodic)
        collide_all(ens, index, Ut, weights, state.seed, step, params.workers)
        if params.dsmc_conservative:
            keep = valid_cells(pre) & (index.counts >= 2)
            u_pre = np.where(keep[:, None], pre[:, 1:4] / np.where(keep, pre[:, 0], 1.0)[:, None], 0.0)
            internal = np.where(keep, pre[:, 4] / np.where(keep, pre[:, 0], 1.0)
                                - 0.5 * np.sum(u_pre ** 2, axis=1), np.nan)
            v, _, _ = affine_match(ens.v, index.cell, ens.alpha, u_pre, internal, grid.n_cells)
            ens.v = v
    U, empty = reconstruct_moments(ens, grid, "pc", domain.periodic)
    U[empty] = 0.0  # an empty cell holds no mass
    state.U, state.ens = U, ens
    state.t += dt
    state.n = step
    _record(state, dt, domain, int(empty.sum()))
    return state


def euler_step(state: RunState, params: SchemeParams, domain: Domain, dt: float) -> RunState:
    with _stage("euler update", state):
        alpha = max_eigenvalue(state.U)
        psi = euler_flux_interfaces(state.U, alpha, domain.left, domain.right)
        state.U = euler_update(state.U, dt, domain.grid.dx, psi)
    state.t += dt
    state.n += 1
    _record(state, dt, domain)
    return state


STEPPERS = {"mgmc": mgmc_step, "dsmc": dsmc_step, "euler": euler_step}


def _next_dt(state, params, domain, method):
    if params.fixed_dt is not None:
        return params.fixed_dt
    if method == "dsmc":
        # reconstructed particle moments stand in for the moment state
        U = state.U[valid_cells(state.U)]
        return select_dt(state.ens, U, domain.grid, params.cfl)
    return select_dt(state.ens, state.U, domain.grid, params.cfl)


def run(state: RunState, params: SchemeParams, domain: Domain, method: str, t_final: float,
        output_times=(), dt_sequence=None, on_output=None, on_step=None) -> RunState:
    """Advance ``state`` to ``t_final``.

    The step size follows ``dt_sequence`` if given, else ``params.fixed_dt``, else
    the CFL rule; steps are shortened to land exactly on output times and
    ``t_final``. ``on_output(time, state)`` is called at each output time
    (``t = 0`` included when requested) and ``on_step(state)`` after every step.
    The sequence of steps taken is stored in ``state.dt_history``.
    """
    if method not in STEPPERS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    stepper = STEPPERS[method]
    output_times = {float(t) for t in output_times if 0 <= t <= t_final}
    stops = sorted(output_times | {float(t_final)})
    history = []
    tol = 1e-12 * max(1.0, t_final)
    for stop in stops:
        while stop - state.t > tol:
            if dt_sequence is not None:
                dt = float(dt_sequence[len(history)])
            else:
                dt = _next_dt(state, params, domain, method)
                dt = min(dt, stop - state.t)
            stepper(state, params, domain, dt)
            history.append(dt)
            if on_step is not None:
                on_step(state)
        if on_output is not None and stop in output_times:
            on_output(stop, state)
    state.dt_history = history
    return state

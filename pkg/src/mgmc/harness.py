"""Running scenarios, CSV output and the statistical-error study."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as streams
from .drivers import RunState, initial_state, run
from .grid import SchemeParams
from .scenarios import Scenario

log = logging.getLogger(__name__)

FIELD_HEADER = ("x", "rho", "ux", "uy", "uz", "T", "p", "E")
CONSERVED_FIELDS = ("rho", "mom_x", "mom_y", "mom_z", "E")
REPORT_FIELDS = CONSERVED_FIELDS + ("ux", "T")


def _fmt(v) -> str:
    # 17 significant digits round-trip every double
    return f"{float(v):.16e}"


def field_rows(U, centers):
    rho = U[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        u = U[:, 1:4] / rho[:, None]
        T = (2.0 * U[:, 4] - rho * np.sum(u * u, axis=1)) / (3.0 * rho)
    p = rho * T
    for j, x in enumerate(centers):
        yield (x, rho[j], u[j, 0], u[j, 1], u[j, 2], T[j], p[j], U[j, 4])


def write_fields(path, U, centers):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_HEADER)
        for row in field_rows(U, centers):
            w.writerow([_fmt(v) for v in row])


def write_diagnostics(path, records):
    keys = ("step", "t", "dt", "total_mass", "total_mom_x", "total_E", "cells_skipped")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in records:
            w.writerow([r[k] if isinstance(r[k], (int, np.integer)) else _fmt(r[k]) for k in keys])


def snapshot_name(t, method) -> str:
    return f"fields_t{t:.6g}_{method}.csv"


def params_for(scenario: Scenario, **overrides) -> SchemeParams:
    kw = dict(eps=scenario.eps, cfl=scenario.cfl, fixed_dt=scenario.dt)
    kw.update(overrides)
    return SchemeParams(**kw)


def simulate(scenario: Scenario, method: str, seed: int = 0, params: SchemeParams | None = None,
             output_times=None, on_output=None, dt_sequence=None) -> RunState:
    params = params or params_for(scenario)
    domain = scenario.domain
    state = initial_state(scenario.initial_state(), domain, method,
                          scenario.particles_per_cell, seed)
    times = scenario.output_times if output_times is None else output_times
    return run(state, params, domain, method, scenario.t_final, times, dt_sequence, on_output)


def run_to_files(scenario: Scenario, method: str, seed: int, out_dir, params=None):
    """Run and write one snapshot CSV per output time plus a diagnostics CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    centers = scenario.grid.centers
    written = []

    def dump(t, state):
        path = out / snapshot_name(t, method)
        write_fields(path, state.U, centers)
        written.append(path)

    times = tuple(scenario.output_times) or (scenario.t_final,)
    state = simulate(scenario, method, seed, params, output_times=times, on_output=dump)
    write_diagnostics(out / f"diagnostics_{method}.csv", state.diagnostics)
    return written, state


def report_fields(U) -> dict:
    """Conserved components plus ``ux`` and ``T`` as named per-cell arrays."""
    U = np.asarray(U)
    rho = U[..., 0]
    out = {name: U[..., c] for c, name in enumerate(CONSERVED_FIELDS)}
    with np.errstate(invalid="ignore", divide="ignore"):
        out["ux"] = U[..., 1] / rho
        out["T"] = (2.0 * U[..., 4] - np.sum(U[..., 1:4] ** 2, axis=-1) / rho) / (3.0 * rho)
    return out


def sigma_squared(realizations, reference) -> dict:
    """``(1/M) sum_k sum_j (U_kj - Ubar_j)^2`` per field.

    ``realizations`` has shape ``(M, n_cells, 5)``, ``reference`` ``(n_cells, 5)``.
    Primitive fields are undefined in empty cells; those cells are left out.
    """
    R = np.asarray(realizations, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if R.ndim != 3 or R.shape[1:] != ref.shape:
        raise ValueError(f"grid mismatch: realizations {R.shape} vs reference {ref.shape}")
    fr = report_fields(R)
    fref = report_fields(ref)
    return {name: float(np.mean(np.nansum((fr[name] - fref[name]) ** 2, axis=1))) for name in fr}


@dataclass
class ErrorStudy:
    n_list: tuple
    realizations: int = 10
    reference_particles: int = 10_000
    reference_realizations: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.realizations < 2:
            raise ValueError("need at least two realizations")
        if self.reference_particles <= max(self.n_list):
            raise ValueError("reference particle count must exceed every studied count")


def realize(scenario: Scenario, method: str, n_per_cell: int, count: int, seed: int,
            params: SchemeParams | None = None) -> np.ndarray:
    """Final states of ``count`` independent runs, shape ``(count, n_cells, 5)``."""
    sc = scenario.with_(particles_per_cell=int(n_per_cell))
    return np.stack([
        simulate(sc, method, streams.derived_seed(seed, k), params).U for k in range(count)
    ])


def error_study(study: ErrorStudy, method: str, scenario: Scenario,
                params: SchemeParams | None = None):
    """Rows ``(N, field, sigma2)``; the reference is the mean of high-N runs of ``method``."""
    ref_seed = streams.derived_seed(study.seed, 1_000_000)
    ref = realize(scenario, method, study.reference_particles, study.reference_realizations,
                  ref_seed, params).mean(axis=0)
    rows = []
    for i, n in enumerate(study.n_list):
        R = realize(scenario, method, n, study.realizations,
                    streams.derived_seed(study.seed, i), params)
        for name, value in sigma_squared(R, ref).items():
            rows.append((int(n), name, value))
        log.info("N=%d done", n)
    return rows


def write_error_table(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("N", "field", "sigma2"))
        for n, name, value in rows:
            w.writerow((n, name, _fmt(value)))

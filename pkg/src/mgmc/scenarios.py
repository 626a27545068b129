"""Built-in test problems."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .boundary import Boundary, check_pair
from .drivers import Domain
from .grid import Grid, primitive_to_conserved


@dataclass(frozen=True)
class Scenario:
    name: str
    n_cells: int
    left: Boundary
    right: Boundary
    initial: callable  # cell centres -> conserved state (n, 5)
    eps: float = 1e-2
    particles_per_cell: int = 100
    t_final: float = 0.1
    dt: float | None = None
    cfl: float = 0.5
    output_times: tuple = field(default_factory=tuple)
    x_min: float = 0.0
    x_max: float = 1.0

    def __post_init__(self):
        check_pair(self.left, self.right)

    @property
    def grid(self) -> Grid:
        return Grid(self.n_cells, self.x_min, self.x_max)

    @property
    def domain(self) -> Domain:
        return Domain(self.grid, self.left, self.right)

    def initial_state(self) -> np.ndarray:
        return self.initial(self.grid.centers)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _uniform(rho, u, T):
    def init(x):
        return primitive_to_conserved(np.full(len(x), rho), np.tile(u, (len(x), 1)), np.full(len(x), T))
    return init


def _sod(x):
    left = x < 0.5
    rho = np.where(left, 1.0, 0.125)
    T = np.where(left, 5.0, 4.0)
    return primitive_to_conserved(rho, np.zeros((len(x), 3)), T)


def _smooth(x, L=1.0):
    s = np.sin(2.0 * np.pi * x / L)
    rho = 1.0 + 0.3 * s
    ux = 1.5 + 0.1 * s
    E = 2.5 + 1.0 * s
    U = np.zeros((len(x), 5))
    U[:, 0] = rho
    U[:, 1] = rho * ux
    U[:, 4] = E
    return U


def unsteady_shock() -> Scenario:
    u = (-1.0, 0.0, 0.0)
    return Scenario(
        name="unsteady-shock",
        n_cells=150,
        left=Boundary.wall(),
        right=Boundary.reservoir(1.0, u, 1.0, kind="inflow"),
        initial=_uniform(1.0, np.array(u), 1.0),
        particles_per_cell=400,
        t_final=0.18,
    )


def sod() -> Scenario:
    return Scenario(
        name="sod",
        n_cells=200,
        left=Boundary.reservoir(1.0, 0.0, 5.0, kind="fixed"),
        right=Boundary.reservoir(0.125, 0.0, 4.0, kind="fixed"),
        initial=_sod,
        particles_per_cell=200,
        t_final=0.08,
    )


def smooth_accuracy() -> Scenario:
    return Scenario(
        name="smooth-accuracy",
        n_cells=100,
        left=Boundary.periodic(),
        right=Boundary.periodic(),
        initial=_smooth,
        particles_per_cell=100,
        t_final=0.05,
        dt=1e-3,
    )


BUILTIN = {
    "unsteady-shock": unsteady_shock,
    "sod": sod,
    "smooth-accuracy": smooth_accuracy,
}


def builtin_scenario(name: str) -> Scenario:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(BUILTIN))}"
        ) from None

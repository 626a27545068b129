"""Boundary specifications shared by the particle and moment solvers.

Each side of the domain carries one of

* ``periodic``: both sides must be periodic,
* ``wall``: specular reflection for particles, mirrored ghost state for fluxes,
* ``inflow``/``fixed``: a Maxwellian reservoir ``(rho, u, T)``; particles leaving
  the domain are absorbed and reservoir particles are injected, fluxes see the
  reservoir state in the ghost cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import primitive_to_conserved

KINDS = ("periodic", "wall", "inflow", "fixed")


@dataclass(frozen=True)
class Boundary:
    kind: str
    rho: float = 1.0
    u: tuple = (0.0, 0.0, 0.0)
    T: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}; expected one of {KINDS}")
        if self.is_reservoir:
            # validates the reservoir state
            primitive_to_conserved(self.rho, np.asarray(self.u, dtype=float), self.T)

    @property
    def is_reservoir(self) -> bool:
        return self.kind in ("inflow", "fixed")

    @property
    def state(self) -> np.ndarray:
        return primitive_to_conserved(self.rho, np.asarray(self.u, dtype=float), self.T)

    @classmethod
    def periodic(cls):
        return cls("periodic")

    @classmethod
    def wall(cls):
        return cls("wall")

    @classmethod
    def reservoir(cls, rho, u, T, kind="inflow"):
        u = tuple(float(c) for c in np.broadcast_to(np.asarray(u, dtype=float), (3,)))
        return cls(kind, float(rho), u, float(T))


def check_pair(left: Boundary, right: Boundary):
    if (left.kind == "periodic") != (right.kind == "periodic"):
        raise ValueError("periodic boundaries must be used on both sides")

"""Grid, boundary, state and run-configuration value types."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "TRUNCATED_LINE",
    "HALF_LINE",
    "HALT",
    "CLAMP_AND_CONTINUE",
    "NONPOSITIVE_SIGNAL",
    "NONFINITE_VALUE",
    "Grid1D",
    "BoundarySpec",
    "FieldState",
    "SimConfig",
    "BreakdownRecord",
]

TRUNCATED_LINE = "truncated_line"
HALF_LINE = "half_line"
HALT = "halt"
CLAMP_AND_CONTINUE = "clamp_and_continue"
NONPOSITIVE_SIGNAL = "NonpositiveSignal"
NONFINITE_VALUE = "NonfiniteValue"


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_cells: int
    domain_kind: str = TRUNCATED_LINE

    def __post_init__(self):
        if self.n_cells < 16:
            raise DomainError("n_cells must be >= 16")
        if not self.x_max > self.x_min:
            raise DomainError("x_max must exceed x_min")
        if self.domain_kind not in (TRUNCATED_LINE, HALF_LINE):
            raise DomainError(f"unknown domain kind {self.domain_kind!r}")

    @classmethod
    def from_dx(cls, x_min: float, x_max: float, dx: float, domain_kind: str = TRUNCATED_LINE) -> "Grid1D":
        return cls(x_min, x_max, int(round((x_max - x_min) / dx)), domain_kind)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary conditions; ``None`` for S means no-flux, a float is a Dirichlet value.

    Density and attractant walls are always no-flux.
    """

    S_left: Optional[float] = None
    S_right: Optional[float] = None
    rho_left: str = "noflux"
    rho_right: str = "noflux"

    def __post_init__(self):
        if self.rho_left != "noflux" or self.rho_right != "noflux":
            raise DomainError("only no-flux density boundaries are supported")
        for side, v in (("S_left", self.S_left), ("S_right", self.S_right)):
            if v is not None and not v > 0:
                raise DomainError(f"{side} Dirichlet value must be > 0")

    def check(self, grid: Grid1D) -> None:
        if grid.domain_kind == HALF_LINE and self.S_left is None:
            raise DomainError("a half-line domain needs a positive Dirichlet signal at the origin")


@dataclass(frozen=True)
class FieldState:
    t: float
    rho: np.ndarray
    S: np.ndarray
    A: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.rho)
        if len(self.S) != n or (self.A is not None and len(self.A) != n):
            raise DomainError("rho, S and A must share the grid length")

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.rho.copy(), self.S.copy(),
                          None if self.A is None else self.A.copy())

    def mass(self, dx: float) -> float:
        return float(np.sum(self.rho) * dx)


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt_max: float = 0.05
    cfl: float = 0.9
    clamp_epsilon: Optional[float] = None
    output_every: float = 0.5
    breakdown_policy: str = HALT

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise DomainError("cfl must lie in (0, 1]")
        if self.clamp_epsilon is not None and not self.clamp_epsilon > 0:
            raise DomainError("clamp_epsilon must be > 0")
        if not (self.t_end > 0 and self.dt_max > 0 and self.output_every > 0):
            raise DomainError("t_end, dt_max and output_every must be > 0")
        if self.breakdown_policy not in (HALT, CLAMP_AND_CONTINUE):
            raise DomainError(f"unknown breakdown policy {self.breakdown_policy!r}")


@dataclass
class BreakdownRecord:
    occurred: bool = False
    t_break: Optional[float] = None
    cause: Optional[str] = None
    location: Optional[int] = None

    def to_dict(self) -> dict:
        return {"occurred": self.occurred, "t_break": self.t_break,
                "cause": self.cause, "location": self.location}

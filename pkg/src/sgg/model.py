"""PDE model family: exchangeable sensitivity, consumption and growth kernels.

The cell density ``rho`` obeys

    rho_t + (-d rho_x + rho * v(S, A))_x = r(S) rho

and the signal ``S`` obeys ``S_t = D S_xx - k(S, rho)``.  An optional
attractant ``A`` (secreted at rate ``beta``, degraded at rate ``alpha``)
enters the velocity of the two-signal model only.

All kernel functions accept scalars or numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DomainError

__all__ = [
    "LogGradient",
    "BinaryTwoSignal",
    "Tanh",
    "ThresholdedSign",
    "ThresholdedLogGradient",
    "ConstantConsumption",
    "LinearConsumption",
    "PowerConsumption",
    "NoGrowth",
    "ThresholdGrowth",
    "Attractant",
    "ModelSpec",
    "advection_velocity",
    "reaction_rate",
    "consumption_rate",
    "tanh_gain",
]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


# --- sensitivity kernels ----------------------------------------------------

@dataclass(frozen=True)
class LogGradient:
    """Keller-Segel choice ``chi * d(log S)/dx``."""

    chi: float

    def __post_init__(self):
        _require(self.chi >= 0, "chi must be >= 0")


@dataclass(frozen=True)
class BinaryTwoSignal:
    """``chi_S sign(S_x) + chi_A sign(A_x)``."""

    chi_S: float
    chi_A: float

    def __post_init__(self):
        _require(self.chi_S >= 0 and self.chi_A >= 0, "chi_S and chi_A must be >= 0")


@dataclass(frozen=True)
class Tanh:
    """``chi * tanh(f(S) S_x)`` with ``f(S) = f_scale / (1 + S)**2``."""

    chi: float
    f_scale: float

    def __post_init__(self):
        _require(self.chi >= 0, "chi must be >= 0")
        _require(self.f_scale > 0, "f_scale must be > 0")


@dataclass(frozen=True)
class ThresholdedSign:
    """Go-or-grow advection ``chi sign(S_x)`` restricted to ``S < S_0``."""

    chi: float
    S_0: float

    def __post_init__(self):
        _require(self.chi >= 0, "chi must be >= 0")
        _require(self.S_0 > 0, "S_0 must be > 0")


@dataclass(frozen=True)
class ThresholdedLogGradient:
    """``chi d(log S)/dx`` restricted to ``S < S_0``."""

    chi: float
    S_0: float

    def __post_init__(self):
        _require(self.chi >= 0, "chi must be >= 0")
        _require(self.S_0 > 0, "S_0 must be > 0")


Sensitivity = Union[LogGradient, BinaryTwoSignal, Tanh, ThresholdedSign, ThresholdedLogGradient]
LOGARITHMIC = (LogGradient, ThresholdedLogGradient)


# --- consumption kernels ----------------------------------------------------

@dataclass(frozen=True)
class ConstantConsumption:
    """``k rho``: does not vanish with S, so S can turn negative."""

    k: float

    def __post_init__(self):
        _require(self.k > 0, "k must be > 0")


@dataclass(frozen=True)
class LinearConsumption:
    """``k rho S``."""

    k: float

    def __post_init__(self):
        _require(self.k > 0, "k must be > 0")


@dataclass(frozen=True)
class PowerConsumption:
    """``k rho S**m`` with ``0 < m <= 1``."""

    k: float
    m: float

    def __post_init__(self):
        _require(self.k > 0, "k must be > 0")
        _require(0 < self.m <= 1, "m must lie in (0, 1]")


Consumption = Union[ConstantConsumption, LinearConsumption, PowerConsumption]


# --- growth -----------------------------------------------------------------

@dataclass(frozen=True)
class NoGrowth:
    pass


@dataclass(frozen=True)
class ThresholdGrowth:
    """Division at rate ``r`` where ``S > S_0``."""

    r: float
    S_0: float

    def __post_init__(self):
        _require(self.r > 0, "r must be > 0")
        _require(self.S_0 > 0, "S_0 must be > 0")


Growth = Union[NoGrowth, ThresholdGrowth]


@dataclass(frozen=True)
class Attractant:
    D_A: float
    alpha: float
    beta: float

    def __post_init__(self):
        _require(self.D_A > 0, "D_A must be > 0")
        _require(self.alpha > 0, "alpha must be > 0")
        _require(self.beta > 0, "beta must be > 0")


@dataclass(frozen=True)
class ModelSpec:
    """Full parameterization of one member of the model family."""

    sensitivity: Sensitivity
    consumption: Consumption
    growth: Growth = NoGrowth()
    d: float = 1.0
    D: float = 0.0
    attractant: Optional[Attractant] = None

    def __post_init__(self):
        _require(self.d > 0, "d must be > 0")
        _require(self.D >= 0, "D must be >= 0")
        if self.attractant is not None and not isinstance(self.sensitivity, BinaryTwoSignal):
            raise DomainError("an attractant requires BinaryTwoSignal sensitivity")
        if isinstance(self.sensitivity, BinaryTwoSignal) and self.attractant is None \
                and self.sensitivity.chi_A > 0:
            raise DomainError("chi_A > 0 requires an attractant field")
        s0 = getattr(self.sensitivity, "S_0", None)
        g0 = getattr(self.growth, "S_0", None)
        if s0 is not None and g0 is not None and s0 != g0:
            raise DomainError(f"sensitivity S_0={s0} and growth S_0={g0} must be equal")

    @property
    def logarithmic(self) -> bool:
        return isinstance(self.sensitivity, LOGARITHMIC)

    @property
    def k(self) -> float:
        return self.consumption.k

    @property
    def threshold(self) -> float | None:
        s0 = getattr(self.sensitivity, "S_0", None)
        return s0 if s0 is not None else getattr(self.growth, "S_0", None)


# --- kernel evaluation ------------------------------------------------------

def tanh_gain(f_scale: float, S):
    """Decreasing signal-integration gain ``f(S) = f_scale / (1 + S)**2``."""
    return f_scale / (1.0 + np.asarray(S, dtype=float)) ** 2


def _scalar_or_array(x, scalar: bool):
    return float(x) if scalar else x


def advection_velocity(spec: ModelSpec, S_left, S_right, A_left=None, A_right=None, dx: float = 1.0):
    """Face advection velocity from the discrete gradient between two cells.

    Works elementwise on arrays (one entry per face).  ``sign(0)`` is 0.
    Thresholded kinds test ``S < S_0`` on the upwind cell.
    """
    if not dx > 0:
        raise DomainError("dx must be > 0")
    scalar = np.ndim(S_left) == 0 and np.ndim(S_right) == 0
    Sl = np.asarray(S_left, dtype=float)
    Sr = np.asarray(S_right, dtype=float)
    sens = spec.sensitivity

    if isinstance(sens, LOGARITHMIC):
        bad = np.flatnonzero(np.atleast_1d((Sl <= 0) | (Sr <= 0)))
        if bad.size:
            raise DomainError(f"non-positive signal at face {int(bad[0])} under logarithmic sensitivity")
        v = sens.chi * (np.log(Sr) - np.log(Sl)) / dx
    elif isinstance(sens, ThresholdedSign):
        v = sens.chi * np.sign(Sr - Sl)
    elif isinstance(sens, Tanh):
        gain = tanh_gain(sens.f_scale, 0.5 * (Sl + Sr))
        v = sens.chi * np.tanh(gain * (Sr - Sl) / dx)
    elif isinstance(sens, BinaryTwoSignal):
        v = sens.chi_S * np.sign(Sr - Sl)
        if sens.chi_A > 0:
            if A_left is None or A_right is None:
                raise DomainError("BinaryTwoSignal with chi_A > 0 needs attractant values")
            v = v + sens.chi_A * np.sign(np.asarray(A_right, dtype=float) - np.asarray(A_left, dtype=float))
    else:  # pragma: no cover
        raise TypeError(f"unknown sensitivity {sens!r}")

    if isinstance(sens, (ThresholdedSign, ThresholdedLogGradient)):
        upwind = np.where(v > 0, Sl, Sr)
        v = np.where(upwind < sens.S_0, v, 0.0)
    return _scalar_or_array(v, scalar)


def reaction_rate(spec: ModelSpec, S):
    """Per-capita growth rate ``r 1_{S > S_0}`` (0 at ``S == S_0``)."""
    scalar = np.ndim(S) == 0
    S = np.asarray(S, dtype=float)
    g = spec.growth
    if isinstance(g, NoGrowth):
        out = np.zeros_like(S)
    else:
        out = np.where(S > g.S_0, g.r, 0.0)
    return _scalar_or_array(out, scalar)


def consumption_rate(spec: ModelSpec, S, rho):
    """Signal uptake ``k(S, rho)``; never negative for ``S, rho >= 0``."""
    scalar = np.ndim(S) == 0 and np.ndim(rho) == 0
    S = np.asarray(S, dtype=float)
    rho = np.asarray(rho, dtype=float)
    c = spec.consumption
    if isinstance(c, ConstantConsumption):
        out = c.k * rho * np.ones_like(S)
    elif isinstance(c, LinearConsumption):
        out = c.k * rho * S
    else:
        out = c.k * rho * np.power(np.maximum(S, 0.0), c.m)
    return _scalar_or_array(out, scalar)

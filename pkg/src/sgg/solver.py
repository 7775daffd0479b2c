"""Finite-volume, semi-implicit, upwind time integration of the model family.

One step, for a state on a uniform cell-centered grid:

1. face velocities from the current S (and A);
2. explicit first-order upwind advection of rho;
3. backward-Euler diffusion of rho (tridiagonal solve, applied in flux form);
4. explicit growth ``r(S) rho``;
5. S: explicit consumption, then backward-Euler diffusion;
6. A: explicit ``beta rho - alpha A``, then backward-Euler diffusion;
7. optional clamp ``S = max(S, eps)``.

Consumption and secretion use rho from the start of the step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import erf

from . import model as m
from .errors import BreakdownError, DomainError
from .state import (
    CLAMP_AND_CONTINUE,
    HALT,
    NONFINITE_VALUE,
    NONPOSITIVE_SIGNAL,
    BoundarySpec,
    BreakdownRecord,
    FieldState,
    Grid1D,
    SimConfig,
)
from . import _kernels as K
from .tridiag import diffusion_system, solve_tridiagonal

logger = logging.getLogger(__name__)

__all__ = [
    "Gaussian",
    "HalfGaussian",
    "Plateau",
    "FromProfile",
    "Custom",
    "initial_condition",
    "face_velocities",
    "select_dt",
    "step",
    "reference_step",
    "run",
]

# clamp applied after a breakdown under CLAMP_AND_CONTINUE when no epsilon is configured
DEFAULT_RESCUE_EPSILON = 1e-12


# --- initial conditions -----------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    center: float
    width: float
    mass: float


@dataclass(frozen=True)
class HalfGaussian:
    """Gaussian restricted to ``x <= center``; ``mass`` is the retained mass."""

    center: float
    width: float
    mass: float


@dataclass(frozen=True)
class Plateau:
    edge: float
    height: float


@dataclass(frozen=True)
class FromProfile:
    """Place a traveling-wave profile so that its ``z = 0`` sits at ``x = shift``."""

    profile: object
    shift: float


@dataclass(frozen=True)
class Custom:
    rho: np.ndarray
    S: np.ndarray
    A: Optional[np.ndarray] = None


InitKind = Union[Gaussian, HalfGaussian, Plateau, FromProfile, Custom]


def _gaussian_cell_average(faces, center, width):
    cdf = 0.5 * (1.0 + erf((faces - center) / (np.sqrt(2.0) * width)))
    return np.diff(cdf) / np.diff(faces)


def initial_condition(kind: InitKind, grid: Grid1D, S_init: float = 1.0,
                      with_attractant: bool = False) -> FieldState:
    """Cell-averaged initial state; S is uniform at ``S_init`` unless the kind carries S."""
    faces = grid.faces
    n = grid.n_cells
    A = np.zeros(n) if with_attractant else None
    S = np.full(n, float(S_init))

    if isinstance(kind, (Gaussian, HalfGaussian)):
        if not kind.mass > 0:
            raise DomainError("initial mass must be > 0")
        if not kind.width > 0:
            raise DomainError("width must be > 0")
        if isinstance(kind, Gaussian):
            rho = kind.mass * _gaussian_cell_average(faces, kind.center, kind.width)
        else:
            # cells straddling the center keep only their left part
            clipped = np.minimum(faces, kind.center)
            cdf = 0.5 * (1.0 + erf((clipped - kind.center) / (np.sqrt(2.0) * kind.width)))
            rho = 2.0 * kind.mass * np.diff(cdf) / grid.dx
    elif isinstance(kind, Plateau):
        if not kind.height > 0:
            raise DomainError("plateau height must be > 0")
        covered = np.clip((kind.edge - faces[:-1]) / grid.dx, 0.0, 1.0)
        # snap round-off so cells fully on one side of the edge are exactly 0 or 1
        covered[np.abs(covered - 1.0) < 1e-9] = 1.0
        covered[covered < 1e-9] = 0.0
        rho = kind.height * covered
    elif isinstance(kind, FromProfile):
        p = kind.profile
        z = grid.centers - kind.shift
        rho = np.interp(z, p.z, p.rho)
        S = np.interp(z, p.z, p.S)
        if with_attractant:
            A = np.interp(z, p.z, p.A) if p.A is not None else np.zeros(n)
    elif isinstance(kind, Custom):
        rho = np.array(kind.rho, dtype=float)
        S = np.array(kind.S, dtype=float)
        if with_attractant:
            A = np.zeros(n) if kind.A is None else np.array(kind.A, dtype=float)
        if len(rho) != n or len(S) != n:
            raise DomainError("custom samples must match the grid")
    else:
        raise TypeError(f"unknown initial condition {kind!r}")

    if np.any(rho < 0):
        raise DomainError("initial density must be non-negative")
    return FieldState(0.0, np.asarray(rho, dtype=float), np.asarray(S, dtype=float), A)


# --- one time step ----------------------------------------------------------

def face_velocities(spec: m.ModelSpec, state: FieldState, dx: float) -> np.ndarray:
    """Advection velocity on the n-1 interior faces."""
    S = state.S
    A = state.A
    if A is not None:
        return m.advection_velocity(spec, S[:-1], S[1:], A[:-1], A[1:], dx)
    return m.advection_velocity(spec, S[:-1], S[1:], dx=dx)


def select_dt(spec: m.ModelSpec, state: FieldState, v: np.ndarray, dx: float,
              config: SimConfig) -> float:
    """Largest admissible step.

    The advective bound uses the total outflow speed of each cell, so an
    explicit upwind update cannot drive rho negative even where both faces
    point outward.
    """
    dt = min(config.dt_max, config.cfl * dx * dx / (2.0 * spec.d))
    if v.size:
        out = np.zeros(v.size + 1)
        out[:-1] += np.maximum(v, 0.0)
        out[1:] += np.maximum(-v, 0.0)
        vmax = out.max()
        if vmax > 0:
            dt = min(dt, config.cfl * dx / vmax)
    if isinstance(spec.consumption, (m.LinearConsumption, m.PowerConsumption)):
        rmax = float(np.max(state.rho))
        if rmax > 0:
            dt = min(dt, 0.9 / (spec.consumption.k * rmax))
    if isinstance(spec.growth, m.ThresholdGrowth):
        dt = min(dt, 0.9 / spec.growth.r)
    if spec.attractant is not None:
        dt = min(dt, 0.9 / spec.attractant.alpha)
    return dt


def _implicit_diffusion(u: np.ndarray, coef: float, dt: float, dx: float,
                        left: Optional[float] = None, right: Optional[float] = None) -> np.ndarray:
    if coef == 0.0:
        return u
    a = dt * coef / (dx * dx)
    lower, diag, upper = diffusion_system(u.size, a, left is not None, right is not None)
    rhs = u.copy()
    if left is not None:
        rhs[0] += 2.0 * a * left
    if right is not None:
        rhs[-1] += 2.0 * a * right
    return solve_tridiagonal(lower, diag, upper, rhs)


def _conservative_diffusion(u: np.ndarray, coef: float, dt: float, dx: float) -> np.ndarray:
    """No-flux implicit diffusion applied as telescoping face fluxes of the solved field."""
    if coef == 0.0:
        return u
    a = dt * coef / (dx * dx)
    solved = _implicit_diffusion(u, coef, dt, dx)
    flux = np.zeros(u.size + 1)
    flux[1:-1] = a * np.diff(solved)
    return u + np.diff(flux)


def _advance(state: FieldState, spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec,
             config: SimConfig, t_stop: Optional[float] = None):
    """One step; returns ``(new_state, dt, issue)`` with ``issue = (cause, cell)`` or None."""
    dx = grid.dx
    rho = state.rho
    S = state.S
    v = face_velocities(spec, state, dx)
    dt = select_dt(spec, state, v, dx, config)
    if t_stop is not None:
        dt = min(dt, t_stop - state.t)
    if not dt > 0:
        raise DomainError("non-positive time step")

    # upwind advection, zero flux through the walls
    flux = np.zeros(rho.size + 1)
    flux[1:-1] = np.maximum(v, 0.0) * rho[:-1] + np.minimum(v, 0.0) * rho[1:]
    rho_new = rho - (dt / dx) * np.diff(flux)
    rho_new = _conservative_diffusion(rho_new, spec.d, dt, dx)
    if not isinstance(spec.growth, m.NoGrowth):
        rho_new = rho_new * (1.0 + dt * m.reaction_rate(spec, S))

    S_new = S - dt * m.consumption_rate(spec, S, rho)
    S_new = _implicit_diffusion(S_new, spec.D, dt, dx, bc.S_left, bc.S_right)

    A_new = None
    if state.A is not None and spec.attractant is not None:
        att = spec.attractant
        A_new = state.A + dt * (att.beta * rho - att.alpha * state.A)
        A_new = _implicit_diffusion(A_new, att.D_A, dt, dx)

    issue = None
    for arr in (rho_new, S_new) + ((A_new,) if A_new is not None else ()):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            issue = (NONFINITE_VALUE, int(bad[0]))
            break
    if issue is None:
        if config.clamp_epsilon is not None:
            S_new = np.maximum(S_new, config.clamp_epsilon)
        else:
            bad = np.flatnonzero(S_new <= 0)
            if bad.size:
                issue = (NONPOSITIVE_SIGNAL, int(bad[0]))
                if config.breakdown_policy == CLAMP_AND_CONTINUE:
                    S_new = np.maximum(S_new, DEFAULT_RESCUE_EPSILON)

    t_new = state.t + dt
    if t_stop is not None and abs(t_new - t_stop) <= 1e-12 * max(1.0, abs(t_stop)):
        t_new = t_stop
    return FieldState(t_new, rho_new, S_new, A_new), dt, issue


def _kernel_params(spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec, config: SimConfig) -> tuple:
    sens = spec.sensitivity
    if isinstance(sens, m.LogGradient):
        sp = (K.LOG, sens.chi, 0.0, 0.0, 0.0)
    elif isinstance(sens, m.BinaryTwoSignal):
        sp = (K.BINARY, sens.chi_S, sens.chi_A, 0.0, 0.0)
    elif isinstance(sens, m.Tanh):
        sp = (K.TANH, sens.chi, 0.0, sens.f_scale, 0.0)
    elif isinstance(sens, m.ThresholdedSign):
        sp = (K.THR_SIGN, sens.chi, 0.0, 0.0, sens.S_0)
    else:
        sp = (K.THR_LOG, sens.chi, 0.0, 0.0, sens.S_0)
    cons = spec.consumption
    if isinstance(cons, m.ConstantConsumption):
        cp = (K.CONSTANT, cons.k, 1.0)
    elif isinstance(cons, m.LinearConsumption):
        cp = (K.LINEAR, cons.k, 1.0)
    else:
        cp = (K.POWER, cons.k, cons.m)
    g = spec.growth
    gp = (g.r, g.S_0) if isinstance(g, m.ThresholdGrowth) else (0.0, 0.0)
    att = spec.attractant
    ap = (att.D_A, att.alpha, att.beta) if att is not None else (0.0, 1.0, 0.0)
    bp = (bc.S_left is not None, bc.S_left or 0.0, bc.S_right is not None, bc.S_right or 0.0)
    clamp = config.clamp_epsilon is not None
    run_p = (grid.dx, config.dt_max, config.cfl, clamp, config.clamp_epsilon if clamp else 0.0,
             K.HALT if config.breakdown_policy == HALT else K.CLAMP, DEFAULT_RESCUE_EPSILON)
    return sp + cp + gp + (spec.d, spec.D) + ap + bp + run_p


_CAUSES = {K.NONPOSITIVE: NONPOSITIVE_SIGNAL, K.NONFINITE: NONFINITE_VALUE}


def _advance_compiled(state: FieldState, spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec,
                      config: SimConfig, target: float, max_steps: int, params=None):
    """Run the compiled loop on copies of the state arrays."""
    params = params or _kernel_params(spec, grid, bc, config)
    rho = state.rho.astype(float, copy=True)
    S = state.S.astype(float, copy=True)
    has_a = state.A is not None and spec.attractant is not None
    A = state.A.astype(float, copy=True) if has_a else np.zeros(1)
    t, steps, dt_lo, dt_hi, code, loc, t_issue = K.advance(
        rho, S, A, has_a, float(state.t), float(target), int(max_steps), *params)
    if code == K.BAD_LOG:
        raise DomainError(f"non-positive signal at face {loc} under logarithmic sensitivity")
    new = FieldState(float(t), rho, S, A if has_a else None)
    issue = None if code == K.OK else (_CAUSES[code], int(loc), float(t_issue))
    return new, steps, dt_lo, dt_hi, issue


def reference_step(state: FieldState, spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec,
                   config: SimConfig, t_stop: Optional[float] = None):
    """Pure numpy version of one step, kept as a cross-check for the compiled loop.

    Returns ``(new_state, dt, issue)``.
    """
    return _advance(state, spec, grid, bc, config, t_stop)


def step(state: FieldState, spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec,
         config: SimConfig, t_stop: Optional[float] = None) -> FieldState:
    """Advance by one admissible time step (never past ``t_stop``).

    Raises
    ------
    BreakdownError
        With cause ``NonpositiveSignal`` if S <= 0 after the update and no clamp
        is configured (policy Halt), or ``NonfiniteValue`` on overflow/NaN.
    """
    target = np.inf if t_stop is None else t_stop
    new, _, _, _, issue = _advance_compiled(state, spec, grid, bc, config, target, 1)
    if issue is not None:
        cause, loc, t_issue = issue
        if cause == NONFINITE_VALUE or config.breakdown_policy == HALT:
            raise BreakdownError(cause, loc, t_issue)
    return new


def run(init: FieldState, spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec, config: SimConfig,
        *, front_fraction: float = 0.5, stop_near_boundary: bool = True):
    """Integrate to ``config.t_end`` or breakdown, snapshotting every ``output_every``.

    Returns the final admissible state and a :class:`sgg.diagnostics.RunReport`.
    Under policy Halt the returned state is the last one before breakdown.  A
    run whose front comes within 10 cells of the right wall is stopped and
    flagged as invalidated.
    """
    from .diagnostics import RunRecorder

    bc.check(grid)
    if len(init.rho) != grid.n_cells:
        raise DomainError("initial state does not match the grid")
    params = _kernel_params(spec, grid, bc, config)
    state = init.copy()
    record = BreakdownRecord()
    recorder = RunRecorder(grid, spec, bc, config, front_fraction=front_fraction)
    recorder.add(state)
    n_steps = 0
    dt_lo, dt_hi = np.inf, 0.0
    k_out = 1
    invalidated = False
    while state.t < config.t_end:
        target = min(k_out * config.output_every, config.t_end)
        state, steps, lo, hi, issue = _advance_compiled(
            state, spec, grid, bc, config, target, np.iinfo(np.int64).max, params)
        n_steps += steps
        dt_lo, dt_hi = min(dt_lo, lo), max(dt_hi, hi)
        if issue is not None and not record.occurred:
            cause, loc, t_issue = issue
            record = BreakdownRecord(True, t_issue, cause, loc)
            logger.info("breakdown: %s at cell %d, t=%.6g", cause, loc, t_issue)
        recorder.add(state)
        if record.occurred and (record.cause == NONFINITE_VALUE or config.breakdown_policy == HALT):
            break
        k_out += 1
        if stop_near_boundary and recorder.front_near_right_wall():
            invalidated = True
            break
    scheme = {
        "dx": grid.dx,
        "n_cells": grid.n_cells,
        "x_min": grid.x_min,
        "x_max": grid.x_max,
        "domain_kind": grid.domain_kind,
        "cfl": config.cfl,
        "dt_max": config.dt_max,
        "clamp_epsilon": config.clamp_epsilon,
        "breakdown_policy": config.breakdown_policy,
        "output_every": config.output_every,
        "t_end": config.t_end,
        "steps": n_steps,
        "dt_smallest": None if n_steps == 0 else float(dt_lo),
        "dt_largest": None if n_steps == 0 else float(dt_hi),
    }
    return state, recorder.finish(record, invalidated, scheme)

"""Front tracking, speed fits, phase portraits and run monitors."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientData, NoCrossing
from .state import BreakdownRecord, FieldState, Grid1D

__all__ = [
    "SignalLevel",
    "DensityLevel",
    "FrontTrajectory",
    "SpeedFit",
    "PhasePortrait",
    "RunReport",
    "front_position",
    "signal_crossing",
    "fit_speed",
    "phase_portrait",
    "monitors",
    "vertex_estimate",
    "write_snapshots_csv",
    "write_trajectory_csv",
    "write_portrait_csv",
    "fmt",
]


def fmt(x) -> str:
    """Float formatting used by every CSV writer (17 significant digits)."""
    if x is None:
        return ""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SignalLevel:
    """Locate ``S = S_min + fraction * (S_ref - S_min)``; ``S_ref`` defaults to max S."""

    fraction: float = 0.5
    S_ref: Optional[float] = None

    def describe(self) -> str:
        return f"signal-level({self.fraction})"


@dataclass(frozen=True)
class DensityLevel:
    level: float

    def describe(self) -> str:
        return f"density-level({self.level})"


def _rightmost_crossing(x: np.ndarray, u: np.ndarray, level: float) -> float:
    above = u >= level
    idx = np.flatnonzero(above[:-1] != above[1:])
    if idx.size == 0:
        raise NoCrossing(f"level {level:g} not crossed")
    i = idx[-1]
    u0, u1 = u[i], u[i + 1]
    return float(x[i] + (level - u0) / (u1 - u0) * (x[i + 1] - x[i]))


def front_position(state: FieldState, grid: Grid1D, mode=SignalLevel()) -> float:
    """Rightmost crossing of the locator level, linearly interpolated between cell centers.

    Raises
    ------
    NoCrossing
        If the level is not attained (e.g. uniform S).
    """
    x = grid.centers
    if isinstance(mode, SignalLevel):
        if not 0 < mode.fraction < 1:
            raise ValueError("fraction must lie in (0, 1)")
        s_min = float(np.min(state.S))
        s_ref = float(np.max(state.S)) if mode.S_ref is None else mode.S_ref
        if not s_ref > s_min:
            raise NoCrossing("signal is uniform")
        return _rightmost_crossing(x, state.S, s_min + mode.fraction * (s_ref - s_min))
    return _rightmost_crossing(x, state.rho, mode.level)


def signal_crossing(state: FieldState, grid: Grid1D, level: float) -> float:
    """Rightmost position where S crosses an absolute ``level`` (e.g. a threshold)."""
    return _rightmost_crossing(grid.centers, state.S, level)


@dataclass
class FrontTrajectory:
    samples: List[Tuple[float, float]] = field(default_factory=list)
    threshold_spec: str = "signal-level(0.5)"

    @property
    def t(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def x(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


@dataclass(frozen=True)
class SpeedFit:
    c_fit: float
    r_squared: float
    window: Tuple[float, float]

    def to_dict(self) -> dict:
        return {"c_fit": self.c_fit, "r_squared": self.r_squared, "window": list(self.window)}


def fit_speed(traj: FrontTrajectory, window_fraction: float = 0.5, min_samples: int = 10) -> SpeedFit:
    """Least-squares slope of front position against time over the final ``window_fraction``."""
    t, x = traj.t, traj.x
    n = len(t)
    start = n - int(math.ceil(window_fraction * n))
    t, x = t[start:], x[start:]
    if len(t) < min_samples:
        raise InsufficientData(f"{len(t)} samples in the fit window, need {min_samples}")
    tm, xm = t.mean(), x.mean()
    stt = np.sum((t - tm) ** 2)
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((t - tm) * (x - xm)) / stt)
    resid = x - (xm + slope * (t - tm))
    r2 = 1.0 if sxx == 0 else float(max(0.0, 1.0 - np.sum(resid ** 2) / sxx))
    return SpeedFit(slope, min(r2, 1.0), (float(t[0]), float(t[-1])))


@dataclass
class PhasePortrait:
    """Points ``(rho, drho/dz)`` ordered by position; ``interface`` marks excluded cells."""

    x: np.ndarray
    rho: np.ndarray
    drho_dz: np.ndarray
    interface: np.ndarray
    c_used: Optional[float] = None

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.rho, self.drho_dz])

    def kept(self) -> "PhasePortrait":
        keep = ~self.interface
        return PhasePortrait(self.x[keep], self.rho[keep], self.drho_dz[keep],
                             self.interface[keep], self.c_used)


def phase_portrait(state: FieldState, grid: Grid1D, c_used: Optional[float] = None,
                   threshold: Optional[float] = None, exclude: int = 3) -> PhasePortrait:
    """Central differences of rho on interior cells.

    When ``threshold`` is given, the ``exclude`` cells on each side of the
    rightmost ``S = threshold`` crossing are flagged as interface cells.
    """
    x = grid.centers
    rho = state.rho
    drho = (rho[2:] - rho[:-2]) / (2.0 * grid.dx)
    xi = x[1:-1]
    flags = np.zeros(xi.size, dtype=bool)
    if threshold is not None:
        try:
            xf = signal_crossing(state, grid, threshold)
        except NoCrossing:
            xf = None
        if xf is not None:
            j = int(np.searchsorted(xi, xf))
            flags[max(0, j - exclude):j + exclude] = True
    ok = np.isfinite(drho) & np.isfinite(rho[1:-1])
    return PhasePortrait(xi[ok], rho[1:-1][ok], drho[ok], flags[ok], c_used)


def vertex_estimate(portrait: PhasePortrait, interface_x: float, rho_floor: float = 0.0,
                    window: float = 10.0) -> float:
    """Vertex of the quadratic ``rho' = a rho^2 + b rho + e`` fitted to back-side points.

    Only points within ``window`` behind the interface with ``rho > rho_floor``
    are used; further back the profile still carries the initial transient.
    """
    p = portrait.kept()
    sel = (p.x < interface_x) & (p.x > interface_x - window) & (p.rho > rho_floor)
    if sel.sum() < 3:
        raise InsufficientData("not enough back-side points for a parabola fit")
    a, b, _ = np.polyfit(p.rho[sel], p.drho_dz[sel], 2)
    return float(-b / (2.0 * a))


def monitors(states: Iterable[FieldState], dx: float) -> dict:
    """Per-snapshot mass, min/max of S and min of rho."""
    out = {"t": [], "mass": [], "min_S": [], "max_S": [], "min_rho": []}
    for s in states:
        out["t"].append(float(s.t))
        out["mass"].append(s.mass(dx))
        out["min_S"].append(float(np.min(s.S)))
        out["max_S"].append(float(np.max(s.S)))
        out["min_rho"].append(float(np.min(s.rho)))
    return out


@dataclass
class RunReport:
    front: FrontTrajectory
    speed_fit: Optional[SpeedFit]
    monitors: dict
    breakdown: BreakdownRecord
    invalidated: bool
    scheme: dict
    locator_speeds: dict
    snapshots: List[FieldState] = field(default_factory=list, repr=False)

    @property
    def c_fit(self) -> Optional[float]:
        return None if self.speed_fit is None else self.speed_fit.c_fit

    def to_dict(self) -> dict:
        return {
            "front": {"threshold_spec": self.front.threshold_spec,
                      "t": [s[0] for s in self.front.samples],
                      "x": [s[1] for s in self.front.samples]},
            "speed_fit": None if self.speed_fit is None else self.speed_fit.to_dict(),
            "locator_speeds": self.locator_speeds,
            "monitors": self.monitors,
            "breakdown": self.breakdown.to_dict(),
            "invalidated": self.invalidated,
            "scheme": self.scheme,
        }

    def to_json(self) -> str:
        return json.dumps(_finite(self.to_dict()), indent=2, sort_keys=True)


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


class RunRecorder:
    """Collects snapshots during :func:`sgg.solver.run` and builds the report."""

    def __init__(self, grid: Grid1D, spec, bc, config, front_fraction: float = 0.5):
        self.grid = grid
        self.config = config
        self.locator = SignalLevel(front_fraction)
        self.snapshots: List[FieldState] = []
        self.front = FrontTrajectory(threshold_spec=self.locator.describe())
        self._alt = {f: FrontTrajectory(threshold_spec=SignalLevel(f).describe())
                     for f in (0.25, 0.5, 0.75)}

    def add(self, state: FieldState) -> None:
        if self.snapshots and state.t <= self.snapshots[-1].t:
            return
        self.snapshots.append(state.copy())
        for frac, traj in [(None, self.front)] + list(self._alt.items()):
            mode = self.locator if frac is None else SignalLevel(frac)
            try:
                traj.samples.append((float(state.t), front_position(state, self.grid, mode)))
            except NoCrossing:
                pass

    def front_near_right_wall(self) -> bool:
        """True once the front is within 10 cells of the right wall.

        The reference maximum is frozen at the first snapshot: near the wall
        the signal ahead of the front is consumed and a level tied to the
        current max S slides back, hiding the arrival.  Signal everywhere
        below the level means the front has already passed the wall.
        """
        if not self.snapshots:
            return False
        last = self.snapshots[-1]
        if self.front.samples and self.front.samples[-1][1] >= self.grid.x_max - 10 * self.grid.dx:
            return True
        s_min, s_max = float(np.min(last.S)), float(np.max(self.snapshots[0].S))
        if not s_max > s_min:
            return False
        level = s_min + self.locator.fraction * (s_max - s_min)
        try:
            x = _rightmost_crossing(self.grid.centers, last.S, level)
        except NoCrossing:
            return bool(np.all(last.S < level))
        return x >= self.grid.x_max - 10 * self.grid.dx

    def finish(self, record: BreakdownRecord, invalidated: bool, scheme: dict) -> RunReport:
        def _fit(traj):
            try:
                return fit_speed(traj)
            except InsufficientData:
                return None

        fit = _fit(self.front)
        alt = {}
        for frac, traj in self._alt.items():
            f = _fit(traj)
            alt[str(frac)] = None if f is None else f.c_fit
        return RunReport(self.front, fit, monitors(self.snapshots, self.grid.dx), record,
                         invalidated, scheme, alt, self.snapshots)


# --- CSV export -------------------------------------------------------------

def write_snapshots_csv(path, snapshots: Sequence[FieldState], grid: Grid1D) -> None:
    """Long-format dump with header ``t,x,rho,S[,A]``."""
    has_a = any(s.A is not None for s in snapshots)
    x = grid.centers
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "rho", "S"] + (["A"] if has_a else []))
        for s in snapshots:
            t = fmt(s.t)
            for i in range(x.size):
                row = [t, fmt(x[i]), fmt(s.rho[i]), fmt(s.S[i])]
                if has_a:
                    row.append(fmt(s.A[i]) if s.A is not None else "")
                w.writerow(row)


def write_trajectory_csv(path, traj: FrontTrajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x_front"])
        for t, x in traj.samples:
            w.writerow([fmt(t), fmt(x)])


def write_portrait_csv(path, portrait: PhasePortrait, extra: Optional[dict] = None) -> None:
    """Columns ``x, rho, drho_dz, interface`` plus any ``extra`` equal-length columns."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "rho", "drho_dz", "interface"] + list(extra))
        for i in range(portrait.rho.size):
            w.writerow([fmt(portrait.x[i]), fmt(portrait.rho[i]), fmt(portrait.drho_dz[i]),
                        int(portrait.interface[i])] + [fmt(col[i]) for col in extra.values()])

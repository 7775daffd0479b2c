"""Closed-form traveling waves and wave-speed formulas.

Four constructions are covered:

* Keller-Segel with logarithmic sensitivity and constant uptake (``D = 0``):
  explicit profile, speed ``c = k M / S_init``.
* Two-signal model with binary sensitivities: piecewise-exponential density,
  speed from the implicit relation ``chi_S - c = chi_A c / sqrt(c^2 + 4 alpha D_A)``.
* Go-or-grow with thresholded sign sensitivity: pulled/pushed dichotomy.
* Go-or-grow with thresholded logarithmic sensitivity: speed set by the
  larger of the leading-edge and back-of-wave constraints.

Profiles live in the moving frame ``z = x - c t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import model as m
from .errors import ConstructionError, DomainError
from .tridiag import solve_tridiagonal

__all__ = [
    "Branch",
    "Constraint",
    "SpeedResult",
    "WaveProfile",
    "TwoSignalRates",
    "bisect",
    "ks_speed",
    "ks_profile",
    "ks_halfline_spike_profile",
    "two_signal_residual",
    "two_signal_speed",
    "two_signal_rates",
    "two_signal_profile",
    "gogrow_speed",
    "gogrow_profile",
    "logsens_speed",
    "logsens_back_flux",
    "logsens_phase_curves",
    "residual_of_profile",
]


class Branch(str, Enum):
    DIRECT = "Direct"
    IMPLICIT_ROOT = "ImplicitRoot"
    PULLED = "Pulled"
    PUSHED_CHEMOTAXIS = "PushedChemotaxis"
    PUSHED_BACK_CONSTRAINT = "PushedBackConstraint"


@dataclass(frozen=True)
class Constraint:
    name: str
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class SpeedResult:
    c: float
    branch: Branch
    residual: float = 0.0
    constraints: Tuple[Constraint, ...] = ()

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "branch": self.branch.value,
            "residual": self.residual,
            "constraints": [{"name": k.name, "satisfied": k.satisfied, "margin": k.margin}
                            for k in self.constraints],
        }


@dataclass
class WaveProfile:
    z: np.ndarray
    rho: np.ndarray
    S: np.ndarray
    c: float
    A: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TwoSignalRates:
    lambda_minus: float
    lambda_plus: float
    mu_minus: float
    mu_plus: float
    degenerate: bool = False


def _positive(**kw):
    for name, val in kw.items():
        if not val > 0:
            raise DomainError(f"{name} must be > 0, got {val}")


def _check_grid(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2 or np.any(np.diff(z) <= 0):
        raise DomainError("z_grid must be a strictly increasing 1-D array")
    return z


# --- root finding -----------------------------------------------------------

def bisect(g: Callable[[float], float], lo: float, hi: float, ftol: float,
           max_iter: int = 200) -> Tuple[float, float]:
    """Bracketed bisection for a sign change of ``g`` on ``[lo, hi]``.

    Stops once ``|g| <= ftol`` or the bracket cannot be split further in
    floating point.  Returns ``(root, g(root))``.
    """
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0:
        return lo, 0.0
    if g_hi == 0:
        return hi, 0.0
    if (g_lo > 0) == (g_hi > 0):
        raise DomainError("g(lo) and g(hi) must have opposite signs")
    best, g_best = (lo, g_lo) if abs(g_lo) < abs(g_hi) else (hi, g_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if abs(g_mid) < abs(g_best):
            best, g_best = mid, g_mid
        if abs(g_mid) <= ftol or mid in (lo, hi):
            break
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return best, g_best


# --- Keller-Segel -----------------------------------------------------------

def ks_speed(k: float, M: float, S_init: float) -> SpeedResult:
    """``c = k M / S_init``: the uptake balance over the whole wave."""
    _positive(k=k, M=M, S_init=S_init)
    return SpeedResult(k * M / S_init, Branch.DIRECT, 0.0)


def ks_mass_integral(d: float, chi: float, c: float) -> float:
    """``int exp(-c z/d) (1 + exp(-c z/d))**(chi/(d-chi)) dz = (chi - d)/c``.

    Substituting ``u = exp(-c z/d)`` gives ``(d/c) int_0^inf (1+u)**p du`` with
    ``p = chi/(d-chi) < -1``, i.e. ``(d/c) B(1, -p-1) = (d/c)/(-p-1)``.
    """
    return (chi - d) / c


def ks_profile(d: float, chi: float, k: float, M: float, S_init: float, z_grid) -> WaveProfile:
    """Keller-Segel wave for ``D = 0``, constant uptake, centered so ``S(0) = S_init 2**(d/(d-chi))``."""
    _positive(d=d, k=k, M=M, S_init=S_init)
    if not chi > d:
        raise ConstructionError(f"no admissible wave: Keller-Segel waves need chi > d (chi={chi}, d={d})")
    z = _check_grid(z_grid)
    c = ks_speed(k, M, S_init).c
    a_prime = M / ks_mass_integral(d, chi, c)
    w = -c * z / d
    # log(1 + e^w) without overflow
    l1p = np.logaddexp(0.0, w)
    S = S_init * np.exp(d / (d - chi) * l1p)
    rho = a_prime * np.exp(w + chi / (d - chi) * l1p)
    meta = {"construction": "keller-segel", "a_prime": a_prime, "M": M, "S_init": S_init,
            "S_minus": 0.0, "d": d, "chi": chi, "k": k, "D": 0.0}
    return WaveProfile(z, rho, S, c, None, meta)


def ks_halfline_spike_profile(d: float, chi: float, D: float, k: float, M: float, S_b: float,
                              x_grid) -> WaveProfile:
    """Stationary spike on ``x > 0`` with S = S_b at the origin and constant uptake.

    Zero flux gives ``rho = a S**(chi/d)``; then ``D S'' = k a S**(chi/d)`` has
    the decaying solution ``S = C (x + x0)**(-q)`` with ``q = 2d/(chi - d)``.
    The boundary influx ``D |S'(0)|`` equals the total uptake ``k M``.
    """
    _positive(d=d, D=D, k=k, M=M, S_b=S_b)
    if not chi > d:
        raise ConstructionError("a stationary spike needs chi > d")
    x = _check_grid(x_grid)
    p = chi / d
    q = 2.0 / (p - 1.0)
    x0 = D * q * S_b / (k * M)
    C = S_b * x0 ** q
    a = D * q * (q + 1.0) / (k * C ** (p - 1.0))
    S = C * (x + x0) ** (-q)
    rho = a * S ** p
    meta = {"construction": "halfline-spike", "a": a, "x0": x0, "M": M, "S_b": S_b,
            "d": d, "chi": chi, "k": k, "D": D}
    return WaveProfile(x, rho, S, 0.0, None, meta)


# --- two-signal model -------------------------------------------------------

def two_signal_residual(c: float, chi_S: float, chi_A: float, alpha: float, D_A: float) -> float:
    return chi_S - c - chi_A * c / math.sqrt(c * c + 4.0 * alpha * D_A)


def two_signal_speed(chi_S: float, chi_A: float, alpha: float, D_A: float) -> SpeedResult:
    """Unique root in ``(0, chi_S)`` of ``chi_S - c - chi_A c / sqrt(c^2 + 4 alpha D_A)``."""
    _positive(chi_S=chi_S, alpha=alpha, D_A=D_A)
    if chi_A < 0:
        raise DomainError("chi_A must be >= 0")
    if chi_A == 0:
        return SpeedResult(chi_S, Branch.IMPLICIT_ROOT, 0.0)
    g = lambda c: two_signal_residual(c, chi_S, chi_A, alpha, D_A)  # noqa: E731
    c, gc = bisect(g, 0.0, chi_S, ftol=1e-12 * chi_S)
    cons = (Constraint("0 < c < chi_S", 0 < c < chi_S, min(c, chi_S - c)),
            Constraint("c > chi_S - chi_A", c > chi_S - chi_A, c - (chi_S - chi_A)))
    return SpeedResult(c, Branch.IMPLICIT_ROOT, abs(gc) / chi_S, cons)


def two_signal_rates(c: float, chi_S: float, chi_A: float, d: float, alpha: float,
                     D_A: float, check: bool = True) -> TwoSignalRates:
    """Density decay rates behind/ahead of the attractant peak and kernel rates of A."""
    _positive(d=d, alpha=alpha, D_A=D_A)
    lam_m = (-c + chi_S + chi_A) / d
    lam_p = (c - chi_S + chi_A) / d
    root = math.sqrt(c * c + 4.0 * alpha * D_A)
    mu_m = (-c + root) / (2.0 * D_A)
    mu_p = (c + root) / (2.0 * D_A)
    if lam_m < 0 or lam_p < 0:
        raise ConstructionError(f"inadmissible speed c={c}: negative decay rate")
    degenerate = lam_m == 0 or lam_p == 0
    if check and not degenerate:
        gap = abs(lam_m * mu_m - lam_p * mu_p) / (lam_m * mu_m)
        if gap > 1e-9:
            raise ConstructionError(f"closure lambda_- mu_- = lambda_+ mu_+ violated (relative gap {gap:.3g})")
    return TwoSignalRates(lam_m, lam_p, mu_m, mu_p, degenerate)


def _exp_diff(z, lam, mu):
    """``(exp(-lam z) - exp(-mu z)) / (mu - lam)`` for z >= 0, stable as mu -> lam."""
    delta = mu - lam
    if abs(delta) * max(1.0, float(np.max(np.abs(z)))) < 1e-12:
        return z * np.exp(-lam * z)
    return np.exp(-lam * z) * (-np.expm1(-delta * z)) / delta


def attractant_closed_form(z, rho0: float, rates: TwoSignalRates, beta: float, c: float,
                           alpha: float, D_A: float) -> np.ndarray:
    """``A = beta * (kernel * rho)`` for the piecewise-exponential density, in closed form.

    The kernel solves ``-c K' - D_A K'' + alpha K = delta`` and equals
    ``a0 exp(mu_- z)`` for z < 0 and ``a0 exp(-mu_+ z)`` for z > 0 with
    ``a0 = 1 / sqrt(c^2 + 4 alpha D_A)``.
    """
    z = np.asarray(z, dtype=float)
    lm, lp, mm, mp = rates.lambda_minus, rates.lambda_plus, rates.mu_minus, rates.mu_plus
    a0 = 1.0 / math.sqrt(c * c + 4.0 * alpha * D_A)
    out = np.empty_like(z)
    pos = z >= 0
    zp = z[pos]
    out[pos] = (np.exp(-mp * zp) / (mp + lm) + _exp_diff(zp, lp, mp) + np.exp(-lp * zp) / (mm + lp))
    w = -z[~pos]
    out[~pos] = (np.exp(-lm * w) / (mp + lm) + _exp_diff(w, mm, lm) + np.exp(-mm * w) / (mm + lp))
    return beta * a0 * rho0 * out


def _signal_from_uptake(z, rho, c, consumption, S_init, D=0.0):
    """Integrate ``-c S' = D S'' - k(S, rho)`` from ``S(+inf) = S_init`` backward."""
    k = consumption.k
    if D == 0.0:
        # tail integral int_z^inf rho, trapezoid on the grid
        cum = cumulative_trapezoid(rho, z, initial=0.0)
        tail = cum[-1] - cum
        if isinstance(consumption, m.LinearConsumption):
            return S_init * np.exp(-k * tail / c)
        if isinstance(consumption, m.ConstantConsumption):
            return S_init - k * tail / c
        e = 1.0 - consumption.m
        return np.maximum(S_init ** e - e * k * tail / c, 0.0) ** (1.0 / e)
    if isinstance(consumption, m.PowerConsumption):
        raise DomainError("signal diffusion with power-law uptake is not supported")
    # linear two-point problem D S'' + c S' - k(S,rho) = 0 on the grid:
    # zero gradient at the left end, S = S_init at the right end
    h = z[1] - z[0]
    n = z.size
    lo = np.full(n, D / h ** 2 - c / (2 * h))
    up = np.full(n, D / h ** 2 + c / (2 * h))
    di = np.full(n, -2.0 * D / h ** 2)
    rhs = np.zeros(n)
    if isinstance(consumption, m.LinearConsumption):
        di -= k * rho
    else:
        rhs += k * rho
    up[0] += lo[0]
    lo[0] = 0.0
    rhs[-1] -= up[-1] * S_init
    up[-1] = 0.0
    return solve_tridiagonal(lo, di, up, rhs)


def two_signal_profile(chi_S: float, chi_A: float, d: float, alpha: float, D_A: float,
                       beta: float, M: float, z_grid, consumption=None, S_init: float = 1.0,
                       D_S: float = 0.0) -> WaveProfile:
    """Two-signal wave with the attractant peak at ``z = 0`` and mass ``M``.

    The signal is obtained by integrating its moving-frame equation with the
    given uptake kernel (linear ``k rho S`` with ``k = 1`` by default).
    """
    _positive(M=M, beta=beta, S_init=S_init)
    z = _check_grid(z_grid)
    speed = two_signal_speed(chi_S, chi_A, alpha, D_A)
    c = speed.c
    rates = two_signal_rates(c, chi_S, chi_A, d, alpha, D_A)
    if rates.degenerate:
        raise ConstructionError("degenerate rates: no aggregating wave when chi_A = 0")
    rho0 = M / (1.0 / rates.lambda_minus + 1.0 / rates.lambda_plus)
    rho = np.where(z < 0, rho0 * np.exp(rates.lambda_minus * np.minimum(z, 0.0)),
                   rho0 * np.exp(-rates.lambda_plus * np.maximum(z, 0.0)))
    A = attractant_closed_form(z, rho0, rates, beta, c, alpha, D_A)
    consumption = consumption or m.LinearConsumption(1.0)
    S = _signal_from_uptake(z, rho, c, consumption, S_init, D_S)
    meta = {"construction": "two-signal", "rho0": rho0, "M": M, "S_init": S_init,
            "S_minus": float(S[0]), "a0": 1.0 / math.sqrt(c * c + 4 * alpha * D_A),
            "rates": rates, "chi_S": chi_S, "chi_A": chi_A, "d": d, "alpha": alpha,
            "D_A": D_A, "beta": beta, "D": D_S, "k": consumption.k, "branch": speed.branch.value}
    return WaveProfile(z, rho, S, c, A, meta)


# --- go-or-grow -------------------------------------------------------------

def gogrow_speed(chi: float, r: float, d: float) -> SpeedResult:
    """``2 sqrt(r d)`` when ``chi <= sqrt(r d)``, else ``chi + r d / chi``."""
    _positive(chi=chi, r=r, d=d)
    s = math.sqrt(r * d)
    cons = (Constraint("chi <= sqrt(r d)", chi <= s, s - chi),)
    if chi <= s:
        return SpeedResult(2.0 * s, Branch.PULLED, 0.0, cons)
    return SpeedResult(chi + r * d / chi, Branch.PUSHED_CHEMOTAXIS, 0.0, cons)


def gogrow_profile(chi: float, r: float, d: float, c: float, z_grid, *, k: float = 1.0,
                   S_0: float = 1.0) -> WaveProfile:
    """Go-or-grow wave with ``rho(0) = 1`` and the threshold ``S = S_0`` at ``z = 0``.

    Behind: plateau ``J / (c - chi)``.  Ahead: ``(a + b z) exp(-lam z)`` at
    ``c = 2 sqrt(r d)``, else ``a exp(-lam z)`` with the steeper root.  S
    follows from linear uptake ``k rho S`` with ``D = 0``; the implied far-field
    value is reported as ``meta["S_init"]``.
    """
    _positive(chi=chi, r=r, d=d, c=c, k=k, S_0=S_0)
    if not c > chi:
        raise ConstructionError(f"no admissible wave: need c > chi (c={c}, chi={chi})")
    disc = c * c - 4.0 * r * d
    if disc < -1e-12 * c * c:
        raise ConstructionError("c below the linear spreading speed 2 sqrt(r d)")
    z = _check_grid(z_grid)
    a = 1.0
    critical = disc <= 1e-12 * c * c
    if critical:
        lam = c / (2.0 * d)
        b = a * (math.sqrt(r * d) - chi) / d
        if b < -1e-12:
            raise ConstructionError("b < 0: pulled profile requires chi <= sqrt(r d)")
        front_mass = a / lam + b / lam ** 2
        zp = np.maximum(z, 0.0)
        ahead = (a + b * zp) * np.exp(-lam * zp)
    else:
        lam = (c + math.sqrt(disc)) / (2.0 * d)
        b = 0.0
        if abs(d * lam - chi) > 1e-9 * max(1.0, chi):
            raise ConstructionError("flux continuity fails: c is not the pushed speed for this chi")
        front_mass = a / lam
        ahead = a * np.exp(-lam * np.maximum(z, 0.0))
    J = r * front_mass
    rho_minus = J / (c - chi)
    rho = np.where(z < 0, rho_minus, ahead)
    # log S = log S_0 + (k/c) int_0^z rho
    cum = _cumulative_from_zero(z, rho)
    S = S_0 * np.exp(k * cum / c)
    meta = {"construction": "go-or-grow", "a": a, "b": b, "lambda": lam, "J": J,
            "rho_minus": rho_minus, "S_0": S_0, "S_init": S_0 * math.exp(k * front_mass / c),
            "chi": chi, "r": r, "d": d, "k": k, "D": 0.0, "critical": bool(critical)}
    return WaveProfile(z, rho, S, c, None, meta)


def _cumulative_from_zero(z, rho):
    """``int_0^z rho`` by the trapezoid rule; 0 must lie inside the grid."""
    if not z[0] <= 0.0 <= z[-1]:
        raise DomainError("z_grid must contain z = 0")
    cum = cumulative_trapezoid(rho, z, initial=0.0)
    return cum - np.interp(0.0, z, cum)


# --- logarithmic go-or-grow -------------------------------------------------

def logsens_speed(chi: float, r: float, d: float, S_init: float, S_0: float) -> SpeedResult:
    """``2 sqrt(r max(d, chi log(S_init/S_0)))``."""
    _positive(chi=chi, r=r, d=d, S_init=S_init, S_0=S_0)
    if not S_init > S_0:
        raise DomainError("S_init must exceed S_0 (no region where cells divide)")
    L = chi * math.log(S_init / S_0)
    c = 2.0 * math.sqrt(r * max(d, L))
    cons = (Constraint("c^2 >= 4 r d", c * c >= 4 * r * d * (1 - 1e-15), c * c - 4 * r * d),
            Constraint("c^2 >= 4 r chi log(S_init/S_0)", c * c >= 4 * r * L * (1 - 1e-15),
                       c * c - 4 * r * L))
    branch = Branch.PULLED if d >= L else Branch.PUSHED_BACK_CONSTRAINT
    return SpeedResult(c, branch, 0.0, cons)


def logsens_back_flux(c: float, r: float, k: float, S_init: float, S_0: float) -> float:
    """Flux ``J = (r c / k) log(S_init / S_0)`` leaving the growth zone backward."""
    _positive(c=c, k=k, S_init=S_init, S_0=S_0)
    if r < 0:
        raise DomainError("r must be >= 0")
    return r * c / k * math.log(S_init / S_0)


def logsens_phase_curves(c: float, d: float, k: float, chi: float, J: float, r: float):
    """Theoretical phase-plane curves ``rho -> rho'``.

    Returns ``(front, back, info)``: ``front(rho) = -lam rho`` ahead of the
    threshold, ``back(rho) = (k chi/(c d)) (rho - rho_star)**2`` behind it,
    ``info`` holding ``lam`` and the vertex ``rho_star = c^2/(2 k chi)``.
    The perfect-square back curve assumes ``J = c^3/(4 k chi)``; the actual
    ``J`` is reported in ``info`` with the general quadratic ``back_general``.
    """
    _positive(c=c, d=d, k=k, chi=chi, r=r)
    disc = c * c - 4.0 * r * d
    if disc < 0:
        raise DomainError("c^2 < 4 r d: no real decay rate ahead of the threshold")
    lam = (c + math.sqrt(disc)) / (2.0 * d)
    rho_star = c * c / (2.0 * k * chi)
    K = k * chi / (c * d)

    def front(rho):
        return -lam * np.asarray(rho, dtype=float)

    def back(rho):
        return K * (np.asarray(rho, dtype=float) - rho_star) ** 2

    def back_general(rho):
        rho = np.asarray(rho, dtype=float)
        return (-c * rho + (k * chi / c) * rho ** 2 + J) / d

    info = {"lambda": lam, "rho_star": rho_star, "J": J, "J_square": c ** 3 / (4 * k * chi),
            "back_general": back_general}
    return front, back, info


# --- residual check ---------------------------------------------------------

def _sign(u):
    return np.sign(u)


def residual_of_profile(profile: WaveProfile, spec: m.ModelSpec, exclude: int = 2) -> float:
    """Max normalized residual of the moving-frame equations by central differences.

    For each equation the pointwise residual is divided by the largest
    magnitude reached by any of its terms on the grid.  Cells within
    ``exclude`` of an interface (the density kink at ``z = 0`` or the
    threshold crossing) are skipped, as are the two end cells.
    """
    z = profile.z
    h = np.diff(z)
    if np.max(np.abs(h - h[0])) > 1e-9 * abs(h[0]):
        raise DomainError("residual_of_profile needs a uniform grid")
    h = h[0]
    c = profile.c
    rho, S = profile.rho, profile.S

    def d1(u):
        return (u[2:] - u[:-2]) / (2 * h)

    def d2(u):
        return (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2

    sens = spec.sensitivity
    # velocity at cell centers from the smooth profile
    if isinstance(sens, m.LOGARITHMIC):
        vel = sens.chi * np.gradient(np.log(S), h)
        if isinstance(sens, m.ThresholdedLogGradient):
            vel = np.where(S < sens.S_0, vel, 0.0)
    elif isinstance(sens, m.ThresholdedSign):
        vel = sens.chi * _sign(np.gradient(S, h)) * (S < sens.S_0)
    elif isinstance(sens, m.Tanh):
        vel = sens.chi * np.tanh(m.tanh_gain(sens.f_scale, S) * np.gradient(S, h))
    else:
        vel = sens.chi_S * _sign(np.gradient(S, h))
        if profile.A is not None and sens.chi_A > 0:
            vel = vel + sens.chi_A * _sign(np.gradient(profile.A, h))
    r_rate = m.reaction_rate(spec, S)

    terms_rho = [-c * d1(rho), -spec.d * d2(rho), d1(rho * vel), -(r_rate * rho)[1:-1]]
    terms_S = [-c * d1(S), -spec.D * d2(S), m.consumption_rate(spec, S, rho)[1:-1]]
    eqs = [terms_rho, terms_S]
    if profile.A is not None and spec.attractant is not None:
        att = spec.attractant
        A = profile.A
        eqs.append([-c * d1(A), -att.D_A * d2(A), -att.beta * rho[1:-1], att.alpha * A[1:-1]])

    mask = np.ones(z.size - 2, dtype=bool)
    zi = z[1:-1]
    jumps = [0.0]
    thr = spec.threshold
    if thr is not None:
        above = S >= thr
        idx = np.flatnonzero(above[:-1] != above[1:])
        jumps.extend(0.5 * (z[idx] + z[idx + 1]))
    for zj in jumps:
        near = np.abs(zi - zj) <= (exclude + 0.5) * h
        mask &= ~near
    # sign changes of the velocity are interfaces too
    vj = np.flatnonzero(np.diff(np.sign(vel)) != 0)
    for j in vj:
        mask &= ~(np.abs(zi - 0.5 * (z[j] + z[j + 1])) <= (exclude + 0.5) * h)

    worst = 0.0
    for terms in eqs:
        T = np.vstack(terms)
        scale = np.max(np.abs(T[:, mask]))
        if scale == 0:
            continue
        res = np.abs(T.sum(axis=0))[mask] / scale
        worst = max(worst, float(np.max(res)))
    return worst

"""Compiled inner loop of the time integrator.

Mirrors the numpy formulation in :mod:`sgg.model` and :mod:`sgg.solver`
cell by cell; the tests compare the two.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# sensitivity codes
LOG, BINARY, TANH, THR_SIGN, THR_LOG = 0, 1, 2, 3, 4
# consumption codes
CONSTANT, LINEAR, POWER = 0, 1, 2
# issue codes
OK, NONPOSITIVE, NONFINITE, BAD_LOG = 0, 1, 2, 3
# breakdown policies
HALT, CLAMP = 0, 1


@njit(cache=True)
def _sign(u):
    if u > 0.0:
        return 1.0
    if u < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def face_velocity(kind, chi, chi_A, f_scale, s0, S, A, has_A, dx, v):
    """Fill ``v`` (length n-1); returns the first bad face index or -1."""
    n = S.shape[0]
    logarithmic = kind == LOG or kind == THR_LOG
    log_r = 0.0
    if logarithmic:
        if S[0] <= 0.0:
            return 0
        log_r = math.log(S[0])
    for j in range(n - 1):
        sl = S[j]
        sr = S[j + 1]
        if logarithmic:
            if sr <= 0.0:
                return j
            log_l = log_r
            log_r = math.log(sr)
            vj = chi * (log_r - log_l) / dx
        elif kind == BINARY:
            vj = chi * _sign(sr - sl)
            if has_A:
                vj += chi_A * _sign(A[j + 1] - A[j])
        elif kind == TANH:
            g = f_scale / (1.0 + 0.5 * (sl + sr)) ** 2
            vj = chi * math.tanh(g * (sr - sl) / dx)
        else:
            vj = chi * _sign(sr - sl)
        if kind == THR_SIGN or kind == THR_LOG:
            up = sl if vj > 0.0 else sr
            if not up < s0:
                vj = 0.0
        v[j] = vj
    return -1


@njit(cache=True)
def _implicit_diffusion(u, a, left_dir, left_val, right_dir, right_val, cp, dp):
    """In-place backward-Euler diffusion, ``a = dt*coef/dx^2``."""
    n = u.shape[0]
    if a == 0.0:
        return
    b0 = 1.0 + (3.0 * a if left_dir else a)
    bn = 1.0 + (3.0 * a if right_dir else a)
    r0 = u[0] + (2.0 * a * left_val if left_dir else 0.0)
    rn = u[n - 1] + (2.0 * a * right_val if right_dir else 0.0)
    # forward elimination
    cp[0] = -a / b0
    dp[0] = r0 / b0
    b = 1.0 + 2.0 * a
    i = 1
    # interior rows: cp reaches a floating-point fixed point, after which the
    # pivot no longer changes and the division can be hoisted
    while i < n - 1:
        inv = 1.0 / (b + a * cp[i - 1])
        cp[i] = -a * inv
        dp[i] = (u[i] + a * dp[i - 1]) * inv
        i += 1
        if cp[i - 1] == cp[i - 2]:
            break
    while i < n - 1:
        cp[i] = cp[i - 1]
        dp[i] = (u[i] + a * dp[i - 1]) * inv
        i += 1
    if n > 1:
        inv = 1.0 / (bn + a * cp[n - 2])
        cp[n - 1] = -a * inv
        dp[n - 1] = (rn + a * dp[n - 2]) * inv
    u[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        u[i] = dp[i] - cp[i] * u[i + 1]


@njit(cache=True)
def _conservative_diffusion(u, w, a, cp, dp):
    """No-flux backward-Euler diffusion of ``u`` in place; ``w`` is scratch.

    The solved field is turned back into face fluxes and the update is
    applied in telescoping form, so the sum is kept to summation round-off.
    """
    n = u.shape[0]
    if a == 0.0:
        return
    w[:] = u
    _implicit_diffusion(u, a, False, 0.0, False, 0.0, cp, dp)
    f_left = 0.0
    for i in range(n):
        f_right = a * (u[i + 1] - u[i]) if i < n - 1 else 0.0
        dp[i] = w[i] + (f_right - f_left)
        f_left = f_right
    u[:] = dp


@njit(cache=True)
def select_dt(v, rho, dx, d, dt_max, cfl, cons_kind, k, r, alpha, has_A):
    dt = min(dt_max, cfl * dx * dx / (2.0 * d))
    n = rho.shape[0]
    vmax = 0.0
    for i in range(n):
        out = 0.0
        if i < n - 1 and v[i] > 0.0:
            out += v[i]
        if i > 0 and v[i - 1] < 0.0:
            out -= v[i - 1]
        if out > vmax:
            vmax = out
    if vmax > 0.0:
        dt = min(dt, cfl * dx / vmax)
    if cons_kind != CONSTANT:
        rmax = 0.0
        for i in range(n):
            if rho[i] > rmax:
                rmax = rho[i]
        if rmax > 0.0:
            dt = min(dt, 0.9 / (k * rmax))
    if r > 0.0:
        dt = min(dt, 0.9 / r)
    if has_A:
        dt = min(dt, 0.9 / alpha)
    return dt


@njit(cache=True)
def advance(rho, S, A, has_A, t, target, max_steps,
            kind, chi, chi_A, f_scale, s0_sens,
            cons_kind, k, m_exp, r, s0_growth,
            d, D, D_A, alpha, beta,
            s_left_dir, s_left_val, s_right_dir, s_right_val,
            dx, dt_max, cfl, clamp, clamp_eps, policy, rescue_eps):
    """Step in place until ``t == target``, ``max_steps`` steps, or an issue.

    Returns ``(t, steps, dt_min, dt_max_used, code, loc, t_issue)``.  Under
    policy HALT the arrays keep the last admissible state.
    """
    n = rho.shape[0]
    v = np.empty(max(n - 1, 1))
    flux = np.zeros(n + 1)
    rho_new = np.empty(n)
    S_new = np.empty(n)
    A_new = np.empty(n)
    cp = np.empty(n)
    dp = np.empty(n)
    work = np.empty(n)
    steps = 0
    dt_lo = np.inf
    dt_hi = 0.0
    code = OK
    loc = -1
    t_issue = np.nan
    while t < target and steps < max_steps:
        bad = face_velocity(kind, chi, chi_A, f_scale, s0_sens, S, A, has_A, dx, v)
        if bad >= 0:
            return t, steps, dt_lo, dt_hi, BAD_LOG, bad, t
        dt = select_dt(v, rho, dx, d, dt_max, cfl, cons_kind, k, r, alpha, has_A)
        last = False
        if dt >= target - t:
            dt = target - t
            last = True
        # upwind advection
        lam = dt / dx
        f_left = 0.0
        for i in range(n):
            if i < n - 1:
                vj = v[i]
                f_right = vj * rho[i] if vj > 0.0 else vj * rho[i + 1]
            else:
                f_right = 0.0
            rho_new[i] = rho[i] - lam * (f_right - f_left)
            f_left = f_right
        _conservative_diffusion(rho_new, work, dt * d / (dx * dx), cp, dp)
        if r > 0.0:
            for i in range(n):
                if S[i] > s0_growth:
                    rho_new[i] *= 1.0 + dt * r
        # signal: explicit uptake with rho at the start of the step
        if cons_kind == CONSTANT:
            for i in range(n):
                S_new[i] = S[i] - dt * (k * rho[i])
        elif cons_kind == LINEAR:
            for i in range(n):
                S_new[i] = S[i] - dt * (k * rho[i] * S[i])
        else:
            for i in range(n):
                S_new[i] = S[i] - dt * (k * rho[i] * max(S[i], 0.0) ** m_exp)
        _implicit_diffusion(S_new, dt * D / (dx * dx), s_left_dir, s_left_val,
                            s_right_dir, s_right_val, cp, dp)
        if has_A:
            for i in range(n):
                A_new[i] = A[i] + dt * (beta * rho[i] - alpha * A[i])
            _implicit_diffusion(A_new, dt * D_A / (dx * dx), False, 0.0, False, 0.0, cp, dp)

        t_next = target if last else t + dt
        issue = OK
        where = -1
        # NaN and inf propagate into the sums; locate only when needed
        total = 0.0
        for i in range(n):
            total += rho_new[i] + S_new[i]
        if has_A:
            for i in range(n):
                total += A_new[i]
        if not math.isfinite(total):
            for i in range(n):
                if not (math.isfinite(rho_new[i]) and math.isfinite(S_new[i])
                        and (not has_A or math.isfinite(A_new[i]))):
                    issue = NONFINITE
                    where = i
                    break
        if issue == OK:
            if clamp:
                for i in range(n):
                    S_new[i] = max(S_new[i], clamp_eps)
            else:
                s_min = np.inf
                for i in range(n):
                    s_min = min(s_min, S_new[i])
                if s_min <= 0.0:
                    for i in range(n):
                        if S_new[i] <= 0.0:
                            issue = NONPOSITIVE
                            where = i
                            break
                if issue == NONPOSITIVE and policy == CLAMP:
                    for i in range(n):
                        S_new[i] = max(S_new[i], rescue_eps)
        if issue != OK and code == OK:
            code = issue
            loc = where
            t_issue = t_next
        if issue == NONFINITE or (issue == NONPOSITIVE and policy == HALT):
            return t, steps, dt_lo, dt_hi, code, loc, t_issue
        rho[:] = rho_new
        S[:] = S_new
        if has_A:
            A[:] = A_new
        t = t_next
        steps += 1
        dt_lo = min(dt_lo, dt)
        dt_hi = max(dt_hi, dt)
    return t, steps, dt_lo, dt_hi, code, loc, t_issue

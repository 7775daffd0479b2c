"""Tridiagonal solver used by the implicit diffusion steps."""
from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["solve_tridiagonal", "diffusion_system"]


@njit(cache=True)
def _thomas(lower, diag, upper, rhs):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    x = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve ``A x = rhs`` by forward elimination and back substitution.

    All four arrays have length n; ``lower[0]`` and ``upper[-1]`` are ignored.
    No pivoting: intended for diagonally dominant systems.
    """
    diag = np.ascontiguousarray(diag, dtype=float)
    n = diag.shape[0]
    if not (len(lower) == len(upper) == len(rhs) == n):
        raise ValueError("lower, diag, upper and rhs must have the same length")
    if n == 0:
        return np.empty(0)
    return _thomas(np.ascontiguousarray(lower, dtype=float), diag,
                   np.ascontiguousarray(upper, dtype=float),
                   np.ascontiguousarray(rhs, dtype=float))


def diffusion_system(n: int, a: float, left_dirichlet: bool = False, right_dirichlet: bool = False):
    """Bands of ``I - dt*coef*Laplacian`` on a cell-centered grid, ``a = dt*coef/dx**2``.

    No-flux walls by default.  A Dirichlet wall places its value on the face,
    half a cell from the boundary center, adding ``2a`` to the diagonal; the
    caller adds ``2a * value`` to the right-hand side.
    """
    lower = np.full(n, -a)
    upper = np.full(n, -a)
    diag = np.full(n, 1.0 + 2.0 * a)
    lower[0] = 0.0
    upper[-1] = 0.0
    diag[0] = 1.0 + (3.0 * a if left_dirichlet else a)
    diag[-1] = 1.0 + (3.0 * a if right_dirichlet else a)
    return lower, diag, upper

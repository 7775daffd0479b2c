import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from sgg.tridiag import diffusion_system, solve_tridiagonal


@given(n=st.integers(1, 60), seed=st.integers(0, 2**32 - 1))
def test_thomas_matches_dense_solve(n, seed):
    rng = np.random.default_rng(seed)
    lower, upper = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.5, 2.0, n)
    rhs = rng.normal(size=n)
    dense = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    np.testing.assert_allclose(solve_tridiagonal(lower, diag, upper, rhs),
                               np.linalg.solve(dense, rhs), rtol=1e-10, atol=1e-12)


def test_noflux_system_conserves_sum():
    lo, di, up = diffusion_system(50, 3.7)
    dense = np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
    np.testing.assert_allclose(dense.sum(axis=0), 1.0, rtol=0, atol=1e-14)


def test_dirichlet_holds_constant_state():
    # u = value everywhere is the fixed point once 2a*value is added to the rhs
    a, val = 0.8, 2.5
    lo, di, up = diffusion_system(20, a, True, True)
    rhs = np.full(20, val)
    rhs[0] += 2 * a * val
    rhs[-1] += 2 * a * val
    np.testing.assert_allclose(solve_tridiagonal(lo, di, up, rhs), val, rtol=1e-14)


def test_empty_system():
    assert solve_tridiagonal([], [], [], []).size == 0

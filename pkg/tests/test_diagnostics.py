import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgg import analytic as an
from sgg import diagnostics as dg
from sgg import model as m
from sgg import solver as sv
from sgg.errors import InsufficientData, NoCrossing
from sgg.state import BoundarySpec, FieldState, Grid1D, SimConfig

GRID = Grid1D(0.0, 10.0, 100)


def ramp_state(grid, top=1.0):
    x = grid.centers
    return FieldState(0.0, np.zeros(x.size), top * (x - grid.x_min) / (grid.x_max - grid.x_min))


def traj(t, x):
    return dg.FrontTrajectory(list(zip(map(float, t), map(float, x))))


# --- front_position ---------------------------------------------------------

def test_ramp_midpoint():
    assert dg.front_position(ramp_state(GRID), GRID) == pytest.approx(5.0, abs=GRID.dx)


def test_uniform_signal_has_no_crossing():
    state = FieldState(0.0, np.zeros(100), np.ones(100))
    with pytest.raises(NoCrossing):
        dg.front_position(state, GRID)


def test_density_level_rightmost():
    rho = np.zeros(100)
    rho[10:20] = 1.0
    rho[50:60] = 1.0
    state = FieldState(0.0, rho, np.ones(100))
    x = dg.front_position(state, GRID, dg.DensityLevel(0.5))
    assert x == pytest.approx(6.0, abs=GRID.dx)


def test_invalid_fraction():
    with pytest.raises(ValueError):
        dg.front_position(ramp_state(GRID), GRID, dg.SignalLevel(1.0))


@given(shift=st.floats(-50, 50))
def test_front_translation_equivariant(shift):
    shifted = Grid1D(GRID.x_min + shift, GRID.x_max + shift, GRID.n_cells)
    x0 = dg.front_position(ramp_state(GRID), GRID)
    assert dg.front_position(ramp_state(shifted), shifted) == pytest.approx(x0 + shift, abs=1e-9)


def test_front_refinement_stable():
    prof = an.ks_profile(1.0, 2.0, 1.0, 2.0, 1.0, np.linspace(-40, 40, 80001))
    xs = []
    for n in (200, 400):
        grid = Grid1D(0.0, 40.0, n)
        xs.append(dg.front_position(sv.initial_condition(sv.FromProfile(prof, 17.3), grid), grid))
    assert abs(xs[0] - xs[1]) <= 40.0 / 200


def test_ks_front_advances_at_analytic_speed():
    prof = an.ks_profile(1.0, 2.0, 1.0, 2.0, 1.0, np.linspace(-60, 60, 120001))
    grid = Grid1D(0.0, 60.0, 1200)
    spec = m.ModelSpec(m.LogGradient(2.0), m.ConstantConsumption(1.0))
    init = sv.initial_condition(sv.FromProfile(prof, 20.0), grid)
    final, report = sv.run(init, spec, grid, BoundarySpec(), SimConfig(t_end=4.0, clamp_epsilon=1e-12))
    x0 = report.front.x[1]
    x1 = dg.front_position(final, grid)
    assert x1 - x0 == pytest.approx(prof.c * (final.t - report.front.t[1]), abs=2 * grid.dx)


# --- fit_speed --------------------------------------------------------------

def test_exact_line():
    t = np.linspace(0, 10, 41)
    fit = dg.fit_speed(traj(t, 2.5 * t + 1))
    assert fit.c_fit == pytest.approx(2.5, rel=1e-13) and fit.r_squared == pytest.approx(1.0)
    assert fit.window == (5.0, 10.0)


def test_too_few_samples():
    with pytest.raises(InsufficientData):
        dg.fit_speed(traj(range(12), range(12)))


@given(dt=st.floats(-100, 100), dx=st.floats(-100, 100), seed=st.integers(0, 1000))
def test_fit_affine_equivariance(dt, dx, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 20, 40)
    x = 1.7 * t + 0.1 * rng.normal(size=t.size)
    a = dg.fit_speed(traj(t, x))
    b = dg.fit_speed(traj(t + dt, x + dx))
    assert b.c_fit == pytest.approx(a.c_fit, rel=1e-8, abs=1e-9)
    assert 0.0 <= b.r_squared <= 1.0


# --- phase portrait ---------------------------------------------------------

def test_exponential_portrait_on_line():
    x = GRID.centers
    state = FieldState(0.0, np.exp(-2 * x), np.ones(x.size))
    p = dg.phase_portrait(state, GRID)
    np.testing.assert_allclose(p.drho_dz, -2 * p.rho, rtol=2 * GRID.dx ** 2 * 4 / 6 + 1e-12)


def test_plateau_portrait():
    state = FieldState(0.0, np.full(100, 0.7), np.ones(100))
    p = dg.phase_portrait(state, GRID)
    assert np.all(p.rho == 0.7) and np.all(p.drho_dz == 0.0)
    assert np.all(np.diff(p.x) > 0)


def test_interface_cells_flagged():
    p = dg.phase_portrait(ramp_state(GRID), GRID, threshold=0.5, exclude=3)
    assert p.interface.sum() == 6
    assert np.all(np.abs(p.x[p.interface] - 5.0) < 0.35)
    assert p.kept().rho.size == p.rho.size - 6


def test_profile_portrait_matches_analytic_derivative():
    prof = an.gogrow_profile(2.0, 1.0, 1.0, 2.5, np.linspace(-20, 20, 400001))
    err = []
    for n in (400, 800):
        grid = Grid1D(0.0, 40.0, n)
        state = sv.initial_condition(sv.FromProfile(prof, 20.0), grid)
        p = dg.phase_portrait(state, grid)
        away = np.abs(p.x - 20.0) > 0.5
        exact = np.interp(p.x[away] - 20.0, prof.z, np.gradient(prof.rho, prof.z))
        err.append(np.max(np.abs(p.drho_dz[away] - exact)))
    assert err[1] < 0.3 * err[0]


def test_vertex_of_exact_parabola():
    rho = np.linspace(0.5, 4.0, 80)
    x = np.linspace(0.0, 8.0, 80)
    p = dg.PhasePortrait(x, rho, 0.3 * (rho - 2.2) ** 2, np.zeros(80, dtype=bool))
    assert dg.vertex_estimate(p, 9.0) == pytest.approx(2.2, rel=1e-10)
    with pytest.raises(InsufficientData):
        dg.vertex_estimate(p, -1.0)


# --- monitors and report ----------------------------------------------------

def test_monitors():
    s0 = FieldState(0.0, np.ones(100), np.linspace(1, 2, 100))
    s1 = FieldState(1.0, np.full(100, 0.5), np.linspace(0.5, 3, 100))
    mon = dg.monitors([s0, s1], GRID.dx)
    assert mon["t"] == [0.0, 1.0]
    assert mon["mass"] == pytest.approx([10.0, 5.0])
    assert mon["min_S"] == [1.0, 0.5] and mon["max_S"] == [2.0, 3.0] and mon["min_rho"] == [1.0, 0.5]


def test_constant_uptake_drives_signal_negative():
    spec = m.ModelSpec(m.BinaryTwoSignal(1.0, 0.0), m.ConstantConsumption(1.0))
    init = sv.initial_condition(sv.Plateau(5.0, 1.0), GRID)
    _, report = sv.run(init, spec, GRID, BoundarySpec(), SimConfig(t_end=5.0, breakdown_policy="clamp_and_continue"))
    assert min(report.monitors["min_S"]) < 1e-6 and report.breakdown.occurred


def test_growth_free_run_conserves_mass_in_monitors():
    spec = m.ModelSpec(m.BinaryTwoSignal(2.0, 0.0), m.LinearConsumption(1.0))
    init = sv.initial_condition(sv.Gaussian(3.0, 1.0, 1.0), GRID)
    _, report = sv.run(init, spec, GRID, BoundarySpec(), SimConfig(t_end=5.0))
    mass = np.array(report.monitors["mass"])
    assert np.max(np.abs(mass - mass[0])) / mass[0] <= 1e-10
    assert min(report.monitors["min_S"]) > 0


def test_report_json_roundtrip():
    spec = m.ModelSpec(m.BinaryTwoSignal(2.0, 0.0), m.LinearConsumption(1.0))
    init = sv.initial_condition(sv.Gaussian(3.0, 1.0, 1.0), GRID)
    _, report = sv.run(init, spec, GRID, BoundarySpec(), SimConfig(t_end=1.0))
    data = json.loads(report.to_json())
    assert set(data) == {"front", "speed_fit", "locator_speeds", "monitors", "breakdown",
                         "invalidated", "scheme"}
    assert data["breakdown"]["occurred"] is False


def test_fmt_17_digits():
    assert dg.fmt(0.1) == "0.10000000000000001"
    assert float(dg.fmt(math.pi)) == math.pi and dg.fmt(None) == ""


def test_csv_writers(tmp_path):
    s = FieldState(0.0, np.ones(100), np.ones(100), np.zeros(100))
    dg.write_snapshots_csv(tmp_path / "s.csv", [s], GRID)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,x,rho,S,A" and len(lines) == 101
    dg.write_trajectory_csv(tmp_path / "t.csv", traj([0, 1], [2, 3]))
    assert (tmp_path / "t.csv").read_text().splitlines() == ["t,x_front", "0,2", "1,3"]


def test_gogrow_profile_portrait_on_front_line():
    prof = an.gogrow_profile(2.0, 1.0, 1.0, 2.5, np.linspace(-20, 20, 400001))
    grid = Grid1D(0.0, 40.0, 800)
    state = sv.initial_condition(sv.FromProfile(prof, 20.0), grid)
    p = dg.phase_portrait(state, grid)
    ahead = p.x > 20.0 + 2 * grid.dx
    lam = prof.meta["lambda"]
    np.testing.assert_allclose(p.drho_dz[ahead], -lam * p.rho[ahead], rtol=lam ** 2 * grid.dx ** 2)


def test_locator_sensitivity_is_reported():
    from sgg import scenarios as sc
    _, report = sc.run_preset(sc.preset("gogrow"))
    speeds = [report.locator_speeds[k] for k in ("0.25", "0.5", "0.75")]
    assert report.locator_speeds["0.5"] == pytest.approx(report.c_fit)
    assert max(speeds) - min(speeds) < 0.05 * 2.5

import functools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from geophase.errors import ConfigError, OrthogonalEndpointsError
from geophase.evolution import TimeGrid, Trajectory
from geophase.hamiltonians import RotatingField, eigenframe_trajectory
from geophase.phase import (
    PhaseTracker,
    PhaseValue,
    berry_connection_integral,
    closed_form_adiabatic_phase,
    closed_form_exact_phase,
    delta_gamma_spin_estimate,
    drift_parameter,
    exact_phase_inputs,
    geometric_phase_adiabatic,
    geometric_phase_exact,
    phase_report,
    spin_drift_rate,
)

import oracles
from conftest import TWO_PI, spin_run

# Exact phase at tau = 2pi and 20pi (omega = 1) from oracles.exact_phase_unwrapped,
# a dense np.unwrap of the closed-form overlap argument used to pick the branch.
FROZEN_EXACT = {
    (1.0, math.pi / 6, TWO_PI): -0.010636415272965216,
    (1.0, math.pi / 6, 10 * TWO_PI): 0.06809542394668355,
    (1.0, math.pi / 2, TWO_PI): 0.46315161497449897,
    (1.0, math.pi / 2, 10 * TWO_PI): 2.95286090400314,
    (1.0, 5 * math.pi / 6, TWO_PI): -4.812734359039043,
    (1.0, 5 * math.pi / 6, 10 * TWO_PI): -19.238971562157563,
    (10.0, math.pi / 6, TWO_PI): 0.31735018194842013,
    (10.0, math.pi / 6, 10 * TWO_PI): 3.1824564674829503,
    (10.0, math.pi / 2, TWO_PI): 2.676138568576185,
    (10.0, math.pi / 2, 10 * TWO_PI): 26.738607895094162,
    (10.0, 5 * math.pi / 6, TWO_PI): -0.5558074608160979,
    (10.0, 5 * math.pi / 6, 10 * TWO_PI): -5.5767753775160145,
    (100.0, math.pi / 6, TWO_PI): 0.4092672823717294,
    (100.0, math.pi / 6, 10 * TWO_PI): 4.092792329778149,
    (100.0, math.pi / 2, TWO_PI): 3.094474653197608,
    (100.0, math.pi / 2, 10 * TWO_PI): 30.944746150266383,
    (100.0, 5 * math.pi / 6, TWO_PI): -0.43283206671014796,
    (100.0, 5 * math.pi / 6, 10 * TWO_PI): -4.32844944152157,
}

# exact - adiabatic at omega0 = 200, omega = 1, theta = pi/2 after n periods (same oracle)
FROZEN_DRIFT = {1: -0.023561208624766294, 2: -0.04712241732206479,
                10: -0.23561209822252138, 100: -2.356131563133829}


@functools.lru_cache(maxsize=None)
def cached_spin_run(w0, w, th, tau):
    return spin_run(w0, w, th, tau)


def mod2pi_distance(a, b):
    return abs(math.remainder(a - b, TWO_PI))


# --- PhaseValue --------------------------------------------------------------

@given(st.floats(-1e6, 1e6))
def test_phase_value_principal_consistent(u):
    v = PhaseValue.from_unwrapped(u)
    assert -math.pi < v.principal <= math.pi
    assert mod2pi_distance(v.principal, v.unwrapped) <= 1e-10 * max(1.0, abs(u) / 1e3)
    assert float(v) == u


def test_phase_value_pi_is_kept():
    assert PhaseValue.from_unwrapped(math.pi).principal == math.pi
    assert PhaseValue.from_unwrapped(-math.pi).principal == math.pi


# --- exact phase -------------------------------------------------------------

def test_static_field_exact_phase_zero():
    p, traj, _ = spin_run(2.0, 0.0, 1.0, 30.0)
    g = geometric_phase_exact(traj, p)
    assert abs(g.unwrapped) <= 1e-8
    assert abs(closed_form_exact_phase(p, 30.0).unwrapped) <= 1e-12


def test_exact_phase_matches_closed_form():
    p, traj, _ = cached_spin_run(100.0, 1.0, math.pi / 3, TWO_PI)
    assert abs(geometric_phase_exact(traj, p).unwrapped - closed_form_exact_phase(p, TWO_PI).unwrapped) <= 1e-6


def test_exact_phase_quadratic_gauge_example():
    p, traj, _ = cached_spin_run(100.0, 1.0, math.pi / 3, TWO_PI)
    base = geometric_phase_exact(traj, p)
    moved = traj.with_phase(lambda t: 0.3 * t + 0.1 * t * t)
    g = geometric_phase_exact(moved, connection="finite_difference")
    assert abs(g.unwrapped - base.unwrapped) <= 1e-6


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
def test_exact_phase_gauge_invariance(coef):
    p, traj, _ = cached_spin_run(10.0, 1.0, math.pi / 2, TWO_PI)
    base = geometric_phase_exact(traj, p).unwrapped
    moved = traj.with_phase(lambda t: np.polyval(coef, t))
    assert abs(geometric_phase_exact(moved, connection="finite_difference").unwrapped - base) <= 1e-6


def test_finite_difference_connection_agrees_with_schrodinger():
    p, traj, _ = cached_spin_run(10.0, 1.0, math.pi / 2, TWO_PI)
    a = geometric_phase_exact(traj, p)
    b = geometric_phase_exact(traj, connection="finite_difference")
    assert abs(a.unwrapped - b.unwrapped) <= 1e-7


@pytest.mark.parametrize("key", sorted(FROZEN_EXACT))
def test_closed_form_exact_matches_frozen_oracle(key):
    w0, th, tau = key
    assert abs(closed_form_exact_phase(RotatingField(w0, 1.0, th), tau).unwrapped - FROZEN_EXACT[key]) <= 1e-8


def test_closed_form_exact_static_is_zero():
    for tau in (0.1, 3.0, 1234.5):
        assert abs(closed_form_exact_phase(RotatingField(5.0, 0.0, 1.0), tau).unwrapped) <= 1e-9


def test_closed_form_exact_branch_matches_terms_mod_2pi():
    w0, w, th, tau = 37.0, 1.3, 0.9, 17.0
    arg, rest = oracles.exact_phase_terms(w0, w, th, tau)
    assert mod2pi_distance(closed_form_exact_phase(RotatingField(w0, w, th), tau).unwrapped, float(arg + rest)) < 1e-10


def test_orthogonal_endpoints_exact():
    grid = TimeGrid(0.0, math.pi / 2, 100)
    t = grid.output_times
    traj = Trajectory.from_states(grid, np.stack([np.cos(t), np.sin(t)], axis=1).astype(complex))
    with pytest.raises(OrthogonalEndpointsError):
        geometric_phase_exact(traj, connection="finite_difference")


def test_connection_choice_validation():
    p, traj, _ = spin_run(2.0, 1.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        geometric_phase_exact(traj)
    with pytest.raises(ConfigError):
        geometric_phase_exact(traj, p, connection="magic")


def test_tracker_chaining_equals_single_pass():
    p, traj, _ = cached_spin_run(10.0, 1.0, math.pi / 2, TWO_PI)
    ts, psi = np.asarray(traj.times), np.asarray(traj.states)
    whole = geometric_phase_exact(traj, p).unwrapped
    tracker = PhaseTracker()
    mid = len(ts) // 2
    mid += mid % 2
    for sl in (slice(0, mid + 1), slice(mid, None)):
        z, zd, f = exact_phase_inputs(p, ts[sl], psi[sl], psi[0])
        out = tracker.extend(ts[sl], z, zd, f)
    assert abs(out.unwrapped - whole) <= 1e-12


# --- adiabatic phase ---------------------------------------------------------

def spin_frames(th, tau, w0=10.0, n=2000):
    p = RotatingField(w0, 1.0, th)
    return eigenframe_trajectory(p, np.linspace(0, tau, n + 1))


@pytest.mark.parametrize("th,expected", [(math.pi / 2, math.pi), (0.0, 0.0), (math.pi / 3, math.pi / 2)])
def test_cyclic_adiabatic_phase(th, expected):
    g = geometric_phase_adiabatic(spin_frames(th, TWO_PI), 0)
    assert mod2pi_distance(g.principal, expected) <= 1e-8


def test_adiabatic_phase_theta_zero_any_tau():
    for tau in (0.3, 5.0, 17.0):
        assert abs(geometric_phase_adiabatic(spin_frames(0.0, tau), 0).unwrapped) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.5, 20.0))
def test_adiabatic_phase_matches_closed_form(th, tau):
    assume(abs(complex(math.cos(tau / 2), math.cos(th) * math.sin(tau / 2))) > 1e-3)
    g = geometric_phase_adiabatic(spin_frames(th, tau), 0)
    ref = closed_form_adiabatic_phase(RotatingField(10.0, 1.0, th), tau)
    assert abs(g.unwrapped - ref.unwrapped) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
def test_adiabatic_phase_gauge_invariance(coef):
    frames = spin_frames(math.pi / 3, 5.0)
    base = geometric_phase_adiabatic(frames, 0).unwrapped
    moved = frames.regauged(np.polyval(coef, frames.times))
    assert abs(geometric_phase_adiabatic(moved, 0).unwrapped - base) <= 1e-6


def test_adiabatic_phase_numeric_frames():
    p = RotatingField(10.0, 1.0, math.pi / 3)
    ts = np.linspace(0, TWO_PI, 4001)
    from geophase.quantum_core import continued_eigenframes
    numeric = continued_eigenframes(ts, p.evaluate_many(ts))
    # ascending order puts E1 = +omega0/2 last
    g = geometric_phase_adiabatic(numeric, 1)
    assert mod2pi_distance(g.principal, math.pi / 2) <= 1e-8


def test_orthogonal_endpoints_adiabatic():
    with pytest.raises(OrthogonalEndpointsError):
        geometric_phase_adiabatic(spin_frames(math.pi / 2, math.pi), 0)
    with pytest.raises(ConfigError):
        geometric_phase_adiabatic(spin_frames(1.0, 1.0), 2)


# --- bare connection integral ------------------------------------------------

def test_berry_integral_examples():
    b = berry_connection_integral(spin_frames(math.pi / 2, TWO_PI), 0)
    assert abs(b.value) <= 1e-12 and not b.valid_alone
    b = berry_connection_integral(spin_frames(0.0, TWO_PI), 0)
    assert b.value == pytest.approx(-math.pi, abs=1e-12) and not b.valid_alone
    b = berry_connection_integral(spin_frames(0.0, 2 * TWO_PI), 0)
    assert b.value == pytest.approx(-TWO_PI, abs=1e-12) and b.valid_alone
    b = berry_connection_integral(spin_frames(1.0, 3.0, w0=10.0).regauged(np.zeros(2001)), 0)
    assert b.value == pytest.approx(-1.5 * math.cos(1.0), abs=1e-9)


def test_berry_integral_static():
    b = berry_connection_integral(eigenframe_trajectory(RotatingField(3.0, 0.0, 1.0), np.linspace(0, 4, 101)), 0)
    assert b.value == 0.0 and b.valid_alone


# --- closed forms ------------------------------------------------------------

def test_closed_form_adiabatic_examples():
    g = closed_form_adiabatic_phase(RotatingField(10.0, 1.0, math.pi / 3), TWO_PI)
    assert mod2pi_distance(g.principal, math.pi / 2) <= 1e-12
    g = closed_form_adiabatic_phase(RotatingField(10.0, 1.0, math.pi / 2), math.pi)
    assert g.unwrapped == pytest.approx(math.pi / 2, abs=1e-15)
    for tau in (0.1, 3.0, 6.2):
        assert closed_form_adiabatic_phase(RotatingField(10.0, 1.0, 0.0), tau).unwrapped == 0.0


@given(st.floats(0.0, math.pi), st.floats(0.0, 200.0))
def test_closed_form_adiabatic_matches_unwrap_oracle(th, tau):
    if abs(math.cos(th)) < 1e-6:
        th = math.pi / 2 + 1e-3  # skip the measure-zero zero crossings of the argument
    ref = oracles.adiabatic_phase_unwrapped(1.0, th, tau, n=40001)
    assert abs(closed_form_adiabatic_phase(RotatingField(10.0, 1.0, th), tau).unwrapped - ref) <= 1e-8


def test_drift_parameter_examples():
    p = RotatingField(200.0, 1.0, math.pi / 2)
    assert drift_parameter(p) == pytest.approx(0.0025, rel=1e-15)
    assert delta_gamma_spin_estimate(p, 200 * math.pi) == pytest.approx(-math.pi / 2, rel=1e-14)
    assert delta_gamma_spin_estimate(RotatingField(200.0, 1.0, 0.0), 123.0) == 0.0
    q = RotatingField(1000.0, 1.0, math.pi / 3)
    est = delta_gamma_spin_estimate(q, TWO_PI)
    assert est == pytest.approx(-2.354e-3, rel=1e-3)
    # the linear term of the dynamical integral, -(w0 w^2 sin^2 / 2 w_bar^2) tau
    linear = -1000 * 0.75 / (2 * q.omega_bar ** 2) * TWO_PI
    assert est == pytest.approx(linear, rel=0.01)


@pytest.mark.xfail(strict=True, reason="the measured difference includes a second-order winding of the "
                                       "overlap argument and is about 1.5x the -tau*s estimate")
def test_closed_form_difference_example_adiabatic_regime():
    q = RotatingField(1000.0, 1.0, math.pi / 3)
    d = closed_form_exact_phase(q, TWO_PI).unwrapped - closed_form_adiabatic_phase(q, TWO_PI).unwrapped
    assert d == pytest.approx(-2.36e-3, rel=0.01)


def test_closed_form_difference_matches_drift_rate():
    q = RotatingField(1000.0, 1.0, math.pi / 3)
    d = closed_form_exact_phase(q, TWO_PI).unwrapped - closed_form_adiabatic_phase(q, TWO_PI).unwrapped
    # sin(w_bar tau) term is ~1e-7 here
    assert d == pytest.approx(spin_drift_rate(q) * TWO_PI, abs=2e-6)


@pytest.mark.parametrize("n", sorted(FROZEN_DRIFT))
def test_drift_matches_frozen_oracle(n):
    p = RotatingField(200.0, 1.0, math.pi / 2)
    tau = n * TWO_PI
    d = closed_form_exact_phase(p, tau).unwrapped - closed_form_adiabatic_phase(p, tau).unwrapped
    assert d == pytest.approx(FROZEN_DRIFT[n], abs=1e-8)


def _drift_fit():
    p = RotatingField(200.0, 1.0, math.pi / 2)
    taus = TWO_PI * np.arange(1, 101)
    d = np.array([closed_form_exact_phase(p, t).unwrapped - closed_form_adiabatic_phase(p, t).unwrapped
                  for t in taus])
    slope, icpt = np.polyfit(taus, d, 1)
    resid = np.max(np.abs(d - (slope * taus + icpt)))
    bound = p.omega0 * p.omega ** 2 / (2 * p.omega_bar ** 3) + 1e-6
    return p, slope, resid, bound


@pytest.mark.xfail(strict=True, reason="closed forms drift at ~1.5 s, not s; see spin_drift_rate")
def test_linear_drift_slope_is_minus_s():
    p, slope, resid, bound = _drift_fit()
    assert abs(slope / -drift_parameter(p) - 1) <= 0.01 and resid <= bound


def test_linear_drift_slope_and_residual():
    p, slope, resid, bound = _drift_fit()
    assert slope == pytest.approx(spin_drift_rate(p), rel=1e-3)
    assert resid <= bound


def _short_time_difference(w0):
    tau = 0.01 * TWO_PI
    p, traj, frames = spin_run(w0, 1.0, math.pi / 3, tau)
    d = geometric_phase_exact(traj, p).unwrapped - geometric_phase_adiabatic(frames, 0).unwrapped
    return p, tau, d


@pytest.mark.xfail(strict=True, reason="at w0 = 1000 even -tau*s is 2.4e-5 at tau = 0.01 period")
def test_short_time_consistency_w0_1000():
    assert abs(_short_time_difference(1000.0)[2]) <= 1e-5


def test_short_time_consistency_w0_10000():
    assert abs(_short_time_difference(1e4)[2]) <= 1e-5


def test_short_time_difference_matches_closed_forms():
    p, tau, d = _short_time_difference(1000.0)
    ref = closed_form_exact_phase(p, tau).unwrapped - closed_form_adiabatic_phase(p, tau).unwrapped
    assert d == pytest.approx(ref, abs=1e-8)


def test_phase_report_bookkeeping():
    p, traj, frames = cached_spin_run(10.0, 1.0, math.pi / 2, TWO_PI)
    r = phase_report(traj, p, frames, 0)
    from geophase.phase import _spin_dynamical, _spin_overlap
    assert r.dynamical == pytest.approx(-_spin_dynamical(p, TWO_PI), abs=1e-8)
    assert r.overlap_magnitude == pytest.approx(abs(_spin_overlap(p, TWO_PI)), abs=1e-9)
    assert mod2pi_distance(r.total.principal, float(np.angle(_spin_overlap(p, TWO_PI)))) <= 1e-8
    assert r.geometric_adiabatic.principal == pytest.approx(math.pi, abs=1e-8)

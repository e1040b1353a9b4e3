"""Geometric phases of trajectories and eigenframes, plus spin-1/2 closed forms.

Every phase is returned as a :class:`PhaseValue` carrying both the principal
value in (-pi, pi] and a branch-tracked ("unwrapped") value. The unwrapped
value follows

    g(t) = arg z(t) + int_0^t f dt'

continuously along the time grid, where ``z`` is the overlap with the
initial vector and ``f`` the connection integrand. ``g`` varies slowly even
when ``arg z`` spins rapidly, so grid steps rarely need refinement; steps that
do (near-zeros of ``z``) are bisected on a cubic Hermite interpolant of ``z``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._numerics import (
    TWO_PI,
    connection_fd,
    fd_derivative,
    running_trapezoid,
    simpson_uniform,
    tracked_increment,
    unwrap_tracked,
    wrap_phase,
)
from .errors import ConfigError, OrthogonalEndpointsError
from .evolution import spin_amplitudes

ORTHOGONALITY_THRESHOLD = 1e-6
BERRY_VALID_TOL = 1e-8
_JUMP = math.pi / 3
CONNECTIONS = ("schrodinger", "finite_difference")


@dataclass(frozen=True)
class PhaseValue:
    """A phase in radians: principal value in (-pi, pi] and branch-tracked value."""

    principal: float
    unwrapped: float

    @classmethod
    def from_unwrapped(cls, unwrapped):
        u = float(unwrapped)
        return cls(wrap_phase(u), u)

    def __float__(self):
        return self.unwrapped


@dataclass(frozen=True)
class PhaseReport:
    """Phase bookkeeping of one trajectory.

    ``total`` is arg<psi(0)|psi(tau)>; ``dynamical`` is -int <H> dt, so that
    ``geometric_exact = total - dynamical``.
    """

    total: PhaseValue
    dynamical: float
    geometric_exact: PhaseValue
    geometric_adiabatic: PhaseValue
    overlap_magnitude: float


class BerryIntegral(NamedTuple):
    value: float
    valid_alone: bool


def _hermite(za, zb, da, db, h, s):
    # cubic Hermite interpolant on [0, h] evaluated at s
    u = s / h
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return h00 * za + h10 * h * da + h01 * zb + h11 * h * db


def _track(times, z, zdot, cum, start=None):
    """Branch-tracked g_j = arg z_j + cum_j; ``start`` fixes the branch of g_0."""
    raw = np.angle(z) + cum
    d = np.remainder(np.diff(raw) + math.pi, TWO_PI) - math.pi
    for i in np.flatnonzero(np.abs(d) > _JUMP):
        ta, tb = times[i], times[i + 1]
        h = tb - ta
        za, zb, da, db = z[i], z[i + 1], zdot[i], zdot[i + 1]
        ca, cb = cum[i], cum[i + 1]

        def f(ts, ta=ta, h=h, za=za, zb=zb, da=da, db=db, ca=ca, cb=cb):
            s = np.asarray(ts) - ta
            return np.angle(_hermite(za, zb, da, db, h, s)) + ca + (cb - ca) * s / h

        d[i] = tracked_increment(f, ta, raw[i], tb, raw[i + 1], jump=_JUMP)
    g0 = raw[0]
    if start is not None:
        g0 += TWO_PI * round((start - g0) / TWO_PI)
    return g0 + np.concatenate(([0.0], np.cumsum(d)))


class PhaseTracker:
    """Accumulate arg z + int f over consecutive grid segments.

    Each call to :meth:`extend` takes a segment whose first sample repeats the
    last sample of the previous one. The integral is composite Simpson; the
    branch is tracked with a running trapezoid rule, which only has to be
    accurate to well within pi.
    """

    def __init__(self):
        self._integral = 0.0
        self._cum = 0.0
        self._g = None

    @property
    def integral(self):
        return self._integral

    def extend(self, times, z, zdot, integrand):
        times = np.asarray(times, dtype=float)
        z = np.asarray(z)
        integrand = np.asarray(integrand, dtype=float)
        h = times[1] - times[0]
        cum = self._cum + running_trapezoid(integrand, h)
        g = _track(times, z, np.asarray(zdot), cum, self._g)
        self._integral += float(simpson_uniform(integrand, h))
        self._cum = float(cum[-1])
        self._g = float(g[-1])
        base = float(np.angle(z[-1])) + self._integral
        return PhaseValue.from_unwrapped(base + TWO_PI * round((self._g - base) / TWO_PI))


def _check_overlap(z, what):
    mag = abs(z)
    if mag < ORTHOGONALITY_THRESHOLD:
        raise OrthogonalEndpointsError(
            f"|{what}| = {mag:.3e} is below {ORTHOGONALITY_THRESHOLD:g}; the geometric phase is undefined")
    return mag


def energy_expectation(model, times, states):
    """<H> along a trajectory, and the vectors H(t_j) psi_j.

    The expectation is divided by <psi|psi>: integrator norm drift of 1e-10
    would otherwise enter the phase multiplied by the energy scale and tau.
    """
    hs = np.asarray(model.evaluate_many(times))
    hpsi = np.einsum("jab,jb->ja", hs, states)
    e = np.einsum("ja,ja->j", states.conj(), hpsi).real / np.einsum("ja,ja->j", states.conj(), states).real
    return e, hpsi


def exact_phase_inputs(model, times, states, psi0, connection="schrodinger"):
    """Overlap, its derivative and connection integrand for :class:`PhaseTracker`."""
    if connection not in CONNECTIONS:
        raise ConfigError(f"unknown connection {connection!r}; expected one of {CONNECTIONS}")
    z = states @ np.conj(psi0)
    if connection == "schrodinger":
        if model is None:
            raise ConfigError("the Schrodinger connection needs the model")
        e, hpsi = energy_expectation(model, times, states)
        zdot = -1j * (hpsi @ np.conj(psi0))
        return z, zdot, e
    h = times[1] - times[0]
    return z, fd_derivative(z, h), -connection_fd(states, h).imag


def geometric_phase_exact(traj, model=None, connection="schrodinger"):
    """Geometric phase arg<psi(0)|psi(tau)> + i int <psi|dpsi/dt> dt of a trajectory.

    Parameters
    ----------
    traj : Trajectory
    model : Hamiltonian model, optional
        Required for ``connection="schrodinger"``, which uses
        i<psi|dpsi/dt> = <psi|H|psi>. Trajectories that are not solutions of
        the Schrodinger equation (e.g. after a time-dependent phase change)
        need ``connection="finite_difference"``.

    Raises
    ------
    OrthogonalEndpointsError
        When |<psi(0)|psi(tau)>| < 1e-6.
    """
    states = np.asarray(traj.states)
    times = np.asarray(traj.times)
    z, zdot, f = exact_phase_inputs(model, times, states, states[0], connection)
    _check_overlap(z[-1], "<psi(0)|psi(tau)>")
    return PhaseTracker().extend(times, z, zdot, f)


def adiabatic_phase_inputs(frames, k, ref=None):
    """Overlap with ``ref`` (default: the first frame), its derivative and i<E_k|dE_k/dt>."""
    _check_level(frames, k)
    v = np.asarray(frames.vectors[:, k])
    ref = v[0] if ref is None else np.asarray(ref)
    z = v @ np.conj(ref)
    h = frames.step
    if frames.derivatives is not None:
        dv = np.asarray(frames.derivatives[:, k])
        conn = np.einsum("ja,ja->j", v.conj(), dv)
        zdot = dv @ np.conj(ref)
    else:
        conn = connection_fd(v, h)
        zdot = fd_derivative(z, h)
    return z, zdot, -conn.imag


def _check_level(frames, k):
    if not 0 <= k < frames.dim:
        raise ConfigError(f"level index {k} out of range for dimension {frames.dim}")


def geometric_phase_adiabatic(frames, k):
    """Adiabatic-approximation phase arg<E_k(0)|E_k(tau)> + i int <E_k|dE_k/dt> dt.

    Uses the analytic derivatives stored on ``frames`` when present, else a
    gauge-covariant finite-difference connection.
    """
    z, zdot, f = adiabatic_phase_inputs(frames, k)
    _check_overlap(z[-1], "<E_k(0)|E_k(tau)>")
    return PhaseTracker().extend(frames.times, z, zdot, f)


def berry_connection_integral(frames, k):
    """The bare connection term i int <E_k|dE_k/dt> dt.

    It equals the geometric phase only when arg<E_k(0)|E_k(tau)> vanishes,
    which ``valid_alone`` reports (tolerance 1e-8).
    """
    z, _, f = adiabatic_phase_inputs(frames, k)
    value = float(simpson_uniform(f, frames.step))
    valid = abs(z[-1]) > 0 and abs(float(np.angle(z[-1]))) <= BERRY_VALID_TOL
    return BerryIntegral(value, bool(valid))


def phase_report(traj, model, frames, k):
    """Exact and adiabatic phases of one run, with the total/dynamical split."""
    exact = geometric_phase_exact(traj, model)
    adiabatic = geometric_phase_adiabatic(frames, k)
    states = np.asarray(traj.states)
    e, _ = energy_expectation(model, traj.times, states)
    dynamical = -float(simpson_uniform(e, traj.grid.step))
    mag = abs(np.vdot(states[0], states[-1]))
    return PhaseReport(PhaseValue.from_unwrapped(exact.unwrapped + dynamical), dynamical,
                       exact, adiabatic, float(mag))


# --- spin-1/2 rotating field: closed forms -----------------------------------

def _adiabatic_arg_unwrapped(x, c):
    # continuous branch of arg(cos x + i c sin x), zero at x = 0
    if abs(c) < 1e-12:
        # arg(cos x): +pi at each zero of cos x, the midpoint exactly at the zero
        u = abs(x) / math.pi + 0.5
        m = math.floor(u)
        val = (m - 0.5) * math.pi if u == m and m > 0 else m * math.pi
        return math.copysign(val, x)
    n = round(x / math.pi)
    y = x - n * math.pi
    return math.copysign(1.0, c) * n * math.pi + math.atan(c * math.tan(y))


def closed_form_adiabatic_phase(p, tau):
    """arg(cos(w tau/2) + i cos(theta) sin(w tau/2)) - (w tau/2) cos(theta).

    At the isolated zero of the argument (theta = pi/2, w tau an odd multiple
    of pi) the value is the midpoint of the branch jump.
    """
    x = 0.5 * p.omega * float(tau)
    c = math.cos(p.theta)
    return PhaseValue.from_unwrapped(_adiabatic_arg_unwrapped(x, c) - x * c)


def _spin_dynamical(p, t):
    # int_0^t <psi|H|psi> dt' for the exact solution
    wb = p.omega_bar
    q = p.omega0 * (p.omega * math.sin(p.theta)) ** 2
    return 0.5 * p.omega0 * t - q / (2 * wb * wb) * t + q / (2 * wb ** 3) * np.sin(wb * t)


def _spin_overlap(p, t):
    # <psi(0)|psi(t)> with psi(0) = |E1(0)>
    a, b = spin_amplitudes(p, t)
    x = 0.5 * p.omega * np.asarray(t, dtype=float)
    return (a * (np.cos(x) + 1j * math.cos(p.theta) * np.sin(x))
            - 1j * math.sin(p.theta) * b * np.sin(x))


def closed_form_exact_phase(p, tau):
    """Exact geometric phase of the rotating-field solution started in |E1(0)>.

    The unwrapped value tracks arg<psi(0)|psi(t)> + int <H> continuously from
    t = 0 to ``tau``.
    """
    tau = float(tau)
    if tau == 0.0:
        return PhaseValue(0.0, 0.0)
    z = complex(_spin_overlap(p, tau))
    _check_overlap(z, "<psi(0)|psi(tau)>")

    def g(ts):
        return np.angle(_spin_overlap(p, ts)) + _spin_dynamical(p, ts)

    scale = max(p.omega_bar, p.omega, 1e-300)
    n = int(min(max(64, math.ceil(16 * scale * abs(tau) / TWO_PI)), 50_000_000)) + 1
    unwrapped = unwrap_tracked(g, 0.0, tau, n, jump=_JUMP)
    base = math.atan2(z.imag, z.real) + float(_spin_dynamical(p, tau))
    return PhaseValue.from_unwrapped(base + TWO_PI * round((unwrapped - base) / TWO_PI))


def drift_parameter(p):
    """s = w^2 sin^2(theta) / (2 (w0 + 2 w cos(theta)))."""
    w0, w, th = p.omega0, p.omega, p.theta
    return (w * math.sin(th)) ** 2 / (2.0 * (w0 + 2.0 * w * math.cos(th)))


def delta_gamma_spin_estimate(p, tau):
    """Adiabatic-limit estimate -tau * s of gamma_exact - gamma_adiabatic."""
    return -float(tau) * drift_parameter(p)


def spin_drift_rate(p):
    """Mean rate of gamma_exact - gamma_adiabatic in the adiabatic regime.

    Keeps the second-order part of the winding of arg<psi(0)|psi(t)>, which
    contributes -(w_bar - w0 - w cos(theta))/2 on top of the linear term of
    the dynamical integral. For w << w0 this is about -(3/4) w^2 sin^2(theta)/w0,
    i.e. 1.5 times -s.
    """
    w0, w, th = p.omega0, p.omega, p.theta
    wb = p.omega_bar
    return -(0.5 * (wb - w0 - w * math.cos(th)) + w0 * (w * math.sin(th)) ** 2 / (2 * wb * wb))

"""Time evolution under i dpsi/dt = H(t) psi.

:func:`evolve` integrates any model with an adaptive Dormand-Prince 5(4)
pair and reads the state off the dense-output interpolant at every grid
point. :func:`closed_form_spin_state` is the exact rotating-field solution and
serves as an independent oracle for it.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, IntegrationAccuracyError, StiffnessError
from .hamiltonians import ModulatedDrive, RotatingField, SampledHamiltonian
from .quantum_core import _frozen, as_state

DEFAULT_TOL = 1e-10
TOL_RANGE = (1e-12, 1e-6)
POINTS_PER_PERIOD = 200
MAX_NORM_DRIFT = 1e-8
MAX_STEPS = 500_000_000


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid from ``t0`` to ``t1`` with an even number of intervals.

    ``t1 < t0`` describes backward evolution.
    """

    t0: float
    t1: float
    n_intervals: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)) or self.t0 == self.t1:
            raise ConfigError(f"invalid time span [{self.t0}, {self.t1}]")
        if self.n_intervals < 2 or self.n_intervals % 2:
            raise ConfigError(f"n_intervals must be even and >= 2, got {self.n_intervals}")

    @classmethod
    def for_scale(cls, t0, t1, scale, points_per_period=POINTS_PER_PERIOD, min_intervals=4):
        """Spacing at most (1/points_per_period) of the period 2*pi/scale."""
        span = abs(t1 - t0)
        n = max(min_intervals, math.ceil(span * scale * points_per_period / (2 * math.pi)))
        n += n % 2
        return cls(float(t0), float(t1), int(n))

    @classmethod
    def for_model(cls, model, t0, t1, points_per_period=POINTS_PER_PERIOD):
        return cls.for_scale(t0, t1, model.fastest_scale(t0), points_per_period)

    @property
    def output_times(self):
        ts = np.linspace(self.t0, self.t1, self.n_intervals + 1)
        ts.setflags(write=False)
        return ts

    @property
    def step(self):
        return (self.t1 - self.t0) / self.n_intervals

    def __len__(self):
        return self.n_intervals + 1


@dataclass(frozen=True)
class Trajectory:
    """States on a :class:`TimeGrid`, ``states[j]`` at ``grid.output_times[j]``."""

    grid: TimeGrid
    states: np.ndarray
    norm_drift: float
    accepted_steps: int = 0
    rejected_steps: int = 0

    @classmethod
    def from_states(cls, grid, states):
        states = _frozen(states)
        if states.shape[0] != len(grid):
            raise ValueError(f"{states.shape[0]} states for a grid of {len(grid)} points")
        drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
        return cls(grid, states, drift)

    @property
    def times(self):
        return self.grid.output_times

    def with_phase(self, chi):
        """Same rays, each state multiplied by exp(i chi(t))."""
        phases = np.exp(1j * np.asarray(chi(self.times), dtype=float))
        return Trajectory(self.grid, _frozen(self.states * phases[:, None]), self.norm_drift,
                          self.accepted_steps, self.rejected_steps)


def _kernel_for(model):
    """A stepper ``(p, c, y0, t_out, tol, h_init, max_steps)`` and its model data."""
    dummy = np.zeros((1, 1, 1, 1), dtype=np.complex128)
    if isinstance(model, RotatingField):
        p = np.array([model.omega0, model.omega, model.theta])
        return _kernels.dopri5_rotating_field, p, dummy
    if isinstance(model, SampledHamiltonian):
        return _kernels.dopri5_spline, np.array(model.times), np.ascontiguousarray(model.spline_coefficients)
    if isinstance(model, ModulatedDrive):
        c = np.stack([model.a, model.b])[:, None]
        return _kernels.dopri5_affine_sine, np.array([model.nu]), c
    fast = getattr(model, "unchecked", model.evaluate)

    def hfun(t, p, c, out):
        out[...] = fast(t)

    def runner(*args):
        return _kernels.dopri5_py(hfun, *args)

    return runner, np.zeros(1), dummy


def evolve(model, psi0, grid, tol=DEFAULT_TOL, check_grid=True):
    """Integrate from ``grid.t0`` to ``grid.t1`` starting at ``psi0``.

    ``psi0`` must have unit norm within 1e-8, loose enough to continue a run
    from the last state of a previous one. The local error estimate is held below ``tol`` per unit time. States are
    never renormalised; the largest norm deviation is reported as
    ``norm_drift`` and must stay below 1e-8.
    """
    if not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
        raise ConfigError(f"tol must lie in [{TOL_RANGE[0]}, {TOL_RANGE[1]}], got {tol}")
    psi0 = as_state(psi0, atol=MAX_NORM_DRIFT)
    if psi0.shape[0] != model.dim:
        raise ConfigError(f"state dimension {psi0.shape[0]} does not match model dimension {model.dim}")
    # both ends inside the model's domain and valid; the stepper stays in between
    model.evaluate(grid.t0)
    model.evaluate(grid.t1)
    scale = model.fastest_scale(grid.t0)
    if check_grid and scale > 0:
        limit = 2 * math.pi / (POINTS_PER_PERIOD * scale)
        if abs(grid.step) > limit * (1 + 1e-12):
            raise ConfigError(f"grid spacing {abs(grid.step):.3e} exceeds {limit:.3e} "
                              f"(1/{POINTS_PER_PERIOD} of the fastest period)")
    runner, p, c = _kernel_for(model)
    ts = np.ascontiguousarray(grid.output_times, dtype=float)
    h0 = 0.05 / scale if scale > 0 else abs(grid.t1 - grid.t0)
    states, acc, rej, status = runner(p, c, np.array(psi0), ts, float(tol), float(h0), MAX_STEPS)
    if status == _kernels.STATUS_UNDERFLOW:
        raise StiffnessError("step size underflow; the problem is too stiff for an explicit integrator")
    if status == _kernels.STATUS_MAX_STEPS:
        raise StiffnessError(f"step budget of {MAX_STEPS} exhausted")
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
    if drift > MAX_NORM_DRIFT:
        raise IntegrationAccuracyError(f"norm drift {drift:.3e} exceeds {MAX_NORM_DRIFT:g}; tighten tol")
    return Trajectory(grid, _frozen(states), drift, int(acc), int(rej))


def spin_amplitudes(p, t):
    """Expansion coefficients a(t), b(t) of the exact state in the closed-form eigenbasis."""
    t = np.asarray(t, dtype=float)
    wb = p.omega_bar
    half = 0.5 * wb * t
    a = np.cos(half) - 1j * (p.omega0 + p.omega * math.cos(p.theta)) / wb * np.sin(half)
    b = 1j * (p.omega * math.sin(p.theta) / wb) * np.sin(half)
    return a, b


def closed_form_spin_state(p, t):
    """Exact state a(t)|E1(t)> + b(t)|E2(t)> starting from |E1(0)>; vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    a, b = (np.asarray(x) for x in spin_amplitudes(p, t))
    vecs, _ = p.frame_vectors(t)
    psi = a[..., None] * vecs[..., 0, :] + b[..., None] * vecs[..., 1, :]
    return _frozen(psi)

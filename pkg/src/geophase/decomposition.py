"""Exact split of the geometric phase into its adiabatic part and a correction.

With psi(t) = sum_m C_m(t) |E_m(t)> and the level-k amplitude written as
C_k = exp(i alpha) + eps_k (eps_m = C_m for m != k), the exact phase obeys

    gamma_exact = gamma_adiabatic + Delta_gamma

where Delta_gamma is a sum of five terms built from eps, alpha and the
frame connection A_mn = <E_m|dE_n/dt>. Nothing here is perturbative; the
identity holds for any trajectory that stays mostly in level k.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import connection_fd, fd_derivative, simpson_uniform, wrap_phase
from .errors import AdiabaticityLost, ConfigError, OrthogonalEndpointsError
from .evolution import TimeGrid
from .phase import ORTHOGONALITY_THRESHOLD, geometric_phase_adiabatic, geometric_phase_exact
from .quantum_core import _frozen, projector_deviation

MIN_LEVEL_WEIGHT = 0.5
START_TOL = 1e-8
RECONSTRUCTION_TOL_ANALYTIC = 1e-6
RECONSTRUCTION_TOL_FD = 1e-5
DERIVATIVES = ("finite_difference", "schrodinger")


@dataclass(frozen=True)
class ExpansionTrajectory:
    """Amplitudes of a trajectory in an eigenframe.

    ``coefficients[j, m]`` is C_m(t_j) = <E_m(t_j)|psi(t_j)>, ``alpha`` the
    unwrapped phase of C_k and ``epsilons`` the residuals
    C_m - delta_mk exp(i alpha).
    """

    grid: TimeGrid
    coefficients: np.ndarray
    k: int
    alpha: np.ndarray
    epsilons: np.ndarray

    @property
    def times(self):
        return self.grid.output_times

    def norm_residual(self):
        """max_t |sum_m |C_m|^2 - 1|."""
        return float(np.max(np.abs(np.sum(np.abs(self.coefficients) ** 2, axis=1) - 1.0)))

    def identity_residual(self):
        """max_t |sum |eps_m|^2 + eps_k e^{-i alpha} + c.c.|, which vanishes given unit norm."""
        eps = self.epsilons
        lhs = np.sum(np.abs(eps) ** 2, axis=1)
        rhs = -2.0 * np.real(eps[:, self.k] * np.exp(-1j * self.alpha))
        return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class DeltaGammaBreakdown:
    """The five contributions to gamma_exact - gamma_adiabatic.

    ``boundary_imag_residual`` is the size of the part of the boundary term
    that must vanish for it to be real.
    """

    term_arg: float
    term_boundary: float
    term_re_alpha: float
    term_im_connection: float
    term_im_quadratic: float
    boundary_imag_residual: float

    @property
    def total(self):
        return (self.term_arg + self.term_boundary + self.term_re_alpha
                + self.term_im_connection + self.term_im_quadratic)

    def as_dict(self):
        return {
            "term_arg": self.term_arg,
            "term_boundary": self.term_boundary,
            "term_re_alpha": self.term_re_alpha,
            "term_im_connection": self.term_im_connection,
            "term_im_quadratic": self.term_im_quadratic,
            "total": self.total,
            "boundary_imag_residual": self.boundary_imag_residual,
        }


@dataclass(frozen=True)
class ReconstructionReport:
    gamma_exact: float
    gamma_adiabatic: float
    delta_gamma: DeltaGammaBreakdown
    residual: float
    tolerance: float

    @property
    def passed(self):
        return self.residual <= self.tolerance


def _check_shared_grid(traj, frames):
    if len(traj.times) != len(frames.times) or not np.allclose(traj.times, frames.times, rtol=0,
                                                               atol=1e-12 * max(1.0, abs(traj.grid.t1))):
        raise ConfigError("trajectory and eigenframes must be sampled on the same grid")


def expand_state(traj, frames, k):
    """Expand ``traj`` in the eigenframes around level ``k``.

    States are divided by their norm first, which leaves the rays (and every
    phase) unchanged.

    Raises
    ------
    ConfigError
        If the grids differ, ``k`` is out of range, or psi(0) is not the ray
        of E_k(0) (within 1e-8).
    AdiabaticityLost
        If |C_k(t)| drops below 0.5 anywhere.
    """
    _check_shared_grid(traj, frames)
    if not 0 <= k < frames.dim:
        raise ConfigError(f"level index {k} out of range for dimension {frames.dim}")
    states = np.asarray(traj.states)
    vecs = np.asarray(frames.vectors)
    dev = float(projector_deviation(states[0], vecs[0, k]))
    if dev > START_TOL:
        raise ConfigError(f"initial state is not the level-{k} eigenstate (ray distance {dev:.3e})")
    # the split assumes sum |C_m|^2 = 1; integrator norm drift (reported on the
    # trajectory) would otherwise enter Delta_gamma scaled by energy * tau
    states = states / np.linalg.norm(states, axis=1)[:, None]
    c = np.einsum("jma,ja->jm", vecs.conj(), states)
    weight = np.abs(c[:, k])
    if np.min(weight) < MIN_LEVEL_WEIGHT:
        j = int(np.argmin(weight))
        raise AdiabaticityLost(
            f"|C_{k}| = {weight[j]:.3f} < {MIN_LEVEL_WEIGHT} at t={traj.times[j]:.6g}; "
            "the state has left the reference level")
    alpha = np.unwrap(np.angle(c[:, k]))
    eps = c.copy()
    eps[:, k] -= np.exp(1j * alpha)
    alpha.setflags(write=False)
    return ExpansionTrajectory(traj.grid, _frozen(c), k, alpha, _frozen(eps))


def frame_connection(frames):
    """A[j, m, n] = <E_m(t_j)|dE_n/dt(t_j)>.

    Analytic when ``frames`` carries derivatives; otherwise fourth-order
    differences, with the gauge-covariant log-overlap scheme on the diagonal.
    """
    vecs = np.asarray(frames.vectors)
    if frames.derivatives is not None:
        return np.einsum("jma,jna->jmn", vecs.conj(), np.asarray(frames.derivatives))
    h = frames.step
    a = np.einsum("jma,jna->jmn", vecs.conj(), fd_derivative(vecs, h))
    for m in range(frames.dim):
        a[:, m, m] = connection_fd(vecs[:, m], h)
    return a


def _amplitude_rates(expansion, frames, conn, derivative):
    # d/dt of C and alpha
    h = frames.step
    c = np.asarray(expansion.coefficients)
    k = expansion.k
    if derivative == "schrodinger":
        # i dpsi/dt = H psi gives dC_m/dt = -i E_m C_m - sum_n A_mn C_n
        cdot = -1j * np.asarray(frames.energies) * c - np.einsum("jmn,jn->jm", conn, c)
        alpha_dot = np.imag(cdot[:, k] / c[:, k])
    else:
        cdot = fd_derivative(c, h)
        alpha_dot = fd_derivative(np.asarray(expansion.alpha), h)
    return cdot, alpha_dot


def delta_gamma_general(expansion, frames, derivative="finite_difference"):
    """Evaluate the five terms of Delta_gamma = gamma_exact - gamma_adiabatic.

    Parameters
    ----------
    expansion : ExpansionTrajectory
    frames : EigenframeTrajectory
        The frames ``expansion`` was built from.
    derivative : {"finite_difference", "schrodinger"}
        How time derivatives of the amplitudes are obtained. Finite
        differences work for any trajectory; "schrodinger" uses the equation
        of motion and is exact when the trajectory solves it for the
        Hamiltonian that generated ``frames``.
    """
    if derivative not in DERIVATIVES:
        raise ConfigError(f"unknown derivative scheme {derivative!r}; expected one of {DERIVATIVES}")
    k = expansion.k
    h = frames.step
    vecs = np.asarray(frames.vectors)
    eps = np.asarray(expansion.epsilons)
    alpha = np.asarray(expansion.alpha)
    ref = np.vdot(vecs[0, k], vecs[-1, k])
    if abs(ref) < ORTHOGONALITY_THRESHOLD:
        raise OrthogonalEndpointsError(f"|<E_k(0)|E_k(tau)>| = {abs(ref):.3e}; the phase is undefined")

    conn = frame_connection(frames)
    cdot, alpha_dot = _amplitude_rates(expansion, frames, conn, derivative)
    eps_dot = cdot.copy()
    eps_dot[:, k] -= 1j * alpha_dot * np.exp(1j * alpha)
    rot = np.exp(-1j * alpha)

    ends = vecs[-1] @ vecs[0, k].conj()  # <E_k(0)|E_m(tau)>
    term_arg = float(np.angle(1.0 + np.dot(eps[-1], ends) / ref * rot[-1]))

    x = eps[-1, k] * rot[-1] + simpson_uniform(np.sum(eps.conj() * eps_dot, axis=1), h)
    term_boundary = -float(x.imag)

    radial = np.real(eps[:, k] * rot)
    term_re_alpha = -2.0 * float(simpson_uniform(radial * alpha_dot, h))

    coupling = np.einsum("jm,jm->j", conn[:, k, :], eps) * rot
    term_im_connection = -2.0 * float(simpson_uniform(coupling, h).imag)

    quad = np.einsum("jm,jmn,jn->j", eps.conj(), conn, eps)
    term_im_quadratic = -float(simpson_uniform(quad, h).imag)

    return DeltaGammaBreakdown(term_arg, term_boundary, term_re_alpha, term_im_connection,
                               term_im_quadratic, abs(float(x.real)))


def expanded_overlap_argument(expansion, frames, breakdown):
    """arg<psi(0)|psi(tau)> rebuilt from alpha, the frame overlap and ``term_arg``."""
    k = expansion.k
    vecs = np.asarray(frames.vectors)
    ref = np.vdot(vecs[0, k], vecs[-1, k])
    alpha = np.asarray(expansion.alpha)
    return wrap_phase(alpha[-1] - alpha[0] + math.atan2(ref.imag, ref.real) + breakdown.term_arg)


def verify_reconstruction(traj, frames, k, model=None, derivative=None):
    """Check gamma_exact = gamma_adiabatic + Delta_gamma on one trajectory.

    ``gamma_exact`` uses the Schrodinger connection when ``model`` is given
    and finite differences otherwise; ``gamma_adiabatic`` is computed from the
    frames alone. The residual is the distance mod 2pi, and the tolerance is
    1e-6 when the frames carry analytic derivatives, 1e-5 otherwise.
    """
    analytic = frames.derivatives is not None
    if derivative is None:
        derivative = "schrodinger" if analytic and model is not None else "finite_difference"
    expansion = expand_state(traj, frames, k)
    breakdown = delta_gamma_general(expansion, frames, derivative)
    if model is not None:
        exact = geometric_phase_exact(traj, model)
    else:
        exact = geometric_phase_exact(traj, connection="finite_difference")
    adiabatic = geometric_phase_adiabatic(frames, k)
    residual = abs(wrap_phase(exact.unwrapped - (adiabatic.unwrapped + breakdown.total)))
    tol = RECONSTRUCTION_TOL_ANALYTIC if analytic else RECONSTRUCTION_TOL_FD
    return ReconstructionReport(exact.unwrapped, adiabatic.unwrapped, breakdown, residual, tol)

"""Hamiltonian models.

Three kinds of model share one duck-typed surface (``dim``, ``evaluate``,
``evaluate_many``, ``fastest_scale``, ``domain``):

* :class:`RotatingField` -- spin-1/2 in a field of strength ``omega0`` tilted by
  ``theta`` from the z axis and rotating about it at ``omega``;
* :class:`SampledHamiltonian` -- matrices on a time grid, interpolated by
  componentwise cubic splines;
* :class:`AnalyticCallback` -- any user function ``t -> H(t)``.

Units: hbar = 1, energies in angular frequency.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainError, ModelError, NonHermitianError
from .quantum_core import (
    HERMITIAN_TOL,
    Eigenframe,
    EigenframeTrajectory,
    _frozen,
    as_hermitian,
    continued_eigenframes,
)

DEFAULT_ADIABATIC_THRESHOLD = 0.01


@dataclass(frozen=True)
class RotatingField:
    """H(t) = -(omega0/2) (sin(theta) cos(omega t) sx + sin(theta) sin(omega t) sy + cos(theta) sz)."""

    omega0: float
    omega: float
    theta: float

    dim = 2
    domain = None

    def __post_init__(self):
        for name in ("omega0", "omega", "theta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite, got {v!r}")
        if self.omega0 <= 0:
            raise ModelError(f"omega0 must be positive, got {self.omega0!r}")
        if self.omega < 0:
            raise ModelError(f"omega must be non-negative, got {self.omega!r}")
        if not 0.0 <= self.theta <= math.pi:
            raise ModelError(f"theta must lie in [0, pi], got {self.theta!r}")

    @property
    def omega_bar(self):
        """Dressed frequency sqrt(omega0^2 + omega^2 + 2 omega0 omega cos(theta))."""
        w0, w, th = self.omega0, self.omega, self.theta
        return math.sqrt(w0 * w0 + w * w + 2.0 * w0 * w * math.cos(th))

    def fastest_scale(self, t=0.0):
        return max(self.omega_bar, self.omega0, self.omega)

    def evaluate_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        k = -0.5 * self.omega0
        out = np.empty(ts.shape + (2, 2), dtype=np.complex128)
        out[..., 0, 0] = k * c
        out[..., 1, 1] = -k * c
        out[..., 0, 1] = k * s * np.exp(-1j * self.omega * ts)
        out[..., 1, 0] = k * s * np.exp(1j * self.omega * ts)
        return out

    def evaluate(self, t):
        return _frozen(self.evaluate_many(np.array(float(t))))

    def frame_vectors(self, ts):
        """Standard-gauge eigenvectors |E1(t)>, |E2(t)> and their time derivatives."""
        ts = np.asarray(ts, dtype=float)
        sh, ch = math.sin(self.theta / 2), math.cos(self.theta / 2)
        em = np.exp(-0.5j * self.omega * ts)
        ep = np.exp(0.5j * self.omega * ts)
        vecs = np.empty(ts.shape + (2, 2), dtype=np.complex128)
        vecs[..., 0, 0] = em * sh
        vecs[..., 0, 1] = -ep * ch
        vecs[..., 1, 0] = em * ch
        vecs[..., 1, 1] = ep * sh
        # d/dt acts as -i omega/2 on the first component, +i omega/2 on the second
        rate = np.array([-0.5j * self.omega, 0.5j * self.omega])
        return vecs, vecs * rate

    @property
    def frame_energies(self):
        return np.array([0.5 * self.omega0, -0.5 * self.omega0])


RotatingFieldParams = RotatingField


@dataclass(frozen=True)
class SampledHamiltonian:
    """Hermitian matrices on a strictly increasing time grid."""

    times: np.ndarray
    matrices: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            times = np.array(self.times, dtype=float)
            mats = np.array(self.matrices, dtype=np.complex128)
        except (TypeError, ValueError) as exc:
            raise ModelError(f"cannot build sampled Hamiltonian: {exc}") from None
        if times.ndim != 1 or times.shape[0] < 2:
            raise ModelError("a sampled Hamiltonian needs at least 2 sample times")
        if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
            raise ModelError("sample times must be finite and strictly increasing")
        if mats.ndim != 3 or mats.shape[0] != times.shape[0] or mats.shape[1] != mats.shape[2]:
            raise ModelError(f"matrices must have shape (n_times, N, N), got {mats.shape}")
        if mats.shape[1] < 2:
            raise ModelError("Hamiltonian dimension must be at least 2")
        for j, m in enumerate(mats):
            try:
                mats[j] = as_hermitian(m)
            except NonHermitianError as exc:
                raise NonHermitianError(f"sample {j} (t={times[j]!r}): {exc}") from None
            except ValueError as exc:
                raise ModelError(f"sample {j} (t={times[j]!r}): {exc}") from None
        times.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "_spline", CubicSpline(times, mats, axis=0))

    @property
    def dim(self):
        return self.matrices.shape[1]

    @property
    def domain(self):
        return float(self.times[0]), float(self.times[-1])

    def fastest_scale(self, t=None):
        e = np.linalg.eigvalsh(self.matrices[0])
        return max(float(e[-1] - e[0]), float(np.max(np.abs(e))))

    def evaluate_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        lo, hi = self.domain
        if np.any(ts < lo) or np.any(ts > hi):
            raise DomainError(f"time outside sampled domain [{lo}, {hi}]")
        h = self._spline(ts)
        h = 0.5 * (h + np.swapaxes(h, -1, -2).conj())
        # reproduce stored samples exactly at the knots
        idx = np.searchsorted(self.times, ts)
        idx = np.clip(idx, 0, len(self.times) - 1)
        hit = self.times[idx] == ts
        if np.any(hit):
            h[hit] = self.matrices[idx[hit]]
        return h

    def evaluate(self, t):
        return _frozen(self.evaluate_many(np.array(float(t))))

    @property
    def spline_coefficients(self):
        """Piecewise-cubic coefficients, shape (4, n_segments, N, N), highest power first."""
        return np.ascontiguousarray(self._spline.c)

    def to_json(self, path):
        n = self.dim
        data = {
            "dim": n,
            "times": [float(t) for t in self.times],
            "matrices": [[[float(z.real), float(z.imag)] for z in m.reshape(-1)] for m in self.matrices],
        }
        Path(path).write_text(json.dumps(data, separators=(",", ":")) + "\n")

    @classmethod
    def from_json(cls, path):
        return load_sampled_json(path)


def load_sampled_json(path):
    """Read ``{"dim": N, "times": [...], "matrices": [[[re, im], ...], ...]}``.

    Each matrix is a row-major list of N*N ``[re, im]`` pairs (a nested list
    of N rows is accepted too). Any sample that is not Hermitian within 1e-10
    is rejected with its index in the message.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot open model file {path}: {exc}") from None
    try:
        data = json.loads(text)
        n = int(data["dim"])
        times = np.asarray(data["times"], dtype=float)
        raw = data["matrices"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ModelError(f"cannot read sampled Hamiltonian from {path}: {exc}") from None
    if len(raw) != len(times):
        raise ModelError(f"{len(raw)} matrices but {len(times)} sample times")
    mats = np.empty((len(raw), n, n), dtype=np.complex128)
    for j, m in enumerate(raw):
        try:
            arr = np.asarray(m, dtype=float).reshape(n, n, 2)
        except ValueError:
            raise ModelError(f"sample {j}: expected {n * n} [re, im] entries") from None
        mats[j] = arr[..., 0] + 1j * arr[..., 1]
        asym = np.max(np.abs(mats[j] - mats[j].conj().T))
        if not asym <= HERMITIAN_TOL:
            raise NonHermitianError(
                f"sample {j} (t={times[j]!r}) is not Hermitian: max |H - H^dagger| = {asym:.3e}")
    return SampledHamiltonian(times, mats)


@dataclass(frozen=True)
class AnalyticCallback:
    """Wrap a function ``t -> H(t)``.

    ``scale`` overrides the fastest frequency used for grid density; by default
    it is read off the spectrum at ``t = 0`` (or the start of ``domain``).
    """

    func: Callable[[float], np.ndarray]
    dim: int
    domain: Optional[tuple] = None
    scale: Optional[float] = None

    def evaluate(self, t):
        t = float(t)
        if self.domain is not None and not self.domain[0] <= t <= self.domain[1]:
            raise DomainError(f"t={t} outside model domain {self.domain}")
        h = as_hermitian(self.func(t))
        if h.shape != (self.dim, self.dim):
            raise ModelError(f"callback returned shape {h.shape}, expected {(self.dim, self.dim)}")
        return h

    def unchecked(self, t):
        """H(t) straight from the callback, for the integrator's inner loop.

        :func:`evaluate` validates; the integrator validates the output grid
        separately, so it can skip the per-stage checks.
        """
        return self.func(t)

    def evaluate_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        return np.stack([self.evaluate(t) for t in ts.reshape(-1)]).reshape(ts.shape + (self.dim, self.dim))

    def fastest_scale(self, t=None):
        if self.scale is not None:
            return float(self.scale)
        if t is None:
            t = 0.0 if self.domain is None else self.domain[0]
        e = np.linalg.eigvalsh(self.evaluate(t))
        return max(float(e[-1] - e[0]), float(np.max(np.abs(e))))


def evaluate(model, t):
    """H(t) as a read-only Hermitian matrix."""
    return model.evaluate(t)


def rotating_field_eigenframe(p, t):
    """Eigenframe of the rotating-field model in its closed-form gauge.

    Order is (E1 = +omega0/2, E2 = -omega0/2), not ascending, and the vectors
    are not re-gauged: every spin-model closed form refers to this gauge.
    """
    vecs, _ = p.frame_vectors(np.array(float(t)))
    en = p.frame_energies
    en.setflags(write=False)
    return Eigenframe(float(t), en, _frozen(vecs))


def eigenframe_trajectory(model, times):
    """Eigenframes on ``times`` (uniform grid).

    The rotating-field model returns its closed-form frames together with their
    exact time derivatives; other models are diagonalised numerically and
    gauge-continued.
    """
    times = np.asarray(times, dtype=float)
    if isinstance(model, RotatingField):
        vecs, dvecs = model.frame_vectors(times)
        energies = np.broadcast_to(model.frame_energies, (len(times), 2))
        return EigenframeTrajectory(times, energies, _frozen(vecs), _frozen(dvecs))
    return continued_eigenframes(times, model.evaluate_many(times))


def adiabatic_constraint_ratios(model, k, times, frames=None):
    """max over m != k of |<E_m|dE_k/dt> / (E_m - E_k)| at every grid time.

    The derivative is taken by second-order central differences on the
    gauge-continued frames (one-sided second order at the ends), even when the
    model knows the exact derivative.
    """
    times = np.asarray(times, dtype=float)
    if frames is None:
        frames = eigenframe_trajectory(model, times)
    n = frames.dim
    if not 0 <= k < n:
        raise ValueError(f"level index {k} out of range for dimension {n}")
    dk = np.gradient(frames.vectors[:, k, :], times, axis=0, edge_order=2)
    coupling = np.abs(np.einsum("jmi,ji->jm", frames.vectors.conj(), dk))
    gaps = np.abs(frames.energies - frames.energies[:, k:k + 1])
    others = [m for m in range(n) if m != k]
    return np.max(coupling[:, others] / gaps[:, others], axis=1)


def is_adiabatic(ratios, threshold=DEFAULT_ADIABATIC_THRESHOLD):
    return bool(np.max(ratios) <= threshold)


def random_hermitian(dim, rng, traceless=False):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (g + g.conj().T)
    if traceless:
        h -= np.trace(h).real / dim * np.eye(dim)
    return h


@dataclass(frozen=True)
class ModulatedDrive:
    """H(t) = A + B sin(nu t) with Hermitian A, B.

    Usable directly as a model (integrated by compiled code), as a plain
    callable for :class:`AnalyticCallback`, or resampled into a
    :class:`SampledHamiltonian`.
    """

    a: np.ndarray
    b: np.ndarray
    nu: float

    domain = None

    def __post_init__(self):
        object.__setattr__(self, "a", as_hermitian(self.a))
        object.__setattr__(self, "b", as_hermitian(self.b))
        if self.a.shape != self.b.shape:
            raise ModelError(f"A and B differ in shape: {self.a.shape} vs {self.b.shape}")
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ModelError(f"nu must be positive, got {self.nu!r}")

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def period(self):
        return 2.0 * math.pi / self.nu

    def __call__(self, t):
        return self.a + self.b * math.sin(self.nu * t)

    def evaluate(self, t):
        return _frozen(self(float(t)))

    def evaluate_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        return self.a + np.sin(self.nu * ts)[..., None, None] * self.b

    def fastest_scale(self, t=0.0):
        e = np.linalg.eigvalsh(self.evaluate(0.0 if t is None else t))
        return max(float(e[-1] - e[0]), float(np.max(np.abs(e))))

    def model(self):
        return AnalyticCallback(self, self.dim)

    def sampled(self, n_samples, periods=1.0):
        ts = np.linspace(0.0, periods * self.period, n_samples)
        return SampledHamiltonian(ts, np.stack([self(t) for t in ts]))


def random_modulated_drive(dim, seed, drive_ratio=0.1, nu_over_gap=0.01):
    """Fixed-seed Gaussian Hermitian A (traceless) and B with ||B|| = drive_ratio * ||A||.

    The modulation frequency is ``nu_over_gap`` times the smallest level gap of A.
    """
    rng = np.random.default_rng(seed)
    a = random_hermitian(dim, rng, traceless=True)
    b = random_hermitian(dim, rng)
    b *= drive_ratio * np.linalg.norm(a, 2) / np.linalg.norm(b, 2)
    gap = float(np.min(np.diff(np.linalg.eigvalsh(a))))
    return ModulatedDrive(a, b, nu_over_gap * gap)

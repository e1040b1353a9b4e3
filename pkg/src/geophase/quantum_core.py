"""States, Hermitian operators and instantaneous eigenframes.

States are plain complex numpy vectors and operators plain complex matrices;
the helpers here validate them and return read-only copies. Eigenvectors are
stored as *rows*: ``frame.vectors[m]`` is the m-th eigenvector.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContinuationBreakdown, DegenerateSpectrum, NonHermitianError

NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-10
DEGENERACY_RTOL = 1e-8
TIE_TOL = 1e-12
CONTINUATION_MIN_OVERLAP = 0.1

GAUGE_POLICIES = ("largest", "none")


def _frozen(a):
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def as_state(vec, atol=NORM_TOL):
    """Validate a pure state: finite, dimension >= 2, unit norm within ``atol``."""
    v = np.asarray(vec, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ValueError(f"state must be a vector of dimension >= 2, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("state contains non-finite amplitudes")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state norm {norm!r} deviates from 1 by more than {atol}")
    return _frozen(v)


def normalized(vec):
    v = np.asarray(vec, dtype=np.complex128)
    return _frozen(v / np.linalg.norm(v))


def as_hermitian(matrix, atol=HERMITIAN_TOL):
    """Return (H + H^dagger)/2, or raise if H is further than ``atol`` from Hermitian."""
    h = np.asarray(matrix, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"operator must be square, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("operator contains non-finite entries")
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > atol:
        raise NonHermitianError(f"operator is not Hermitian (max |H - H^dagger| = {asym:.3e})")
    return _frozen(0.5 * (h + h.conj().T))


def inner_product(a, b):
    """<a|b>, conjugate-linear in the first argument."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def projector_deviation(psi, phi):
    """Frobenius norm of |psi><psi| - |phi><phi|.

    Depends only on the rays, so global phases on either argument drop out.
    Vectorised over leading axes.
    """
    psi = np.asarray(psi)
    phi = np.asarray(phi)
    if psi.shape != phi.shape:
        raise ValueError(f"dimension mismatch: {psi.shape} vs {phi.shape}")
    pp = np.sum(np.abs(psi) ** 2, axis=-1)
    ff = np.sum(np.abs(phi) ** 2, axis=-1)
    ov = np.sum(psi.conj() * phi, axis=-1)
    # ||P - Q||_F^2 = (pp - ff)^2 + 2 pp |phi_perp|^2, avoiding the
    # cancellation in tr P^2 + tr Q^2 - 2 tr PQ for nearby rays
    with np.errstate(invalid="ignore", divide="ignore"):
        perp = phi - (ov / pp)[..., None] * psi
    perp2 = np.where(pp > 0, np.sum(np.abs(perp) ** 2, axis=-1), 0.0)
    return np.sqrt((pp - ff) ** 2 + 2.0 * pp * perp2)


@dataclass(frozen=True)
class Eigenframe:
    """Energies and eigenvectors (rows) of H at one time."""

    time: float
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.energies.shape[0]

    def residual(self, h):
        """max_m ||H v_m - E_m v_m||."""
        r = self.vectors @ np.asarray(h).T - self.energies[:, None] * self.vectors
        return float(np.max(np.linalg.norm(r, axis=1)))


@dataclass(frozen=True)
class EigenframeTrajectory:
    """Eigenframes sampled on a uniform time grid.

    ``vectors`` has shape (n_times, N, N) with ``vectors[j, m]`` the m-th
    eigenvector at ``times[j]``. ``derivatives``, when present, holds the exact
    time derivatives of those vectors in the same layout.
    """

    times: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    derivatives: Optional[np.ndarray] = None

    @property
    def dim(self):
        return self.energies.shape[1]

    @property
    def step(self):
        return float(self.times[1] - self.times[0])

    def frame(self, j):
        return Eigenframe(float(self.times[j]), self.energies[j], self.vectors[j])

    def regauged(self, phases):
        """Multiply vector m at time j by exp(i*phases[j, m]); derivatives are dropped."""
        phases = np.asarray(phases, dtype=float)
        if phases.ndim == 1:
            phases = np.repeat(phases[:, None], self.dim, axis=1)
        return EigenframeTrajectory(self.times, self.energies,
                                    _frozen(self.vectors * np.exp(1j * phases)[:, :, None]))


def gauge_fix(vectors):
    """Rotate each row so its largest-magnitude component is real positive.

    Ties within 1e-12 go to the lowest index. Works on (..., N, N) stacks.
    """
    v = np.array(vectors, dtype=np.complex128)
    mag = np.abs(v)
    top = mag.max(axis=-1, keepdims=True)
    pivot = np.argmax(mag >= top - TIE_TOL, axis=-1)
    ref = np.take_along_axis(v, pivot[..., None], axis=-1)
    return v * (ref.conj() / np.abs(ref))


def _check_gaps(energies):
    e = np.asarray(energies)
    spread = e[..., -1] - e[..., 0]
    gaps = np.diff(e, axis=-1).min(axis=-1)
    bad = gaps <= DEGENERACY_RTOL * spread
    bad |= spread <= 0.0
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        g = float(np.atleast_1d(gaps)[idx])
        raise DegenerateSpectrum(f"eigenvalue gap {g:.3e} below degeneracy tolerance (sample {idx})")


def eigensystem(h, gauge="largest", time=0.0):
    """Ascending eigenvalues and gauge-fixed orthonormal eigenvectors of ``h``."""
    if gauge not in GAUGE_POLICIES:
        raise ValueError(f"unknown gauge policy {gauge!r}; expected one of {GAUGE_POLICIES}")
    h = as_hermitian(h)
    energies, cols = np.linalg.eigh(h)
    _check_gaps(energies)
    vectors = cols.T
    if gauge == "largest":
        vectors = gauge_fix(vectors)
    en = energies.copy()
    en.setflags(write=False)
    return Eigenframe(float(time), en, _frozen(vectors))


def gauge_continue(prev, cur):
    """Re-phase ``cur`` so that every <prev_m|cur_m> is real and positive.

    Levels are paired by energy order.
    """
    if prev.dim != cur.dim:
        raise ValueError("frames have different dimensions")
    ov = np.einsum("mi,mi->m", prev.vectors.conj(), cur.vectors)
    mag = np.abs(ov)
    if np.any(mag < CONTINUATION_MIN_OVERLAP):
        m = int(np.argmin(mag))
        raise ContinuationBreakdown(
            f"overlap {mag[m]:.3e} of level {m} between t={prev.time} and t={cur.time}; "
            "refine the time grid")
    return Eigenframe(cur.time, cur.energies, _frozen(cur.vectors * (ov.conj() / mag)[:, None]))


def continued_eigenframes(times, matrices):
    """Eigenframes of a stack of Hermitian matrices, gauge-continued along axis 0.

    The first frame uses the largest-component gauge; every later frame is
    phase-matched to its predecessor as in :func:`gauge_continue`.
    """
    h = np.asarray(matrices, dtype=np.complex128)
    asym = np.max(np.abs(h - np.swapaxes(h, -1, -2).conj()), axis=(-2, -1))
    if np.any(asym > HERMITIAN_TOL):
        j = int(np.argmax(asym > HERMITIAN_TOL))
        raise NonHermitianError(f"sample {j} is not Hermitian (asymmetry {asym[j]:.3e})")
    h = 0.5 * (h + np.swapaxes(h, -1, -2).conj())
    energies, cols = np.linalg.eigh(h)
    _check_gaps(energies)
    vecs = gauge_fix(np.swapaxes(cols, -1, -2))
    ov = np.einsum("jmi,jmi->jm", vecs[:-1].conj(), vecs[1:])
    mag = np.abs(ov)
    if np.any(mag < CONTINUATION_MIN_OVERLAP):
        j, m = np.unravel_index(int(np.argmin(mag)), mag.shape)
        raise ContinuationBreakdown(
            f"overlap {mag[j, m]:.3e} of level {m} between t={times[j]} and t={times[j + 1]}; "
            "refine the time grid")
    # beta_j = beta_{j-1} - arg <v_{j-1}|v_j>
    beta = np.zeros(energies.shape)
    beta[1:] = -np.cumsum(np.angle(ov), axis=0)
    vecs = vecs * np.exp(1j * beta)[:, :, None]
    energies.setflags(write=False)
    return EigenframeTrajectory(np.asarray(times, dtype=float), energies, _frozen(vecs))

"""Grid calculus shared by the phase and decomposition code.

All helpers assume a uniform grid along axis 0.
"""

import math

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson

TWO_PI = 2.0 * math.pi

# one-sided five-point stencil, 4th order
_FORWARD = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def wrap_phase(x):
    """Fold an angle into (-pi, pi]."""
    p = math.remainder(float(x), TWO_PI)
    if p <= -math.pi:
        p += TWO_PI
    return p


def simpson_uniform(y, h):
    """Composite Simpson rule along axis 0; needs an odd number of samples."""
    y = np.asarray(y)
    if y.shape[0] < 3 or y.shape[0] % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd number (>=3) of samples, got {y.shape[0]}")
    return simpson(y, dx=h, axis=0)


def running_trapezoid(y, h):
    return cumulative_trapezoid(y, dx=h, axis=0, initial=0.0)


def fd_derivative(y, h):
    """Fourth-order finite-difference derivative along axis 0.

    Central five-point stencil in the interior, one-sided five-point stencils
    for the first and last two samples. Falls back to second order for grids
    shorter than five points.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < 5:
        return np.gradient(y, h, axis=0, edge_order=2 if n > 2 else 1)
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    for j in (0, 1):
        d[j] = np.tensordot(_FORWARD, y[j:j + 5], axes=(0, 0)) / h
        d[n - 1 - j] = -np.tensordot(_FORWARD, y[n - 1 - j - 4:n - j][::-1], axes=(0, 0)) / h
    return d


def _log_overlap(vecs, offset):
    """log <v_j | v_{j+offset}>; index i of the result is base point j = i + max(0, -offset)."""
    n = vecs.shape[0]
    if offset >= 0:
        ov = np.einsum("ji,ji->j", vecs[:n - offset].conj(), vecs[offset:])
    else:
        ov = np.einsum("ji,ji->j", vecs[-offset:].conj(), vecs[:n + offset])
    return np.log(np.abs(ov)) + 1j * np.angle(ov)


def _single_log(vecs, j, offset):
    ov = np.vdot(vecs[j], vecs[j + offset])
    return np.log(abs(ov)) + 1j * np.angle(ov)


def connection_fd(vecs, h):
    """Estimate <v(t)|dv/dt> on a uniform grid.

    Differentiates s -> log<v(t)|v(t+s)> at s=0 instead of differentiating the
    vectors themselves. The estimate is exact for any phase factor that is a
    polynomial of degree <= 4 in t, so rapidly rotating global phases do not
    pollute it.
    """
    vecs = np.asarray(vecs)
    n = vecs.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples for the connection stencil")
    out = np.empty(n, dtype=complex)
    lm2 = _log_overlap(vecs, -2)[: n - 4]
    lm1 = _log_overlap(vecs, -1)[1: n - 3]
    lp1 = _log_overlap(vecs, 1)[2: n - 2]
    lp2 = _log_overlap(vecs, 2)[2: n - 2]
    out[2:-2] = (lm2 - 8.0 * lm1 + 8.0 * lp1 - lp2) / (12.0 * h)
    for j in (0, 1):
        fwd = [_single_log(vecs, j, s) for s in range(5)]
        out[j] = np.dot(_FORWARD, fwd) / h
        jj = n - 1 - j
        bwd = [_single_log(vecs, jj, -s) for s in range(5)]
        out[jj] = -np.dot(_FORWARD, bwd) / h
    return out


def unwrap_tracked(f, t0, t1, n, max_depth=40, jump=math.pi / 3):
    """Continuously track the angle returned by ``f`` on [t0, t1].

    ``f`` maps an array of times to principal angles. The interval is sampled
    at ``n`` uniform points; any step whose wrapped increment exceeds ``jump``
    is bisected until it does not, so fast swings near zeros of the underlying
    complex function are followed instead of guessed.
    Returns the unwrapped angle at ``t1``.
    """
    ts = np.linspace(t0, t1, n)
    vals = np.asarray(f(ts), dtype=float)
    steps = np.remainder(np.diff(vals) + math.pi, TWO_PI) - math.pi
    for i in np.flatnonzero(np.abs(steps) > jump):
        steps[i] = tracked_increment(f, ts[i], vals[i], ts[i + 1], vals[i + 1], max_depth, jump)
    return float(vals[0] + steps.sum())


def tracked_increment(f, ta, va, tb, vb, depth=40, jump=math.pi / 3):
    """Continuous change of the angle ``f`` between ``ta`` and ``tb`` by bisection.

    A step that stays unresolved at full depth is a genuine zero crossing of
    the underlying complex function; its +-pi ambiguity is broken towards +pi.
    """
    d = math.remainder(vb - va, TWO_PI)
    if abs(d) <= jump:
        return d
    if depth == 0 or abs(tb - ta) <= 1e-15 * max(1.0, abs(tb)):
        return abs(d) if abs(d) > math.pi - 1e-6 else d
    tm = 0.5 * (ta + tb)
    vm = float(np.asarray(f(np.array([tm])))[0])
    return (tracked_increment(f, ta, va, tm, vm, depth - 1, jump)
            + tracked_increment(f, tm, vm, tb, vb, depth - 1, jump))

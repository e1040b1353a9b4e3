"""Dormand-Prince 5(4) stepping for i dpsi/dt = H(t) psi.

One stepper body, ``_dopri5``, is specialised per Hamiltonian: compiled
with numba for the built-in models, whose H(t) is compiled too, and run as
plain Python with numpy helpers for user callbacks. H is supplied as
``H(t, p, c, out)``, which writes H(t) into ``out``; ``p`` is a float64
vector and ``c`` a complex128 4-d array of model data.
"""

import types

import numpy as np
from numba import njit

# Dormand & Prince (1980) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# dense output (Hairer, Norsett & Wanner, contd5)
D1, D3, D4 = -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0, -10690763975.0 / 1880347072.0
D5, D6, D7 = 701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0

# PI controller; the error is measured per unit time, so the effective order is 4
BETA = 0.04
EXPO1 = 0.25 - 0.75 * BETA
SAFE = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


# Stage weights as rows: stage i uses A[i][:i]; row 6 is the 5th-order solution.
# Tuples rather than arrays keep the compiled functions cacheable.
A = (
    (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    (A21, 0.0, 0.0, 0.0, 0.0, 0.0),
    (A31, A32, 0.0, 0.0, 0.0, 0.0),
    (A41, A42, A43, 0.0, 0.0, 0.0),
    (A51, A52, A53, A54, 0.0, 0.0),
    (A61, A62, A63, A64, A65, 0.0),
    (A71, 0.0, A73, A74, A75, A76),
)
C = (0.0, C2, C3, C4, C5, 1.0, 1.0)
E = (E1, 0.0, E3, E4, E5, E6, E7)
D = (D1, 0.0, D3, D4, D5, D6, D7)
_E_ARR = np.array(E)
_D_ARR = np.array(D)


def _matvec(hbuf, y, out):
    # out = -i H y
    n = y.shape[0]
    for r in range(n):
        acc = 0j
        for q in range(n):
            acc += hbuf[r, q] * y[q]
        out[r] = -1j * acc


def _combine(y, h, w, k, m, out):
    # out = y + h * sum_{s<m} w[s] k[s]
    for i in range(y.shape[0]):
        acc = 0j
        for s in range(m):
            acc += w[s] * k[s, i]
        out[i] = y[i] + h * acc


def _err_norm(h, k):
    err = 0.0
    for i in range(k.shape[1]):
        acc = 0j
        for s in range(7):
            acc += E[s] * k[s, i]
        e = abs(h * acc)
        if e > err:
            err = e
    return err


def _dense(y, y_new, k, h, th, out):
    th1 = 1.0 - th
    for i in range(y.shape[0]):
        ydiff = y_new[i] - y[i]
        bspl = h * k[0, i] - ydiff
        r4 = ydiff - h * k[6, i] - bspl
        acc = 0j
        for s in range(7):
            acc += D[s] * k[s, i]
        out[i] = y[i] + th * (ydiff + th1 * (bspl + th * (r4 + th1 * h * acc)))


def _dopri5(p, c, y0, t_out, tol, h_init, max_steps):
    # H(t, p, c, out) is a module-level name bound per specialisation

    n_out = t_out.shape[0]
    n = y0.shape[0]
    out = np.empty((n_out, n), dtype=np.complex128)
    out[0] = y0
    t = t_out[0]
    t_end = t_out[n_out - 1]
    direction = 1.0 if t_end > t else -1.0
    h = min(abs(h_init), abs(t_end - t)) * direction
    hbuf = np.empty((n, n), dtype=np.complex128)
    k = np.empty((7, n), dtype=np.complex128)
    y = y0.copy()
    y_new = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    H(t, p, c, hbuf)
    matvec(hbuf, y, k[0])
    err_old = 1e-4
    accepted = 0
    rejected = 0
    reject_prev = False
    j = 1
    status = STATUS_OK
    while j < n_out:
        if accepted + rejected >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break
        last = False
        if direction * (t + h - t_end) >= 0.0:
            h = t_end - t
            last = True
        for s in range(1, 6):
            combine(y, h, A[s], k, s, tmp)
            H(t + C[s] * h, p, c, hbuf)
            matvec(hbuf, tmp, k[s])
        combine(y, h, A[6], k, 6, y_new)
        t_new = t_end if last else t + h
        H(t_new, p, c, hbuf)
        matvec(hbuf, y_new, k[6])
        err = err_norm(h, k) / (tol * abs(h))
        fac11 = err ** EXPO1
        if err <= 1.0:
            while j < n_out and direction * (t_out[j] - t_new) < 0.0:
                dense(y, y_new, k, h, (t_out[j] - t) / h, out[j])
                j += 1
            if j < n_out and (last or t_out[j] == t_new):
                out[j] = y_new
                j += 1
            y[:] = y_new
            k[0] = k[6]
            t = t_new
            accepted += 1
            fac = fac11 / err_old ** BETA
            fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
            h_next = h / fac
            if reject_prev:
                h_next = direction * min(abs(h_next), abs(h))
            err_old = max(err, 1e-4)
            reject_prev = False
            h = h_next
        else:
            rejected += 1
            reject_prev = True
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)
    return out, accepted, rejected, status


matvec = njit(cache=True)(_matvec)
combine = njit(cache=True)(_combine)
err_norm = njit(cache=True)(_err_norm)
dense = njit(cache=True)(_dense)


def _specialise(name, **names):
    # a copy of ``_dopri5`` whose free names resolve to ``names``
    fn = types.FunctionType(_dopri5.__code__, dict(_dopri5.__globals__, **names), name)
    fn.__qualname__ = name
    return fn


def _matvec_py(hbuf, y, out):
    np.matmul(hbuf, y, out=out)
    out *= -1j


def _combine_py(y, h, w, k, m, out):
    out[:] = y + h * (np.asarray(w[:m]) @ k[:m])


def _err_norm_py(h, k):
    return float(np.max(np.abs(h * (_E_ARR @ k))))


def _dense_py(y, y_new, k, h, th, out):
    ydiff = y_new - y
    bspl = h * k[0] - ydiff
    r4 = ydiff - h * k[6] - bspl
    th1 = 1.0 - th
    out[:] = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * h * (_D_ARR @ k))))


def dopri5_py(hfun, p, c, y0, t_out, tol, h_init, max_steps):
    """Plain-Python run of the stepper with ``hfun(t, p, c, out)`` supplying H."""
    fn = _specialise("dopri5_py", H=hfun, matvec=_matvec_py, combine=_combine_py,
                     err_norm=_err_norm_py, dense=_dense_py)
    return fn(p, c, y0, t_out, tol, h_init, max_steps)


@njit(cache=True)
def rotating_field_h(t, p, c, h):
    w0, w, th = p[0], p[1], p[2]
    k = -0.5 * w0
    h[0, 0] = k * np.cos(th)
    h[1, 1] = -k * np.cos(th)
    h[0, 1] = k * np.sin(th) * np.exp(-1j * w * t)
    h[1, 0] = k * np.sin(th) * np.exp(1j * w * t)


@njit(cache=True)
def spline_h(t, p, c, h):
    # p: breakpoints, c: (4, n_seg, N, N) coefficients, highest power first
    n_seg = c.shape[1]
    i = np.searchsorted(p, t, side="right") - 1
    if i < 0:
        i = 0
    elif i > n_seg - 1:
        i = n_seg - 1
    dt = t - p[i]
    n = h.shape[0]
    for r in range(n):
        for q in range(r, n):
            v = ((c[0, i, r, q] * dt + c[1, i, r, q]) * dt + c[2, i, r, q]) * dt + c[3, i, r, q]
            w = ((c[0, i, q, r] * dt + c[1, i, q, r]) * dt + c[2, i, q, r]) * dt + c[3, i, q, r]
            h[r, q] = 0.5 * (v + np.conj(w))
            h[q, r] = np.conj(h[r, q])


@njit(cache=True)
def affine_sine_h(t, p, c, h):
    # H = c[0, 0] + sin(p[0] t) c[1, 0]
    sn = np.sin(p[0] * t)
    n = h.shape[0]
    for r in range(n):
        for q in range(n):
            h[r, q] = c[0, 0, r, q] + sn * c[1, 0, r, q]


# Compiled steppers, one per built-in model, each cached on disk under its own name.
dopri5_rotating_field = njit(cache=True)(_specialise("dopri5_rotating_field", H=rotating_field_h))
dopri5_spline = njit(cache=True)(_specialise("dopri5_spline", H=spline_h))
dopri5_affine_sine = njit(cache=True)(_specialise("dopri5_affine_sine", H=affine_sine_h))

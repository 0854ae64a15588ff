"""Hot loops: split-step NLS stepping and the Volterra quadrature sweep.

Each kernel has a compiled version (numba ``@njit``) and a reference version
built from numpy/scipy.  The compiled one is used when numba imports and the
environment variable ``DELTANLS_NO_NUMBA`` is unset or "0".
"""
from __future__ import annotations

import os

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

_flag = os.environ.get("DELTANLS_NO_NUMBA", "0").strip().lower()
_WANT_NUMBA = _flag in ("", "0", "false", "no")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _WANT_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"

_JIT_OPTS = {"cache": True, "nogil": True, "fastmath": False}


# ---------------------------------------------------------------- Simpson weights

def simpson_tail_weights(m: int) -> np.ndarray:
    """Composite weights (unit spacing) for m intervals: Simpson, 3/8 head when m is odd."""
    w = np.zeros(m + 1)
    if m == 0:
        return w
    if m == 1:
        w[:] = 0.5
        return w
    start = 0
    if m % 2 == 1:
        w[0:4] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
        start = 3
    if m - start > 0:
        seg = np.ones(m - start + 1)
        seg[1:-1:2] = 4.0
        seg[2:-1:2] = 2.0
        w[start:] += seg / 3.0
    return w


# ---------------------------------------------------------------- reference backend

def _numpy_volterra_apply(k1, k2, F0, F1, h):
    n = F0.shape[0]
    out0 = np.zeros(n, dtype=F0.dtype)
    out1 = np.zeros(n, dtype=F1.dtype)
    for i in range(n):
        m = n - 1 - i
        w = simpson_tail_weights(m)
        out0[i] = h * np.dot(w * k1[: m + 1], F0[i:])
        out1[i] = h * np.dot(w * k2[: m + 1], F1[i:])
    return out0, out1


class _NumpyStrang:
    def __init__(self, hdiag, hoff, dt, sigma, p, vref):
        n = hdiag.size
        off = np.full(n - 1, hoff, dtype=complex)
        self.lhs = splu(diags([0.5j * dt * off, 1.0 + 0.5j * dt * hdiag, 0.5j * dt * off], [-1, 0, 1], format="csc"))
        self.rhs = diags([-0.5j * dt * off, 1.0 - 0.5j * dt * hdiag, -0.5j * dt * off], [-1, 0, 1], format="csr")
        self.half = 0.5 * dt * sigma
        self.vhalf = 0.5 * dt * vref
        self.p = p

    def run(self, u, nsteps):
        u = np.array(u, dtype=complex)
        for _ in range(nsteps):
            u *= np.exp(-1j * (self.half * np.abs(u) ** self.p - self.vhalf))
            u = self.lhs.solve(self.rhs @ u)
            u *= np.exp(-1j * (self.half * np.abs(u) ** self.p - self.vhalf))
        return u


# ---------------------------------------------------------------- compiled backend

if HAVE_NUMBA:

    @njit(**_JIT_OPTS)
    def _tail_weight(j, m):
        # weight of node j (0..m) in the composite rule for m intervals
        if m == 1:
            return 0.5
        w = 0.0
        start = 0
        if m % 2 == 1:
            start = 3
            if j == 0 or j == 3:
                w += 3.0 / 8.0
            elif j == 1 or j == 2:
                w += 9.0 / 8.0
        if j >= start and m - start > 0:
            r = j - start
            if r == 0 or j == m:
                w += 1.0 / 3.0
            elif r % 2 == 1:
                w += 4.0 / 3.0
            else:
                w += 2.0 / 3.0
        return w

    @njit(**_JIT_OPTS)
    def _numba_volterra_apply(k1, k2, F0, F1, h):
        n = F0.shape[0]
        out0 = np.zeros(n, dtype=F0.dtype)
        out1 = np.zeros(n, dtype=F1.dtype)
        for i in range(n):
            m = n - 1 - i
            s0 = 0.0 * F0[0]
            s1 = 0.0 * F1[0]
            for j in range(m + 1):
                w = _tail_weight(j, m)
                s0 += w * k1[j] * F0[i + j]
                s1 += w * k2[j] * F1[i + j]
            out0[i] = h * s0
            out1[i] = h * s1
        return out0, out1

    @njit(**_JIT_OPTS)
    def _thomas_factor(lower, diag, upper):
        n = diag.size
        cp = np.empty(n, dtype=np.complex128)
        den = np.empty(n, dtype=np.complex128)
        den[0] = diag[0]
        cp[0] = upper / den[0]
        for i in range(1, n):
            den[i] = diag[i] - lower * cp[i - 1]
            cp[i] = upper / den[i]
        return cp, den

    @njit(**_JIT_OPTS)
    def _numba_strang_run(u, nsteps, hdiag, hoff, dt, sigma, p, vref):
        n = u.size
        a = 0.5j * dt * hoff
        cp, den = _thomas_factor(a, 1.0 + 0.5j * dt * hdiag, a)
        rd = 1.0 - 0.5j * dt * hdiag
        half = 0.5 * dt * sigma
        vhalf = 0.5 * dt * vref
        d = np.empty(n, dtype=np.complex128)
        u = u.copy()
        for _ in range(nsteps):
            for i in range(n):
                u[i] *= np.exp(-1j * (half * np.abs(u[i]) ** p - vhalf[i]))
            for i in range(n):
                s = rd[i] * u[i]
                if i > 0:
                    s -= a * u[i - 1]
                if i < n - 1:
                    s -= a * u[i + 1]
                d[i] = s
            # forward sweep then back substitution
            d[0] = d[0] / den[0]
            for i in range(1, n):
                d[i] = (d[i] - a * d[i - 1]) / den[i]
            u[n - 1] = d[n - 1]
            for i in range(n - 2, -1, -1):
                u[i] = d[i] - cp[i] * u[i + 1]
            for i in range(n):
                u[i] *= np.exp(-1j * (half * np.abs(u[i]) ** p - vhalf[i]))
        return u

    class _NumbaStrang:
        def __init__(self, hdiag, hoff, dt, sigma, p, vref):
            self.args = (np.ascontiguousarray(hdiag, dtype=float), float(hoff), float(dt), float(sigma), float(p),
                         np.ascontiguousarray(vref, dtype=float))

        def run(self, u, nsteps):
            return _numba_strang_run(np.ascontiguousarray(u, dtype=np.complex128), int(nsteps), *self.args)


def volterra_apply(k1, k2, F0, F1, h, backend=None):
    """out_c[i] = int_{x_i}^{x_N} k_c(y - x_i) F_c(y) dy by composite Simpson (uniform spacing h)."""
    use = (backend or BACKEND) == "numba"
    if use and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    fn = _numba_volterra_apply if use else _numpy_volterra_apply
    return fn(np.ascontiguousarray(k1), np.ascontiguousarray(k2), np.ascontiguousarray(F0), np.ascontiguousarray(F1), float(h))


def strang_stepper(hdiag, hoff, dt, sigma, p, backend=None, vref=None):
    """Stepper whose ``run(u, nsteps)`` performs Strang steps with a Crank-Nicolson linear part.

    The pointwise phase step uses sigma |u|^p - vref; ``vref`` (default 0) is expected
    to be included in ``hdiag`` by the caller so that the split operators still sum to
    the full right side.
    """
    use = (backend or BACKEND) == "numba"
    if use and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    cls = _NumbaStrang if use else _NumpyStrang
    hdiag = np.asarray(hdiag, dtype=float)
    vref = np.zeros_like(hdiag) if vref is None else np.asarray(vref, dtype=float)
    return cls(hdiag, hoff, dt, sigma, p, vref)

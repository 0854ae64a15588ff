"""Closed-form solitary waves of the delta-defect NLS and their frequency derivatives.

The profile solves ``-Q''/2 + q*delta*Q + omega*Q + sigma*Q**(p+1) = 0`` and is
written as ``A * g(s)**(-2/p)`` with ``s = kappa*|x| + a`` where ``g`` is
``cosh`` (focusing, sigma=-1) or ``sinh`` (defocusing, sigma=+1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ParameterError, SearchError

__all__ = [
    "SolitonParams",
    "Grid",
    "soliton_profile",
    "soliton_dx",
    "soliton_domega",
    "soliton_domega2",
    "soliton_mass",
    "inner_q_dq",
    "mass_derivative",
    "critical_frequency",
    "omega_identity_residual",
    "zero_frequency_profile",
    "zero_frequency_mass",
    "decay_length",
]


@dataclass(frozen=True)
class SolitonParams:
    q: float
    sigma: int
    p: float
    omega: float

    def __post_init__(self):
        if not self.q < 0:
            raise ParameterError(f"q must be negative (attractive defect), got {self.q}")
        if self.sigma not in (-1, 1):
            raise ParameterError(f"sigma must be +1 or -1, got {self.sigma}")
        if not self.p > 0:
            raise ParameterError(f"p must be positive, got {self.p}")
        edge = 0.5 * self.q * self.q
        if self.sigma == 1 and not (0.0 < self.omega < edge):
            raise ParameterError(f"defocusing requires 0 < omega < {edge}, got {self.omega}")
        if self.sigma == -1 and not self.omega > edge:
            raise ParameterError(f"focusing requires omega > {edge}, got {self.omega}")

    def with_omega(self, omega: float) -> "SolitonParams":
        return SolitonParams(self.q, self.sigma, self.p, omega)

    @property
    def kappa(self) -> float:
        return self.p * math.sqrt(self.omega / 2.0)

    @property
    def amplitude(self) -> float:
        return ((self.p + 2.0) * self.omega / 2.0) ** (1.0 / self.p)

    @property
    def shift(self) -> float:
        r = self._ratio()
        return math.atanh(r)

    def _ratio(self) -> float:
        # argument of arctanh in the closed form
        if self.sigma == -1:
            return abs(self.q) / math.sqrt(2.0 * self.omega)
        return math.sqrt(2.0 * self.omega) / abs(self.q)


@dataclass(frozen=True)
class Grid:
    """Uniform mesh x_j = j*h, j = -n_half..n_half."""

    h: float
    n_half: int

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError(f"grid spacing must be positive, got {self.h}")
        if self.n_half < 1:
            raise ParameterError("grid needs at least one node per half-line")

    @classmethod
    def from_halfwidth(cls, h: float, X: float) -> "Grid":
        return cls(h, int(round(X / h)))

    @property
    def n(self) -> int:
        return 2 * self.n_half + 1

    @property
    def X(self) -> float:
        return self.n_half * self.h

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(-self.n_half, self.n_half + 1, dtype=float)

    @property
    def origin(self) -> int:
        return self.n_half


def _log_g(s, sigma):
    # log cosh(s) or log sinh(s) for s > 0 without overflow
    e = np.exp(-2.0 * s)
    if sigma == -1:
        return s + np.log1p(e) - math.log(2.0)
    return s + np.log1p(-e) - math.log(2.0)


def _gfun(s, sigma):
    # d/ds log g(s): tanh or coth
    return np.tanh(s) if sigma == -1 else 1.0 / np.tanh(s)


def _dgfun(s, sigma):
    if sigma == -1:
        return 1.0 / np.cosh(np.minimum(s, 350.0)) ** 2
    return -1.0 / np.sinh(np.minimum(s, 350.0)) ** 2


def _shift_derivatives(params: SolitonParams):
    """First and second omega-derivatives of the shift a(omega)."""
    q2 = params.q ** 2
    w = params.omega
    r = params._ratio()
    if params.sigma == -1:
        d1 = -r / (2 * w - q2)
        d2 = r / (2 * w * (2 * w - q2)) + 2 * r / (2 * w - q2) ** 2
    else:
        d1 = 1.0 / (r * (q2 - 2 * w))
        d2 = -1.0 / (2 * w * r * (q2 - 2 * w)) + 2.0 / (r * (q2 - 2 * w) ** 2)
    return d1, d2


def soliton_profile(params: SolitonParams, x):
    """Q_omega(x) evaluated from the closed form; accepts scalars or arrays."""
    xa = np.abs(np.asarray(x, dtype=float))
    s = params.kappa * xa + params.shift
    out = params.amplitude * np.exp(-(2.0 / params.p) * _log_g(s, params.sigma))
    return out if out.ndim else float(out)


def soliton_dx(params: SolitonParams, x, side: int = 1):
    """Analytic x-derivative; at x = 0 the one-sided limit on ``side`` (+1 or -1) is returned."""
    xa = np.asarray(x, dtype=float)
    sgn = np.where(xa > 0, 1.0, np.where(xa < 0, -1.0, float(np.sign(side) or 1)))
    s = params.kappa * np.abs(xa) + params.shift
    out = -(2.0 / params.p) * params.kappa * _gfun(s, params.sigma) * sgn * soliton_profile(params, xa)
    return out if out.ndim else float(out)


def _dlog_parts(params: SolitonParams, xa):
    s = params.kappa * xa + params.shift
    a1, a2 = _shift_derivatives(params)
    w = params.omega
    ds = params.kappa * xa / (2 * w) + a1
    d2s = -params.kappa * xa / (4 * w * w) + a2
    return s, ds, d2s


def soliton_domega(params: SolitonParams, x):
    """Analytic omega-derivative of the profile."""
    xa = np.abs(np.asarray(x, dtype=float))
    p, w = params.p, params.omega
    s, ds, _ = _dlog_parts(params, xa)
    dlog = 1.0 / (p * w) - (2.0 / p) * _gfun(s, params.sigma) * ds
    out = soliton_profile(params, xa) * dlog
    return out if np.ndim(out) else float(out)


def soliton_domega2(params: SolitonParams, x):
    """Analytic second omega-derivative of the profile."""
    xa = np.abs(np.asarray(x, dtype=float))
    p, w = params.p, params.omega
    s, ds, d2s = _dlog_parts(params, xa)
    g = _gfun(s, params.sigma)
    dlog = 1.0 / (p * w) - (2.0 / p) * g * ds
    d2log = -1.0 / (p * w * w) - (2.0 / p) * (_dgfun(s, params.sigma) * ds * ds + g * d2s)
    out = soliton_profile(params, xa) * (dlog * dlog + d2log)
    return out if np.ndim(out) else float(out)


def decay_length(params: SolitonParams, rel: float = 1e-12) -> float:
    """Half-width X beyond which Q < rel * Q(0) (from the exponential tail)."""
    # Q ~ C exp(-(2/p) kappa x) in the tail
    rate = 2.0 * params.kappa / params.p
    return max(1.0, (math.log(1.0 / rel) + 2.0) / rate)


def _half_line_integral(func, X):
    val, _ = integrate.quad(func, 0.0, X, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def soliton_mass(params: SolitonParams) -> float:
    """Mass 2*int_0^inf Q^2 by adaptive quadrature on the right half-line."""
    X = decay_length(params)
    return 2.0 * _half_line_integral(lambda t: soliton_profile(params, t) ** 2, X)


def inner_q_dq(params: SolitonParams) -> float:
    """<Q, dQ/domega> = (1/2) d/domega of the mass."""
    X = decay_length(params)
    return 2.0 * _half_line_integral(
        lambda t: soliton_profile(params, t) * soliton_domega(params, t), X
    )


def mass_derivative(params: SolitonParams) -> float:
    return 2.0 * inner_q_dq(params)


def critical_frequency(q: float, p: float, xtol: float = 1e-10) -> float:
    """Focusing frequency where <Q, dQ/domega> changes sign (exists for p > 4)."""
    if not q < 0:
        raise ParameterError("q must be negative")
    if not p > 4:
        raise ParameterError("critical frequency exists only for p > 4")
    edge = 0.5 * q * q

    def f(w):
        return inner_q_dq(SolitonParams(q, -1, p, w))

    lo = edge * (1.0 + 1e-6)
    if f(lo) <= 0:
        raise SearchError("inner product not positive near the threshold", (lo, lo))
    hi = 2.0 * edge
    while f(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise SearchError("no sign change found", (edge, hi))
    root = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


def omega_identity_residual(q: float, p: float, omega: float) -> float:
    """LHS - RHS of the integral identity that characterizes the critical frequency."""
    r = abs(q) / math.sqrt(2.0 * omega)
    a = math.atanh(r)
    lhs, _ = integrate.quad(
        lambda t: np.exp(-(4.0 / p) * _log_g(t, -1)), a, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400
    )
    lhs *= (p - 4.0) / p
    rhs = r * (1.0 - q * q / (2.0 * omega)) ** (2.0 / p - 1.0)
    return lhs - rhs


def zero_frequency_profile(q: float, p: float, x):
    """Algebraically decaying defocusing profile at omega = 0."""
    xa = np.abs(np.asarray(x, dtype=float))
    out = ((p + 2.0) * q * q / (p * abs(q) * xa + 2.0) ** 2) ** (1.0 / p)
    return out if out.ndim else float(out)


def zero_frequency_mass(q: float, p: float, X: float = np.inf) -> float:
    """2*int_0^X Q_0^2; finite as X -> inf only for p < 4."""
    f = lambda t: zero_frequency_profile(q, p, t) ** 2  # noqa: E731
    val, _ = integrate.quad(f, 0.0, X, epsabs=1e-12, epsrel=1e-10, limit=500)
    return 2.0 * val

"""Edge-of-spectrum resonance search for the linearized operator.

For fixed omega the four coupled equations

    L- g1 = -omega f2,  L- g2 = omega f1,  L+ f1 = omega g2,  L+ f2 = -omega g1

are linear, so the boundary-value problem on [0, x0] is assembled as one sparse
system (central differences, node-major ordering) and solved directly.  A
resonance shows up as a frequency at which the solution is asymptotically flat.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.sparse.linalg import splu

from .errors import NumericalError, ParameterError, SearchError
from .soliton_family import SolitonParams, critical_frequency, soliton_mass, soliton_profile

__all__ = [
    "BvpSystem",
    "BvpSolution",
    "ResonanceScan",
    "TableRow",
    "assemble_bvp",
    "solve_bvp",
    "flatness",
    "flatness_at",
    "scan",
    "default_samples",
    "refine",
    "refine_extrapolated",
    "find_resonance",
    "resonance_table",
    "crossing_point",
]

_COMPONENTS = ("f1", "f2", "g1", "g2")
# (row component, potential multiplier key, coupled component, coupling sign)
# multiplier key 'plus' -> (p+1) for L+, 'minus' -> 1 for L-
_ROWS = ((0, "plus", 3, -1.0), (1, "plus", 2, 1.0), (2, "minus", 1, 1.0), (3, "minus", 0, -1.0))


@dataclass
class BvpSystem:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    x: np.ndarray
    h: float
    omega: float
    parity: str
    n_interior_rows: int
    n_boundary_rows: int


@dataclass
class BvpSolution:
    x: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    parity: str
    omega: float
    residual: float = 0.0

    def stacked(self) -> np.ndarray:
        return np.column_stack([self.f1, self.f2, self.g1, self.g2])


@dataclass
class ResonanceScan:
    omegas: np.ndarray
    flatness: np.ndarray
    minima: list = field(default_factory=list)

    def deepest(self):
        if not self.minima:
            raise SearchError("scan has no interior local minimum",
                              (float(self.omegas[0]), float(self.omegas[-1])))
        return min(self.minima, key=lambda m: m[1])


def _check_parity(parity):
    if parity not in ("even", "odd"):
        raise ParameterError(f"parity must be 'even' or 'odd', got {parity!r}")


def assemble_bvp(q, p, omega, parity, x0=50.0, n=None, h=0.01, sigma=-1, far_field="pinned"):
    """Sparse system for (f1, f2, g1, g2) on [0, x0].

    ``n`` (number of intervals) overrides ``h``.  ``far_field='pinned'`` imposes
    f1(x0)=1, f1'(x0)=0, f1(x0)=g1(x0), f2(x0)=-g2(x0); ``far_field='neumann'``
    imposes u'(x0)=0 on all four unknowns, a homogeneous choice whose solution is
    the zero function.
    """
    _check_parity(parity)
    params = SolitonParams(q, sigma, p, omega)
    if n is None:
        n = int(round(x0 / h))
    h = x0 / n
    x = h * np.arange(n + 1)
    V = sigma * soliton_profile(params, x) ** p
    mult = {"plus": p + 1.0, "minus": 1.0}
    R, C, D = [], [], []
    j = np.arange(1, n)
    off = np.full(j.size, -0.5 / h**2)
    for c, key, oc, sgn in _ROWS:
        r = 4 * j + c
        R += [r, r, r, r]
        C += [4 * (j - 1) + c, 4 * j + c, 4 * (j + 1) + c, 4 * j + oc]
        D += [off, 1.0 / h**2 + omega + mult[key] * V[j], off, np.full(j.size, sgn * omega)]
    for c, key, oc, sgn in _ROWS:
        if parity == "even":
            # H stencil at the origin with the even ghost value u_{-1} = u_1
            R += [np.array([c, c, c])]
            C += [np.array([c, 4 + c, oc])]
            D += [np.array([1.0 / h**2 + q / h + omega + mult[key] * V[0], -1.0 / h**2, sgn * omega])]
        else:
            R += [np.array([c])]
            C += [np.array([c])]
            D += [np.array([1.0])]
    b = 4 * n
    rhs = np.zeros(4 * (n + 1))
    if far_field == "pinned":
        R += [np.array([b]), np.array([b + 1] * 3), np.array([b + 2] * 2), np.array([b + 3] * 2)]
        C += [np.array([b]), np.array([b, b - 4, b - 8]), np.array([b, b + 2]), np.array([b + 1, b + 3])]
        D += [np.array([1.0]), np.array([1.5, -2.0, 0.5]) / h, np.array([1.0, -1.0]), np.array([1.0, 1.0])]
        rhs[b] = 1.0
    elif far_field == "neumann":
        for c in range(4):
            R += [np.array([b + c] * 3)]
            C += [np.array([b + c, b + c - 4, b + c - 8])]
            D += [np.array([1.5, -2.0, 0.5]) / h]
    else:
        raise ParameterError(f"unknown far-field option {far_field!r}")
    A = sp.csc_matrix(
        (np.concatenate(D), (np.concatenate(R), np.concatenate(C))), shape=(4 * (n + 1), 4 * (n + 1))
    )
    return BvpSystem(A, rhs, x, h, omega, parity, 4 * (n - 1), 8)


def solve_bvp(q, p, omega, parity, x0=50.0, h=0.01, sigma=-1, far_field="pinned") -> BvpSolution:
    system = assemble_bvp(q, p, omega, parity, x0=x0, h=h, sigma=sigma, far_field=far_field)
    try:
        lu = splu(system.matrix)
    except RuntimeError as exc:
        raise NumericalError(f"singular BVP system at omega={omega}: {exc}") from exc
    u = lu.solve(system.rhs)
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"non-finite BVP solution at omega={omega}")
    res = float(np.max(np.abs(system.matrix @ u - system.rhs)))
    u = u.reshape(-1, 4)
    return BvpSolution(system.x, u[:, 0], u[:, 1], u[:, 2], u[:, 3], parity, omega, res)


def flatness(sol: BvpSolution, window_frac: float = 0.1) -> float:
    """RMS of the four discrete derivatives over the trailing ``window_frac`` of [0, x0]."""
    x = sol.x
    h = x[1] - x[0]
    d = np.gradient(sol.stacked(), h, axis=0)
    mask = x >= x[-1] * (1.0 - window_frac) - 1e-12
    return float(np.sqrt(np.mean(d[mask] ** 2)))


def flatness_at(q, p, omega, parity, x0=50.0, h=0.01, sigma=-1, window_frac=0.1) -> float:
    return flatness(solve_bvp(q, p, omega, parity, x0=x0, h=h, sigma=sigma), window_frac)


def default_samples(lo, hi, per_decade=200):
    return max(3, int(math.ceil(per_decade * math.log10(hi / lo))))


def _local_minima(omegas, vals):
    out = []
    for i in range(1, len(vals) - 1):
        a, b, c = vals[i - 1], vals[i], vals[i + 1]
        if np.isfinite(b) and np.isfinite(a) and np.isfinite(c) and b < a and b <= c:
            out.append((float(omegas[i]), float(b)))
    return out


def _safe_flatness(args):
    q, p, w, parity, x0, h, sigma = args
    try:
        return flatness_at(q, p, w, parity, x0=x0, h=h, sigma=sigma)
    except NumericalError:
        return np.nan


def scan(q, p, parity, omega_lo, omega_hi, n_samples=None, x0=50.0, h=0.01, sigma=-1,
         threads=1, spacing="linear") -> ResonanceScan:
    """Flatness on a uniform (or log-uniform) omega grid; failed solves become NaN gaps."""
    _check_parity(parity)
    edge = 0.5 * q * q
    if sigma == -1 and not omega_lo > edge:
        raise ParameterError("focusing scan requires omega_lo > q^2/2")
    if sigma == 1 and not (0 < omega_lo < omega_hi < edge):
        raise ParameterError("defocusing scan must lie inside (0, q^2/2)")
    if n_samples is None:
        n_samples = default_samples(omega_lo, omega_hi)
    if spacing == "log":
        omegas = np.geomspace(omega_lo, omega_hi, n_samples)
    else:
        omegas = np.linspace(omega_lo, omega_hi, n_samples)
    args = [(q, p, float(w), parity, x0, h, sigma) for w in omegas]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = np.array(list(ex.map(_safe_flatness, args)))
    else:
        vals = np.array([_safe_flatness(a) for a in args])
    return ResonanceScan(omegas, vals, _local_minima(omegas, vals))


def refine(q, p, parity, bracket, x0=50.0, h=0.01, sigma=-1, tol=1e-5, points=21,
           max_shifts=20) -> float:
    """Nested grid search: each round samples ``points`` frequencies and shrinks the width 10x."""
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise ParameterError("bracket must satisfy lo < hi")
    shifts = 0
    best = None
    while True:
        omegas = np.linspace(lo, hi, points)
        vals = np.array([_safe_flatness((q, p, float(w), parity, x0, h, sigma)) for w in omegas])
        if not np.any(np.isfinite(vals)):
            raise SearchError("all solves failed inside bracket", (lo, hi))
        k = int(np.nanargmin(vals))
        best = float(omegas[k])
        step = (hi - lo) / (points - 1)
        if k in (0, points - 1):
            # minimum sits on the edge: slide the window once per round, then give up
            shifts += 1
            if shifts > max_shifts:
                raise SearchError("minimum escapes bracket", (lo, hi))
            half = 0.5 * (hi - lo)
            lo, hi = best - half, best + half
            if sigma == -1 and lo <= 0.5 * q * q:
                lo = 0.5 * q * q * (1 + 1e-9)
            continue
        if hi - lo < tol:
            return best
        lo, hi = best - step, best + step


def refine_extrapolated(q, p, parity, bracket, x0=50.0, h=0.01, sigma=-1, tol=1e-5):
    """Richardson-combined minimizer (4 w(h/2) - w(h)) / 3 for the second-order stencil.

    Returns (extrapolated, w(h), w(h/2)).
    """
    w1 = refine(q, p, parity, bracket, x0=x0, h=h, sigma=sigma, tol=tol)
    width = bracket[1] - bracket[0]
    b2 = (w1 - 0.5 * width, w1 + 0.5 * width) if parity == "even" else bracket
    w2 = refine(q, p, parity, b2, x0=x0, h=0.5 * h, sigma=sigma, tol=tol)
    return (4.0 * w2 - w1) / 3.0, w1, w2


_DEFAULT_RANGES = {"even": (0.55, 4.0), "odd": (4.0, 80.0)}


def find_resonance(q, p, parity, omega_range=None, n_coarse=80, x0=50.0, h=0.01, sigma=-1,
                   extrapolate=False, tol=1e-5):
    """Coarse log-spaced scan, then nested refinement around the deepest minimum."""
    q2 = q * q
    lo, hi = omega_range if omega_range is not None else tuple(q2 * r for r in _DEFAULT_RANGES[parity])
    coarse = scan(q, p, parity, lo, hi, n_coarse, x0=x0, h=h, sigma=sigma, spacing="log")
    w0, _ = coarse.deepest()
    i = int(np.argmin(np.abs(coarse.omegas - w0)))
    bracket = (float(coarse.omegas[i - 1]), float(coarse.omegas[i + 1]))
    if extrapolate:
        return refine_extrapolated(q, p, parity, bracket, x0=x0, h=h, sigma=sigma, tol=tol)[0]
    return refine(q, p, parity, bracket, x0=x0, h=h, sigma=sigma, tol=tol)


@dataclass
class TableRow:
    p: float
    omega1: float = np.nan
    mass: float = np.nan
    omega2: float = np.nan
    Omega: float = np.nan
    errors: list = field(default_factory=list)


def resonance_table(q, p_list, x0=50.0, h=0.01, odd_from=4.2, extrapolate_odd=True,
                    extrapolate_even=False, threads=1):
    """Rows (p, omega1, M(Q_omega1), omega2, Omega); failures are recorded per row."""

    def row(p):
        r = TableRow(float(p))
        try:
            r.omega1 = find_resonance(q, p, "even", x0=x0, h=h, extrapolate=extrapolate_even)
            r.mass = soliton_mass(SolitonParams(q, -1, p, r.omega1))
        except Exception as exc:  # noqa: BLE001 - row-level failure is recorded, not raised
            r.errors.append(f"omega1: {exc}")
        if p >= odd_from - 1e-12:
            try:
                r.omega2 = find_resonance(q, p, "odd", x0=x0, h=h, extrapolate=extrapolate_odd)
            except Exception as exc:  # noqa: BLE001
                r.errors.append(f"omega2: {exc}")
        if p > 4:
            try:
                r.Omega = critical_frequency(q, p)
            except Exception as exc:  # noqa: BLE001
                r.errors.append(f"Omega: {exc}")
        return r

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(row, p_list))
    return [row(p) for p in p_list]


def crossing_point(q, p_bracket=(4.3, 4.9), x0=50.0, h=0.01, xtol=2e-3):
    """p at which the odd resonance omega2(p) meets the critical frequency Omega(p)."""

    def gap(p):
        w2 = find_resonance(q, p, "odd", x0=x0, h=h, extrapolate=True)
        return w2 - critical_frequency(q, p)

    a, b = p_bracket
    ga, gb = gap(a), gap(b)
    if ga * gb > 0:
        raise SearchError("omega2 - Omega has no sign change", p_bracket)
    return float(optimize.brentq(gap, a, b, xtol=xtol))

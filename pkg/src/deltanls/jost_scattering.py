"""Jost solutions, Wronskians and scattering matrices of the conjugated operator.

The generalized eigenvalue problem ``calH f = (xi^2/2 + omega) f`` is rewritten as
the second-order system

    f'' = P(x) f,   P = [[-xi^2 + 2 V1, 2 V2], [2 V2, mu^2 + 2 V1]],

with ``V1 = sigma (p+2)/2 Q^p``, ``V2 = sigma p/2 Q^p``, ``mu = sqrt(xi^2 + 4 omega)``
and the derivative jump ``f'(0+) - f'(0-) = 2 q f(0)`` on both components.
The Wronskian ``W[f, g] = f'^T g - f^T g'`` is constant in x for any pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from . import _kernels
from .errors import ParameterError, SearchError
from .soliton_family import SolitonParams, soliton_profile

__all__ = [
    "JostSolution",
    "JostSystem",
    "ScatteringData",
    "VolterraResult",
    "potential_entries",
    "effective_cutoff",
    "wronskian",
    "solve_jost_backward",
    "solve_f3_volterra",
    "scattering_data",
    "det_d_threshold",
    "threshold_indicator",
    "threshold_root",
    "embedded_eigenvalue_scan",
    "free_delta_detD",
    "free_delta_reflection",
]

XI_ZERO = 1e-6
LABELS = ("f1", "f2", "f3", "f4tilde")


def potential_entries(params: SolitonParams, x, free: bool = False):
    """(V1, V2) at x; ``free`` switches the soliton potential off (defect only)."""
    x = np.asarray(x, dtype=float)
    if free:
        z = np.zeros_like(x)
        return z, z
    Qp = params.sigma * soliton_profile(params, x) ** params.p
    return 0.5 * (params.p + 2) * Qp, 0.5 * params.p * Qp


def effective_cutoff(params: SolitonParams, x_max: float = 40.0, free: bool = False, tol: float = 1e-17) -> float:
    """Point beyond which Q^p < tol, capped at x_max; the free solutions are exact past it."""
    if free:
        return min(x_max, 1.0)
    Qp0 = soliton_profile(params, 0.0) ** params.p
    rate = 2.0 * params.kappa
    x = math.log(max(Qp0, 1.0) / tol) / rate
    return float(min(x_max, max(x, 1.0)))


def wronskian(a, b):
    """W[f, g] for state vectors [f1, f2, f1', f2'] (last axis)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 2] * b[..., 0] + a[..., 3] * b[..., 1] - a[..., 0] * b[..., 2] - a[..., 1] * b[..., 3]


@dataclass
class JostSolution:
    """One solution on sample points; true state = ``state * exp(log_scale)``."""

    label: str
    xi: float
    mu: float
    x: np.ndarray
    state: np.ndarray  # (n, 4) complex: f1, f2, f1', f2'
    log_scale: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.state[:, :2] * np.exp(self.log_scale)[:, None]

    @property
    def derivatives(self) -> np.ndarray:
        return self.state[:, 2:] * np.exp(self.log_scale)[:, None]

    def at(self, x0: float, side: int = 1) -> np.ndarray:
        """True state at a recorded point; at x=0 ``side`` picks 0+ (1) or 0- (-1)."""
        idx = np.flatnonzero(np.isclose(self.x, x0, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise ParameterError(f"x={x0} not among recorded points")
        k = idx[0] if (side > 0 or idx.size == 1) else idx[-1]
        return self.state[k] * math.exp(self.log_scale[k])


@dataclass
class JostSystem:
    """The four Jost solutions f1, f2, f3, f4tilde at one xi, on a common x-record."""

    params: SolitonParams
    xi: float
    mu: float
    free: bool
    x: np.ndarray
    states: np.ndarray  # (n, 4 components, 4 solutions), normalized columns
    log_scales: np.ndarray  # (n, 4)
    i0p: int  # record index of 0+
    i0m: int  # record index of 0-

    def solution(self, j: int) -> JostSolution:
        return JostSolution(LABELS[j], self.xi, self.mu, self.x, self.states[:, :, j].copy(),
                            self.log_scales[:, j].copy())

    def origin_state(self, j: int, side: int = 1) -> np.ndarray:
        k = self.i0p if side > 0 else self.i0m
        return self.states[k, :, j] * math.exp(self.log_scales[k, j])

    def wronskian_series(self, i: int, j: int) -> np.ndarray:
        w = wronskian(self.states[:, :, i], self.states[:, :, j])
        return w * np.exp(self.log_scales[:, i] + self.log_scales[:, j])


def _rhs_factory(params, xi, mu, free):
    xi2 = xi * xi
    mu2 = mu * mu

    def rhs(x, y):
        Y = y.reshape(4, 4)
        V1, V2 = potential_entries(params, x, free)
        P = np.array([[-xi2 + 2 * V1, 2 * V2], [2 * V2, mu2 + 2 * V1]])
        return np.concatenate([Y[2:], P @ Y[:2]]).ravel()

    return rhs


def _replay(state, logs, ops):
    """Apply recorded column operations (in order) to one record."""
    state = state.copy()
    logs = logs.copy()
    for kind, j, i, coef, delta in ops:
        if kind == "sub":
            expo = delta + logs[i] - logs[j]
            if expo > -700:
                state[:, j] -= coef * math.exp(expo) * state[:, i]
        else:  # rescale
            n = np.linalg.norm(state[:, j])
            if n > 0:
                state[:, j] /= n
                logs[j] += math.log(n)
    return state, logs


def solve_jost_backward(params: SolitonParams, xi: float, x_max: float = 40.0, free: bool = False,
                        x_left: float | None = None, rtol: float = 1e-12, atol: float = 1e-14,
                        samples_per_segment: int = 2, canonical: bool = True) -> JostSystem:
    """Integrate f1, f2, f3, f4tilde from the cutoff down to 0+, jump to 0-, continue to -x_left.

    Growing-mode contamination is removed at segment ends: f3 components are
    purged from f1 and f2, and f1, f2, f3 components from f4tilde; columns are
    renormalized with their logarithmic scales tracked separately.  With
    ``canonical`` the f3 freedom in f1, f2 is fixed by f^(2)'(0+) = mu f^(2)(0+).
    """
    xi = float(xi)
    mu = math.sqrt(xi * xi + 4.0 * params.omega)
    q = params.q
    X = effective_cutoff(params, x_max, free)
    seg = min(1.0, 4.0 / mu)
    nseg = max(1, int(math.ceil(X / seg)))
    X = nseg * seg
    e = np.exp(1j * xi * X)
    Y = np.array(
        [[e, np.conj(e), 0, 0], [0, 0, 1, 1], [1j * xi * e, np.conj(1j * xi * e), 0, 0], [0, 0, -mu, mu]],
        dtype=complex,
    )
    logs = np.array([0.0, 0.0, -mu * X, mu * X])
    rhs = _rhs_factory(params, xi, mu, free)
    rec_x, rec_Y, rec_s, rec_nops = [X], [Y.copy()], [logs.copy()], [0]
    ops = []
    edges = X - seg * np.arange(nseg + 1)
    edges[-1] = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t_eval = np.linspace(a, b, samples_per_segment + 2)[1:]
        sol = solve_ivp(rhs, (a, b), Y.ravel(), method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
        if not sol.success:  # pragma: no cover
            raise RuntimeError(sol.message)
        for k in range(sol.t.size - 1):
            rec_x.append(float(sol.t[k]))
            rec_Y.append(sol.y[:, k].reshape(4, 4).copy())
            rec_s.append(logs.copy())
            rec_nops.append(len(ops))
        Y = sol.y[:, -1].reshape(4, 4).copy()
        c3 = Y[:, 2]
        for j in (0, 1):
            beta = np.vdot(c3, Y[:, j]) / np.vdot(c3, c3)
            Y[:, j] -= beta * c3
            ops.append(("sub", j, 2, beta, logs[j] - logs[2]))
        basis = Y[:, :3]
        coef = np.linalg.lstsq(basis, Y[:, 3], rcond=None)[0]
        Y[:, 3] -= basis @ coef
        for i in range(3):
            ops.append(("sub", 3, i, coef[i], logs[3] - logs[i]))
        for j in range(4):
            n = np.linalg.norm(Y[:, j])
            Y[:, j] /= n
            logs[j] += math.log(n)
            ops.append(("scale", j, j, 0.0, 0.0))
        if b > 0:
            rec_x.append(float(b))
            rec_Y.append(Y.copy())
            rec_s.append(logs.copy())
            rec_nops.append(len(ops))
    # Y at 0+
    if canonical:
        f3 = Y[:, 2] * math.exp(logs[2])
        den = f3[3] - mu * f3[1]
        for j in (0, 1):
            fj = Y[:, j] * math.exp(logs[j])
            c = (fj[3] - mu * fj[1]) / den
            Y[:, j] -= c * math.exp(logs[2] - logs[j]) * Y[:, 2]
            ops.append(("sub", j, 2, c, 0.0))
    rec_x.append(0.0)
    rec_Y.append(Y.copy())
    rec_s.append(logs.copy())
    rec_nops.append(len(ops))
    # replay later operations on earlier records so all share the final basis
    states, scales = [], []
    for xk, Yk, sk, nk in zip(rec_x, rec_Y, rec_s, rec_nops):
        st, sc = _replay(Yk, sk, ops[nk:])
        states.append(st)
        scales.append(sc)
    i0p = len(states) - 1
    # jump across the origin then continue to the left
    Yl = Y.copy()
    Yl[2:, :] -= 2.0 * q * Yl[:2, :]
    states.append(Yl.copy())
    scales.append(logs.copy())
    rec_x.append(0.0)
    i0m = len(states) - 1
    if x_left is None:
        x_left = min(1.0, 3.0 / mu)
    if x_left > 0:
        t_eval = np.linspace(0.0, -x_left, 4)[1:]
        sol = solve_ivp(rhs, (0.0, -x_left), Yl.ravel(), method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
        for k in range(sol.t.size):
            states.append(sol.y[:, k].reshape(4, 4).copy())
            scales.append(logs.copy())
            rec_x.append(float(sol.t[k]))
    return JostSystem(params, xi, mu, free, np.array(rec_x), np.array(states), np.array(scales), i0p, i0m)


# ---------------------------------------------------------------- Volterra oracle for f3

@dataclass
class VolterraResult:
    x: np.ndarray
    y: np.ndarray  # (n, 2) real: exp(mu x) f3
    dy: np.ndarray  # derivative of y
    mu: float
    iterations: int
    h: float
    refinements: int

    def solution(self, xi: float) -> JostSolution:
        scale = -self.mu * self.x
        state = np.column_stack([self.y, self.dy - self.mu * self.y]).astype(complex)
        return JostSolution("f3", xi, self.mu, self.x, state, scale)


def _volterra_kernels(xi, mu, z):
    e = np.exp(-mu * z)
    if xi == 0.0:
        s = z
        c = np.ones_like(z)
    else:
        s = np.sin(xi * z) / xi
        c = np.cos(xi * z)
    k1 = e * s
    k2 = -np.expm1(-2.0 * mu * z) / (2.0 * mu)
    dk1 = e * (c - mu * s)
    dk2 = np.exp(-2.0 * mu * z)
    return k1, k2, dk1, dk2


def solve_f3_volterra(params: SolitonParams, xi: float, x_max: float = 40.0, h: float = 0.0025,
                      free: bool = False, tol: float = 1e-12, max_iter: int = 500,
                      max_refinements: int = 4, backend: str | None = None) -> VolterraResult:
    """Fixed point for y = exp(mu x) f3 on [0, cutoff]:

        y(x) = e2 + 2 int_x^inf K(y - x) S(y) y(y) dy,
        K(z) = diag(exp(-mu z) sin(xi z)/xi, (1 - exp(-2 mu z)) / (2 mu)),
        S = [[V1, V2], [V2, V1]].

    Iterates until the sup-distance of successive iterates is below ``tol``;
    three successive increases of that distance trigger a restart with half
    the quadrature step.
    """
    xi = float(xi)
    mu = math.sqrt(xi * xi + 4.0 * params.omega)
    X = effective_cutoff(params, x_max, free)
    for refinement in range(max_refinements + 1):
        n = int(math.ceil(X / h))
        x = h * np.arange(n + 1)
        V1, V2 = potential_entries(params, x, free)
        k1, k2, dk1, dk2 = _volterra_kernels(xi, mu, x)
        y = np.zeros((n + 1, 2))
        y[:, 1] = 1.0
        prev = np.inf
        rises = 0
        it = 0
        converged = False
        for it in range(1, max_iter + 1):
            F0 = 2.0 * (V1 * y[:, 0] + V2 * y[:, 1])
            F1 = 2.0 * (V2 * y[:, 0] + V1 * y[:, 1])
            a0, a1 = _kernels.volterra_apply(k1, k2, F0, F1, h, backend)
            new = np.column_stack([a0, 1.0 + a1])
            dist = float(np.max(np.abs(new - y)))
            y = new
            if dist < tol:
                converged = True
                break
            rises = rises + 1 if dist > prev else 0
            prev = dist
            if rises >= 3:
                break
        if converged:
            F0 = 2.0 * (V1 * y[:, 0] + V2 * y[:, 1])
            F1 = 2.0 * (V2 * y[:, 0] + V1 * y[:, 1])
            d0, d1 = _kernels.volterra_apply(dk1, dk2, F0, F1, h, backend)
            dy = -np.column_stack([d0, d1])
            return VolterraResult(x, y, dy, mu, it, h, refinement)
        h *= 0.5
    raise SearchError("Volterra iteration failed to contract", (0.0, X))


# ---------------------------------------------------------------- scattering data

@dataclass
class ScatteringData:
    xi: float
    mu: float
    D: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Ttilde: complex
    Rtilde: complex
    wronskians: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def detD(self) -> complex:
        return complex(np.linalg.det(self.D))


def _reflect(state, q):
    """State of g(x) = f(-x) at 0+ from the state of f at 0+."""
    f = state[:2]
    dm = state[2:] - 2.0 * q * f
    return np.concatenate([f, -dm])


def _single_xi(params, xi, x_max, free):
    js = solve_jost_backward(params, xi, x_max=x_max, free=free)
    q = params.q
    mu = js.mu
    f = [js.origin_state(j) for j in range(4)]
    g = [_reflect(s, q) for s in f]
    D = np.array([[wronskian(f[0], g[0]), wronskian(f[0], g[2])],
                  [wronskian(f[2], g[0]), wronskian(f[2], g[2])]])
    w = {
        "W12": complex(wronskian(f[0], f[1])),
        "W13": complex(wronskian(f[0], f[2])),
        "W23": complex(wronskian(f[1], f[2])),
        "W34t": complex(wronskian(f[2], f[3])),
    }
    c1 = -wronskian(f[1], f[3]) / (2j * xi)
    c2 = wronskian(f[0], f[3]) / (2j * xi)
    f4 = f[3] - c1 * f[0] - c2 * f[1]
    g4 = _reflect(f4, q)
    w["W34"] = complex(wronskian(f[2], f4))
    w["W14"] = complex(wronskian(f[0], f4))
    w["W24"] = complex(wronskian(f[1], f4))
    # F1 = G1 A + G2 B with F1=[f1 f3], G1=[g2 g4], G2=[g1 g3]
    M = np.column_stack([g[1], g4, g[0], g[2]])
    rhs = np.column_stack([f[0], f[2]])
    AB = np.linalg.solve(M, rhs)
    A, B = AB[:2], AB[2:]
    return js, D, A, B, w


def scattering_data(params: SolitonParams, xi: float, x_max: float = 40.0, free: bool = False) -> ScatteringData:
    """D, A, B, transmission/reflection and Wronskian record at xi (xi=0 via +-1e-6 averaging)."""
    xi = float(xi)
    if xi == 0.0:
        parts = [scattering_data(params, s * XI_ZERO, x_max, free) for s in (1.0, -1.0)]
        D = 0.5 * (parts[0].D + parts[1].D)
        T = 0.5 * (parts[0].Ttilde + parts[1].Ttilde)
        R = 0.5 * (parts[0].Rtilde + parts[1].Rtilde)
        nan = np.full((2, 2), np.nan + 0j)
        sd = ScatteringData(0.0, parts[0].mu, D, nan, nan, T, R, parts[0].wronskians, [])
        if abs(np.linalg.det(D)) < 1e-12:
            sd.flags.append("threshold-singular")
        return sd
    js, D, A, B, w = _single_xi(params, xi, x_max, free)
    Dinv = np.linalg.inv(D)
    T = complex(2j * xi * Dinv[0, 0])
    R = complex(2j * xi * (B @ Dinv)[0, 0])
    sd = ScatteringData(xi, js.mu, D, A, B, T, R, w, [])
    if abs(np.linalg.det(D)) < 1e-12:
        sd.flags.append("threshold-singular")
    return sd


def det_d_threshold(params: SolitonParams, x_max: float = 40.0, free: bool = False) -> float:
    """Real form of det D(0) (D(0) is real up to rounding)."""
    return float(scattering_data(params, 0.0, x_max, free).detD.real)


def threshold_indicator(params: SolitonParams, x_max: float = 40.0, free: bool = False) -> float:
    """|det D(0)|, sampled by continuity at xi = +-1e-6."""
    return abs(scattering_data(params, 0.0, x_max, free).detD)


def threshold_root(q: float, p: float, bracket, sigma: int = -1, n_scan: int = 12, xtol: float = 1e-8) -> float:
    """Root in omega of the real det D(0); scans the bracket for a sign change, then brentq."""
    lo, hi = bracket
    ws = np.linspace(lo, hi, n_scan)
    vals = [det_d_threshold(SolitonParams(q, sigma, p, float(w))) for w in ws]
    for a, b, fa, fb in zip(ws[:-1], ws[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            return float(a)
        if fa * fb < 0:
            return float(optimize.brentq(lambda w: det_d_threshold(SolitonParams(q, sigma, p, w)),
                                         a, b, xtol=xtol))
    # fall back to the location of the smallest |det D(0)|
    k = int(np.argmin(np.abs(vals)))
    if 0 < k < n_scan - 1:
        res = optimize.minimize_scalar(
            lambda w: abs(det_d_threshold(SolitonParams(q, sigma, p, w))),
            bounds=(ws[k - 1], ws[k + 1]), method="bounded", options={"xatol": xtol})
        return float(res.x)
    raise SearchError("no zero of det D(0) in bracket", (lo, hi))


def embedded_eigenvalue_scan(params: SolitonParams, xi_grid, x_max: float = 40.0, free: bool = False) -> dict:
    """min |det D(xi)| over the grid, its location, and the ratio to the scale 4 xi mu."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    vals = np.array([abs(scattering_data(params, xi, x_max, free).detD) for xi in xi_grid])
    mu = np.sqrt(xi_grid**2 + 4 * params.omega)
    ratio = vals / (4 * np.abs(xi_grid) * mu)
    k = int(np.argmin(vals))
    return {
        "xi": xi_grid,
        "abs_detD": vals,
        "ratio": ratio,
        "min_abs_detD": float(vals[k]),
        "argmin": float(xi_grid[k]),
        "min_ratio": float(np.min(ratio)),
    }


def free_delta_detD(q: float, omega: float, xi):
    """det D for the defect alone: -4 (i xi - q)(mu + q)."""
    xi = np.asarray(xi, dtype=float)
    mu = np.sqrt(xi**2 + 4 * omega)
    return -4.0 * (1j * xi - q) * (mu + q)


def free_delta_reflection(q: float, xi):
    """Reflection coefficient of the scalar defect operator: q / (i xi - q)."""
    xi = np.asarray(xi, dtype=float)
    return q / (1j * xi - q)

"""Time evolution of dz/dt = L z on the continuous subspace and decay-rate fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.sparse.linalg import splu

from .discrete_operators import (
    LinearizedOperator,
    TwoComponentField,
    build_hamiltonian,
    build_linearized,
    project_continuous,
)
from .errors import FitError, ParameterError, SpectralConditionError
from .soliton_family import Grid, SolitonParams

__all__ = [
    "DecaySeries",
    "field_norms",
    "gaussian_bump",
    "propagate",
    "propagate_free",
    "decay_series",
    "fit_decay",
    "reflection_time",
    "max_group_speed",
    "check_spectral_condition",
]


@dataclass
class DecaySeries:
    times: np.ndarray
    norms: dict = field(default_factory=dict)
    alpha: float = 1.0
    r: float = 12.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ParameterError("times must be strictly increasing")


def field_norms(z, grid: Grid, alpha: float = 1.0, r: float = 12.0) -> dict:
    """L-inf, L2, <x>^-alpha weighted L2, <x>^-1 weighted L-inf and L^r of a complex field."""
    a = np.abs(np.asarray(z))
    x = grid.x
    jx = np.sqrt(1.0 + x * x)
    h = grid.h
    return {
        "linf": float(a.max()),
        "l2": float(np.sqrt(h * np.sum(a * a))),
        "l2w": float(np.sqrt(h * np.sum((a / jx**alpha) ** 2))),
        "linfw": float(np.max(a / jx)),
        "lr": float((h * np.sum(a**r)) ** (1.0 / r)),
    }


def gaussian_bump(grid: Grid, center: float = 0.0, width: float = 1.0, phase=0.0, odd: bool = False):
    """Complex Gaussian exp(-(x-c)^2/(2 w^2)) e^{i phase}; ``odd`` multiplies by x/w."""
    x = grid.x
    g = np.exp(-((x - center) ** 2) / (2.0 * width**2)) * np.exp(1j * phase)
    if odd:
        g = g * (x - center) / width
    return g


def check_spectral_condition(params: SolitonParams, tol: float = 1e-3) -> float:
    """Return |det D(0)|; raise when it is below ``tol`` (threshold resonance or eigenvalue)."""
    from .jost_scattering import threshold_indicator

    val = threshold_indicator(params)
    if val < tol:
        raise SpectralConditionError(
            f"|det D(0)| = {val:.3e} below {tol:.1e} at omega={params.omega}: threshold resonance present"
        )
    return val


def _midpoint_factor(L: sp.spmatrix, dt: float):
    n = L.shape[0]
    eye = sp.identity(n, format="csc")
    lhs = splu((eye - 0.5 * dt * L).tocsc())
    rhs = (eye + 0.5 * dt * L).tocsr()
    return lhs, rhs


def propagate(lin: LinearizedOperator, v0, t_grid, dt: float = 0.01, reproject_every: int = 100,
              project_initial: bool = True, check: bool = True, spectral_tol: float = 1e-3):
    """Implicit-midpoint evolution of dz/dt = L z, sampled at ``t_grid`` (t_grid[0] = 0).

    Returns a list of TwoComponentField.  ``dt`` may be negative for backward runs.
    """
    if check:
        check_spectral_condition(lin.params, spectral_tol)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] != 0.0:
        raise ParameterError("t_grid must start at 0")
    v = v0.to_complex() if isinstance(v0, TwoComponentField) else np.asarray(v0, dtype=complex)
    if project_initial:
        v = project_continuous(v, lin)
    z = np.concatenate([v.real, v.imag])
    lhs, rhs = _midpoint_factor(lin.L, dt)
    n = lin.grid.n
    out = [TwoComponentField(z[:n].copy(), z[n:].copy())]
    step = 0
    t = 0.0
    for target in t_grid[1:]:
        nsteps = int(round((target - t) / dt))
        for _ in range(nsteps):
            z = lhs.solve(rhs @ z)
            step += 1
            if reproject_every and step % reproject_every == 0:
                zc = project_continuous(z[:n] + 1j * z[n:], lin)
                z = np.concatenate([zc.real, zc.imag])
        t += nsteps * dt
        out.append(TwoComponentField(z[:n].copy(), z[n:].copy()))
    return out


def propagate_free(grid: Grid, q: float, u0, t_grid, dt: float = 0.01):
    """Crank-Nicolson for i u_t = H u (the defect alone, no soliton)."""
    H = build_hamiltonian(grid, q).matrix
    eye = sp.identity(grid.n, format="csc")
    lhs = splu((eye + 0.5j * dt * H).tocsc())
    rhs = (eye - 0.5j * dt * H).tocsr()
    u = np.asarray(u0, dtype=complex).copy()
    out = [u.copy()]
    t = 0.0
    for target in np.asarray(t_grid, dtype=float)[1:]:
        for _ in range(int(round((target - t) / dt))):
            u = lhs.solve(rhs @ u)
        t = target
        out.append(u.copy())
    return out


def decay_series(params: SolitonParams, grid: Grid, v0, t_grid, dt: float = 0.01, alpha: float = 1.0,
                 r: float = 12.0, family: str = "discrete", check: bool = True) -> DecaySeries:
    """Run ``propagate`` and collect the norms of each sample."""
    lin = build_linearized(grid, params, family)
    fields = propagate(lin, v0, t_grid, dt=dt, check=check)
    norms = {k: [] for k in ("linf", "l2", "l2w", "linfw", "lr")}
    for f in fields:
        for k, val in field_norms(f.to_complex(), grid, alpha, r).items():
            norms[k].append(val)
    return DecaySeries(np.asarray(t_grid, dtype=float), {k: np.array(v) for k, v in norms.items()}, alpha, r)


def max_group_speed(grid: Grid, dt: float) -> float:
    """Largest group velocity of the Crank-Nicolson / three-point scheme.

    A mode e^{ikx} has lambda(k) = (1 - cos kh)/h^2 and discrete frequency
    (2/dt) arctan(dt lambda/2), so its speed is lambda'(k) / (1 + (dt lambda/2)^2).
    """
    h = grid.h
    k = np.linspace(0.0, np.pi / h, 20001)
    lam = (1.0 - np.cos(k * h)) / h**2
    vg = (np.sin(k * h) / h) / (1.0 + (0.5 * dt * lam) ** 2)
    return float(vg.max())


def reflection_time(grid: Grid, speed: float) -> float:
    """Round-trip time origin -> box edge -> origin for a front moving at ``speed``."""
    return 2.0 * grid.X / speed


def fit_decay(series: DecaySeries, norm_key: str, t_window, min_samples: int = 10):
    """Least-squares slope of log(norm) vs log(t) in the window, with 95% half-width."""
    a, b = t_window
    t = series.times
    m = (t >= a) & (t <= b) & (t > 0)
    if int(m.sum()) < min_samples:
        raise FitError(f"only {int(m.sum())} samples in window {t_window}; need {min_samples}")
    y = np.asarray(series.norms[norm_key])[m]
    if np.any(y <= 0):
        raise FitError("non-positive norm values in window")
    res = stats.linregress(np.log(t[m]), np.log(y))
    k = int(m.sum())
    half = float(stats.t.ppf(0.975, k - 2) * res.stderr)
    return float(res.slope), half

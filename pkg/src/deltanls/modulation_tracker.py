"""Decomposition u = e^{i Phi}(Q_omega + v) along a trajectory and checks of the modulation ODE.

Phi(t) = theta(t) + int_0^t omega(s) ds.  The perturbation v is fixed by the two
orthogonality conditions Re<v, Q_omega> = 0 and Re<v, i dQ_omega> = 0, where
<f, g> = h sum conj(f) g is the grid inner product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .discrete_operators import inner, soliton_arrays
from .errors import DecompositionError, NumericalError, ParameterError
from .linearized_propagator import DecaySeries, field_norms, fit_decay, max_group_speed, reflection_time
from .soliton_family import Grid, SolitonParams

__all__ = [
    "ModulationState",
    "ModulationSeries",
    "DecayReport",
    "decompose",
    "track",
    "nonlinear_remainder",
    "modulation_system",
    "ode_residual",
    "series_residuals",
    "decay_report",
]


@dataclass
class ModulationState:
    t: float
    Phi: float
    omega: float
    v: np.ndarray
    orthogonality: tuple[float, float]
    newton_iterations: int
    residual: float = 0.0

    @property
    def theta(self) -> float:
        """Phase relative to the base solution at t = 0; equals Phi for a single snapshot."""
        return self.Phi


@dataclass
class ModulationSeries:
    times: np.ndarray
    omega: np.ndarray
    Phi: np.ndarray
    theta: np.ndarray
    v: np.ndarray  # (n_samples, n)
    orthogonality: np.ndarray  # (n_samples, 2), normalized by |Q| |v|
    grid: Grid
    base: SolitonParams
    family: str = "discrete"
    reseeded: list = field(default_factory=list)
    failure_index: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def omega_dot(self) -> np.ndarray:
        return _centered(self.omega, self.times)

    def theta_dot(self) -> np.ndarray:
        """dPhi/dt - omega, which avoids differentiating the quadrature of omega."""
        return _centered(self.Phi, self.times) - self.omega

    def table(self, alpha: float = 1.2, r: float = 12.0, skip: int = 1) -> dict:
        """Columns t, theta, omega, thetadot, omegadot, v_h1, v_lr, v_l2w, ode_residual."""
        res, _ = series_residuals(self, skip)
        cols = {"t": self.times, "theta": self.theta, "omega": self.omega,
                "thetadot": self.theta_dot(), "omegadot": self.omega_dot()}
        nrm = [field_norms(v, self.grid, alpha, r) for v in self.v]
        cols["v_h1"] = np.array([_h1(v, self.grid) for v in self.v])
        cols["v_lr"] = np.array([n["lr"] for n in nrm])
        cols["v_l2w"] = np.array([n["l2w"] for n in nrm])
        cols["ode_residual"] = res
        return cols


def _centered(y, t):
    d = np.full_like(y, np.nan, dtype=float)
    d[1:-1] = (y[2:] - y[:-2]) / (t[2:] - t[:-2])
    return d


def _profile(grid: Grid, base: SolitonParams, omega: float, family: str):
    return soliton_arrays(grid, base.with_omega(omega), family)


def _conditions(w, prof, h):
    r = w - prof.Q
    return np.array([inner(r, prof.Q, h).real, inner(r, 1j * prof.dQ, h).real])


def decompose(u, grid: Grid, base: SolitonParams, guess=None, family: str = "discrete",
              tol: float = 1e-12, max_iter: int = 50, t: float = 0.0) -> ModulationState:
    """Newton iteration on (Phi, omega) for the two orthogonality conditions.

    ``guess`` = (Phi, omega); defaults to the phase of <Q, u> and the base frequency.
    Converged when |F| < tol |Q|^2 and the Newton step is at round-off level.
    """
    u = np.asarray(u, dtype=complex)
    h = grid.h
    if guess is None:
        Q0 = _profile(grid, base, base.omega, family).Q
        guess = (float(np.angle(inner(Q0, u, h))), base.omega)
    phi, om = float(guess[0]), float(guess[1])
    F = np.array([np.inf, np.inf])
    nq2 = None
    for it in range(1, max_iter + 1):
        try:
            prof = _profile(grid, base, om, family)
        except (ParameterError, NumericalError) as exc:
            raise DecompositionError(f"omega left the admissible range: {exc}", float(np.abs(F).max()), -1) from exc
        nq2 = inner(prof.Q, prof.Q, h).real
        w = np.exp(-1j * phi) * u
        F = _conditions(w, prof, h)
        J = np.array([
            [-inner(w, prof.Q, h).imag, inner(w - prof.Q, prof.dQ, h).real - inner(prof.dQ, prof.Q, h).real],
            [-inner(w, prof.dQ, h).real, -inner(w, prof.d2Q, h).imag],
        ])
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise DecompositionError("singular decomposition Jacobian", float(np.abs(F).max()), -1) from exc
        if np.abs(F).max() < tol * nq2 and np.abs(step).max() < 1e-12 * max(1.0, abs(om)):
            break
        phi += step[0]
        om += step[1]
    else:
        raise DecompositionError(f"Newton did not converge in {max_iter} steps; |F| = {np.abs(F).max():.3e}",
                                 float(np.abs(F).max()), -1)
    phi += step[0]
    om += step[1]
    prof = _profile(grid, base, om, family)
    w = np.exp(-1j * phi) * u
    v = w - prof.Q
    F = _conditions(w, prof, h)
    norm = np.sqrt(nq2) * max(np.sqrt(inner(v, v, h).real), 1e-300)
    return ModulationState(t, phi, om, v, (float(abs(F[0]) / norm), float(abs(F[1]) / norm)), it,
                           float(np.abs(F).max()))


def track(traj, base: SolitonParams | None = None, family: str | None = None, tol: float = 1e-12) -> ModulationSeries:
    """Decompose every sample of a trajectory, continuing (Phi, omega) from the previous sample.

    A failed continuation is retried from the default guess (flagged in ``reseeded``);
    a second failure truncates the series and records ``failure_index``.
    """
    cfg = traj.config
    if base is None:
        if cfg is None:
            raise ParameterError("base soliton parameters are required")
        base = cfg.params
    family = family or (cfg.family if cfg is not None else "discrete")
    grid = traj.grid
    states = []
    reseeded = []
    failure = None
    guess = (0.0, base.omega)
    prev_t = float(traj.times[0])
    for k, (t, u) in enumerate(zip(traj.times, traj.states)):
        guess = (guess[0] + guess[1] * (t - prev_t), guess[1])
        try:
            st = decompose(u, grid, base, guess, family, tol, t=float(t))
        except DecompositionError:
            try:
                st = decompose(u, grid, base, None, family, tol, t=float(t))
            except DecompositionError:
                failure = k
                break
            if states:
                # keep Phi continuous across the re-seed
                st.Phi += 2 * np.pi * np.round((guess[0] - st.Phi) / (2 * np.pi))
            reseeded.append(k)
        states.append(st)
        guess = (st.Phi, st.omega)
        prev_t = t
    if not states:
        raise DecompositionError("decomposition failed at the first sample", np.inf, 0)
    times = np.asarray(traj.times[: len(states)], dtype=float)
    omega = np.array([s.omega for s in states])
    Phi = np.array([s.Phi for s in states])
    theta = Phi - integrate.cumulative_trapezoid(omega, times, initial=0.0)
    diag = {"dt": cfg.dt} if cfg is not None else {}
    return ModulationSeries(times, omega, Phi, theta, np.array([s.v for s in states]),
                            np.array([s.orthogonality for s in states]), grid, base, family,
                            reseeded, failure, diag)


def nonlinear_remainder(v, Q, sigma: float, p: float):
    """N = f(Q + v) - f(Q) - sigma (p+2)/2 Q^p v - sigma p/2 Q^p conj(v), f(u) = sigma |u|^p u."""
    u = Q + v
    Qp = Q**p
    return sigma * (np.abs(u) ** p * u - Qp * Q - 0.5 * (p + 2) * Qp * v - 0.5 * p * Qp * np.conj(v))


def modulation_system(v, prof, grid: Grid, params: SolitonParams):
    """Matrix A and right side b with A [omega_dot, theta_dot] = b."""
    h = grid.h
    Q, dQ, d2Q = prof.Q, prof.dQ, prof.d2Q
    qdq = inner(Q, dQ, h).real
    vdq = inner(v, dQ, h).real
    A = np.array([
        [qdq - vdq, inner(v, Q, h).imag],
        [inner(v, d2Q, h).imag, qdq + vdq],
    ])
    N = nonlinear_remainder(v, Q, params.sigma, params.p)
    b = np.array([-inner(N, Q, h).imag, -inner(N, dQ, h).real])
    return A, b


def ode_residual(state: ModulationState, thetadot: float, omegadot: float, grid: Grid,
                 base: SolitonParams, family: str = "discrete"):
    """(|A x - b| / (|Q|^2 (|omega_dot| + |theta_dot|) + 1e-300), |b|) with x = (omega_dot, theta_dot)."""
    params = base.with_omega(state.omega)
    prof = soliton_arrays(grid, params, family)
    A, b = modulation_system(state.v, prof, grid, params)
    x = np.array([omegadot, thetadot])
    nq2 = inner(prof.Q, prof.Q, grid.h).real
    return float(np.linalg.norm(A @ x - b) / (nq2 * (abs(x[0]) + abs(x[1])) + 1e-300)), float(np.linalg.norm(b))


def series_residuals(series: ModulationSeries, skip: int = 1):
    """Normalized ODE residual and |RHS| at interior samples (NaN elsewhere)."""
    wd = series.omega_dot()
    td = series.theta_dot()
    res = np.full(series.times.size, np.nan)
    rhs = np.full(series.times.size, np.nan)
    for k in range(1, series.times.size - 1, skip):
        st = ModulationState(series.times[k], series.Phi[k], series.omega[k], series.v[k], (0.0, 0.0), 0)
        res[k], rhs[k] = ode_residual(st, td[k], wd[k], series.grid, series.base, series.family)
    return res, rhs


@dataclass
class DecayReport:
    lr_slope: float
    lr_halfwidth: float
    lr_expected: float
    weighted_slope: float
    weighted_halfwidth: float
    weighted_expected: float
    sup_h1_ratio: float
    window: tuple
    passed: bool


def _h1(v, grid: Grid) -> float:
    h = grid.h
    return float(np.sqrt(h * np.sum(np.abs(v) ** 2) + np.sum(np.abs(np.diff(v)) ** 2) / h))


def decay_report(series: ModulationSeries, eta: float, alpha: float = 1.2, r: float = 12.0,
                 window=None, min_samples: int = 20, lr_tol: float = 0.15, w_tol: float = 0.3) -> DecayReport:
    """Log-log fits of |v|_{L^r} and |<x>^{-alpha} v|_{L^2} over ``window``.

    The default window is [5, t_reflect], t_reflect being the round trip of the
    fastest mode of the time stepper (``dt`` from the series diagnostics, else 0.01).
    """
    g = series.grid
    if window is None:
        dt = series.diagnostics.get("dt", 0.01)
        window = (5.0, float(min(series.times[-1], reflection_time(g, max_group_speed(g, dt)))))
    norms = {"lr": [], "l2w": []}
    for v in series.v:
        nv = field_norms(v, g, alpha, r)
        norms["lr"].append(nv["lr"])
        norms["l2w"].append(nv["l2w"])
    ds = DecaySeries(series.times, {k: np.array(val) for k, val in norms.items()}, alpha, r)
    s1, w1 = fit_decay(ds, "lr", window, min_samples)
    s2, w2 = fit_decay(ds, "l2w", window, min_samples)
    e1 = -(0.5 - 1.0 / r)
    e2 = -alpha
    sup = max(_h1(v, g) for v in series.v) / eta if eta > 0 else float("inf")
    ok = abs(s1 - e1) <= lr_tol and abs(s2 - e2) <= w_tol
    return DecayReport(s1, w1, e1, s2, w2, e2, float(sup), tuple(window), bool(ok))

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltanls.discrete_operators import build_linearized, ground_state, project_continuous
from deltanls.errors import FitError, ParameterError, SpectralConditionError
from deltanls.linearized_propagator import (
    DecaySeries,
    check_spectral_condition,
    field_norms,
    fit_decay,
    gaussian_bump,
    max_group_speed,
    propagate,
    propagate_free,
    reflection_time,
)
from deltanls.soliton_family import Grid, SolitonParams

P = SolitonParams(-1.0, -1, 5.0, 1.0)
GRID = Grid.from_halfwidth(0.05, 30.0)
LIN = build_linearized(GRID, P, "discrete")


def test_propagation_commutes_with_projection():
    v = gaussian_bump(GRID, 0.5, 1.0, phase=0.4)
    ts = np.array([0.0, 10.0])
    raw = propagate(LIN, v, ts, project_initial=False, reproject_every=0, check=False)[-1].to_complex()
    proj = propagate(LIN, project_continuous(v, LIN), ts, project_initial=False, reproject_every=0,
                     check=False)[-1].to_complex()
    diff = np.abs(project_continuous(raw, LIN) - proj).max()
    assert diff < 1e-6 * np.abs(proj).max()


def test_midpoint_time_reversible():
    v0 = project_continuous(gaussian_bump(GRID, -0.3, 0.8), LIN)
    fwd = propagate(LIN, v0, [0.0, 5.0], dt=0.01, check=False)[-1]
    back = propagate(LIN, fwd, [0.0, -5.0], dt=-0.01, project_initial=False, check=False)[-1]
    assert np.abs(back.to_complex() - v0).max() < 1e-8


def test_kernel_direction_does_not_decay():
    # i Q is a kernel vector: without projection it stays put
    v0 = 1j * LIN.Q
    out = propagate(LIN, v0, [0.0, 5.0], project_initial=False, reproject_every=0, check=False)[-1]
    assert np.abs(out.to_complex() - v0).max() < 1e-10


def test_propagate_requires_zero_start():
    with pytest.raises(ParameterError):
        propagate(LIN, np.zeros(GRID.n), [1.0, 2.0], check=False)


def test_spectral_condition_guard():
    assert check_spectral_condition(P) > 1e-3
    with pytest.raises(SpectralConditionError):
        check_spectral_condition(P.with_omega(1.4916769), tol=1e-2)


def test_free_evolution_of_bound_state():
    g = Grid.from_halfwidth(0.02, 30.0)
    lam, phi = ground_state(g, -1.0)
    out = propagate_free(g, -1.0, phi, [0.0, 2.0], dt=0.01)[-1]
    # Crank-Nicolson phase for the exact grid eigenvalue
    z = (1 - 0.5j * 0.01 * lam) / (1 + 0.5j * 0.01 * lam)
    assert np.abs(out - z**200 * phi).max() < 1e-10
    assert abs(np.linalg.norm(out) - np.linalg.norm(phi)) < 1e-10


@given(st.floats(min_value=-2.0, max_value=-0.2), st.floats(min_value=0.5, max_value=3.0))
def test_fit_recovers_exact_power_law(slope, amp):
    t = np.linspace(1.0, 50.0, 60)
    s = DecaySeries(t, {"linf": amp * t**slope})
    fit, half = fit_decay(s, "linf", (2.0, 40.0))
    assert fit == pytest.approx(slope, abs=1e-10)
    assert half < 1e-8


def test_fit_needs_enough_samples():
    s = DecaySeries(np.arange(1.0, 6.0), {"linf": np.ones(5)})
    with pytest.raises(FitError):
        fit_decay(s, "linf", (1.0, 5.0))


def test_series_times_must_increase():
    with pytest.raises(ParameterError):
        DecaySeries(np.array([0.0, 2.0, 1.0]))


def test_field_norms_oracle():
    g = Grid.from_halfwidth(0.01, 30.0)
    z = np.exp(-g.x**2 / 2)
    n = field_norms(z, g, alpha=1.0, r=2.0)
    assert n["linf"] == pytest.approx(1.0)
    assert n["l2"] == pytest.approx(np.pi**0.25, rel=1e-6)
    assert n["lr"] == pytest.approx(n["l2"], rel=1e-12)
    assert n["l2w"] < n["l2"] and n["linfw"] == pytest.approx(1.0)


def test_group_speed():
    g = Grid.from_halfwidth(0.05, 200.0)
    assert max_group_speed(g, 1e-8) == pytest.approx(1 / g.h, rel=1e-6)
    v = max_group_speed(g, 0.01)
    assert v == pytest.approx(10.59, abs=0.01)
    assert max_group_speed(g, 0.005) > v
    assert reflection_time(g, v) == pytest.approx(2 * 200.0 / v)


def test_odd_bump():
    g = Grid.from_halfwidth(0.1, 5.0)
    b = gaussian_bump(g, odd=True)
    assert np.allclose(b, -b[::-1])

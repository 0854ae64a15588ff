import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from deltanls.jost_scattering import (
    effective_cutoff,
    embedded_eigenvalue_scan,
    free_delta_detD,
    free_delta_reflection,
    scattering_data,
    solve_f3_volterra,
    solve_jost_backward,
    threshold_indicator,
    wronskian,
)
from deltanls.soliton_family import SolitonParams

P = SolitonParams(-1.0, -1, 5.0, 1.0)
states = arrays(np.complex128, 4, elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))


@given(states, states)
def test_wronskian_antisymmetric(a, b):
    assert wronskian(a, b) == pytest.approx(-wronskian(b, a), abs=1e-9)
    assert abs(wronskian(a, a)) < 1e-9 * (1 + np.abs(a).max() ** 2)


@pytest.mark.parametrize("xi", [0.5, 2.0, 10.0])
def test_basic_wronskian_identities(xi):
    sd = scattering_data(P, xi)
    w = sd.wronskians
    assert abs(w["W12"] / (2j * xi) - 1) < 1e-7
    assert abs(w["W34t"] / (-2 * sd.mu) - 1) < 1e-7
    assert abs(w["W13"]) < 1e-7 * (xi + sd.mu)
    assert abs(w["W23"]) < 1e-7 * (xi + sd.mu)


def test_wronskians_constant_across_origin():
    js = solve_jost_backward(P, 2.0)
    assert js.x.min() < 0 < js.x.max()
    for i, j in ((0, 1), (0, 2), (2, 3)):
        ser = js.wronskian_series(i, j)
        assert np.abs(ser - ser[0]).max() < 1e-7 * max(1.0, abs(ser[0]))


def test_xi_symmetries_of_jost_solutions():
    a = solve_jost_backward(P, 2.0)
    b = solve_jost_backward(P, -2.0)
    f1, f1m, f2 = a.origin_state(0), b.origin_state(0), a.origin_state(1)
    assert np.allclose(f1m, np.conj(f1), atol=1e-9)
    assert np.allclose(f2, np.conj(f1), atol=1e-9)
    f3, f3m = a.origin_state(2), b.origin_state(2)
    assert np.abs(f3.imag).max() < 1e-9 * np.abs(f3).max()
    assert np.allclose(f3, f3m, rtol=1e-9)


def test_A_B_conjugate_symmetry():
    a, b = scattering_data(P, 2.0), scattering_data(P, -2.0)
    assert np.abs(b.A - np.conj(a.A)).max() < 1e-8
    assert np.abs(b.B - np.conj(a.B)).max() < 1e-8


def test_transmission_reflection_bounded():
    vals = [scattering_data(P, xi) for xi in np.linspace(0.25, 20.0, 12)]
    assert max(abs(v.Ttilde) for v in vals) < 10
    assert max(abs(v.Rtilde) for v in vals) < 10


@pytest.mark.parametrize("xi", [0.5, 2.0, 10.0])
def test_free_defect_limit(xi):
    sd = scattering_data(P, xi, free=True)
    ref = complex(free_delta_detD(P.q, P.omega, xi))
    assert abs(sd.detD - ref) < 1e-6 * abs(ref)
    R = complex(free_delta_reflection(P.q, xi))
    assert abs(sd.Rtilde - R) < 1e-8
    assert abs(sd.Ttilde - (1 + R)) < 1e-8


def test_high_frequency_normalization():
    ratios = [abs(scattering_data(P, xi).detD / (-4j * xi * np.sqrt(xi**2 + 4)) - 1) for xi in (10.0, 50.0)]
    assert ratios[1] < ratios[0] and ratios[1] < 0.1


def test_domain_doubling_stable():
    a = scattering_data(P, 2.0, x_max=40.0)
    b = scattering_data(P, 2.0, x_max=80.0)
    assert abs(a.detD - b.detD) < 1e-8 * abs(a.detD)


def test_volterra_oracle_matches_backward_integration():
    # two independent constructions of f3 at the origin
    js = solve_jost_backward(P, 2.0)
    s = js.origin_state(2)
    v = solve_f3_volterra(P, 2.0, h=0.0025)
    assert np.abs(v.y[0] - s[:2].real).max() < 1e-6
    assert np.abs(v.dy[0] - (s[2:].real + v.mu * s[:2].real)).max() < 1e-6


def test_threshold_sampling_by_continuity():
    sd = scattering_data(P, 0.0)
    assert sd.xi == 0.0
    assert threshold_indicator(P) == pytest.approx(abs(sd.detD))
    near = scattering_data(P, 1e-3)
    assert abs(near.detD - sd.detD) < 1e-2 * abs(sd.detD)


def test_no_embedded_eigenvalues_sampled():
    scan = embedded_eigenvalue_scan(P, np.linspace(0.5, 20.0, 15))
    assert scan["min_ratio"] > 0.05


def test_effective_cutoff():
    c = effective_cutoff(P, 40.0)
    assert 1.0 <= c <= 40.0
    assert effective_cutoff(P, 40.0, free=True) <= 1.0

import math

import numpy as np
import pytest

from deltanls.errors import ParameterError, SearchError
from deltanls.resonance_shooter import (
    assemble_bvp,
    default_samples,
    find_resonance,
    flatness,
    refine,
    scan,
    solve_bvp,
)

Q = -1.0
OMEGA1_H01 = 1.48732  # shooter value at h = 0.01, x0 = 50


def test_system_shape_and_residual():
    sysm = assemble_bvp(Q, 5.0, 1.3, "even", x0=5.0, h=0.05)
    n = 100
    assert sysm.matrix.shape == (4 * (n + 1), 4 * (n + 1))
    assert sysm.n_interior_rows + sysm.n_boundary_rows == 4 * (n + 1)
    sol = solve_bvp(Q, 5.0, 1.3, "even", x0=5.0, h=0.05)
    assert sol.residual < 1e-9


def test_far_field_conditions_hold():
    sol = solve_bvp(Q, 5.0, 1.3, "odd", x0=20.0, h=0.02)
    assert sol.f1[-1] == pytest.approx(1.0)
    assert sol.f1[-1] == pytest.approx(sol.g1[-1])
    assert sol.f2[-1] == pytest.approx(-sol.g2[-1])
    assert abs(sol.f1[0]) < 1e-9 and abs(sol.g2[0]) < 1e-9


def test_even_origin_condition():
    # one-sided second-order derivative at 0 approximates q u(0) on every component
    h = 0.005
    sol = solve_bvp(Q, 5.0, 1.3, "even", x0=20.0, h=h)
    for u in (sol.f1, sol.f2, sol.g1, sol.g2):
        d0 = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
        assert d0 == pytest.approx(Q * u[0], abs=0.02 * max(1.0, abs(u[0])))


def test_bad_parity_rejected():
    with pytest.raises(ParameterError):
        solve_bvp(Q, 5.0, 1.3, "both")


def test_homogeneous_far_field_gives_zero_solution():
    sol = solve_bvp(Q, 5.0, 1.487, "even", far_field="neumann")
    assert np.abs(sol.stacked()).max() == 0.0


def test_resonance_is_flat_with_constant_limit():
    # constant solutions of the system at infinity satisfy g2 = f1, g1 = -f2; with the
    # far-field rows this fixes the limit (f1, f2, g1, g2) = (1, -1, 1, 1)
    res = solve_bvp(Q, 5.0, OMEGA1_H01, "even")
    tail = res.stacked()[-500:]
    assert np.abs(tail - [1.0, -1.0, 1.0, 1.0]).max() < 1e-3
    off = solve_bvp(Q, 5.0, 1.3, "even")
    assert flatness(off) > 100 * flatness(res)


def test_default_sampling_density():
    assert default_samples(1.0, 10.0) == 200
    assert default_samples(1.0, 100.0, per_decade=50) == 100


def test_scan_finds_single_even_minimum():
    res = scan(Q, 5.0, "even", 1.2, 1.8, 61)
    assert len(res.minima) == 1
    w, _ = res.deepest()
    assert abs(w - OMEGA1_H01) < 0.01


def test_scan_threads_match_serial():
    a = scan(Q, 5.0, "even", 1.4, 1.6, 9, x0=20.0, h=0.02)
    b = scan(Q, 5.0, "even", 1.4, 1.6, 9, x0=20.0, h=0.02, threads=3)
    assert np.array_equal(a.flatness, b.flatness)


def test_scan_argument_checks():
    with pytest.raises(ParameterError):
        scan(Q, 5.0, "even", 0.4, 1.0)
    with pytest.raises(ParameterError):
        scan(Q, 5.0, "even", 0.1, 0.6, sigma=1)
    with pytest.raises(SearchError):
        scan(Q, 5.0, "even", 2.0, 3.0, 11).deepest()


def test_refine_rejects_inverted_bracket():
    with pytest.raises(ParameterError):
        refine(Q, 5.0, "even", (1.6, 1.4))


def test_refine_slides_to_escaped_minimum():
    w = refine(Q, 5.0, "even", (1.40, 1.46), x0=30.0, h=0.02, tol=1e-4)
    w_ref = refine(Q, 5.0, "even", (1.40, 1.60), x0=30.0, h=0.02, tol=1e-4)
    assert abs(w - w_ref) < 2e-4


@pytest.fixture(scope="module")
def omega1_by_h():
    hs = (0.04, 0.02, 0.01)
    return hs, [find_resonance(Q, 5.0, "even", h=h) for h in hs]


def test_refined_omega1_second_order_in_h(omega1_by_h):
    _, vals = omega1_by_h
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert math.log2(d1 / d2) > 1.8


def test_refined_omega1_halving_below_ten_h_squared(omega1_by_h):
    hs, vals = omega1_by_h
    for h, a, b in zip(hs, vals[:-1], vals[1:]):
        assert abs(b - a) < 10 * h**2, f"h={h}: change {abs(b - a):.2e} vs 10 h^2 = {10 * h**2:.2e}"


def test_x0_independence():
    a = find_resonance(Q, 5.0, "even", x0=50.0)
    b = find_resonance(Q, 5.0, "even", x0=100.0)
    assert abs(a - b) < 1e-4

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from deltanls.discrete_operators import (
    TwoComponentField,
    build_hamiltonian,
    build_linearized,
    conjugation_matrix,
    discrete_spectrum,
    ground_state,
    inner,
    project_continuous,
    soliton_arrays,
)
from deltanls.errors import ParameterError
from deltanls.soliton_family import Grid, SolitonParams, critical_frequency

P1 = SolitonParams(-1.0, -1, 5.0, 1.0)
GRID = Grid.from_halfwidth(0.05, 20.0)


def test_hamiltonian_symmetric_exactly():
    H = build_hamiltonian(GRID, -1.0).matrix
    assert (H != H.T).nnz == 0


def test_hamiltonian_free_stencil_when_q_zero():
    g = Grid(0.1, 5)
    H = build_hamiltonian(g, 0.0).toarray()
    ref = (np.diag(np.full(g.n, 2.0)) - np.diag(np.ones(g.n - 1), 1) - np.diag(np.ones(g.n - 1), -1)) / (2 * g.h**2)
    assert np.array_equal(H, ref)


def test_ground_state_matches_delta_bound_state():
    g = Grid.from_halfwidth(0.02, 40.0)
    lam, phi = ground_state(g, -1.0)
    assert abs(lam + 0.5) < 1e-2
    phi0 = np.exp(-np.abs(g.x))
    corr = np.dot(phi, phi0) / (np.linalg.norm(phi) * np.linalg.norm(phi0))
    assert corr > 0.999


def test_ground_state_converges():
    errs = [abs(ground_state(Grid.from_halfwidth(h, 30.0), -1.0)[0] + 0.5) for h in (0.08, 0.04, 0.02)]
    assert all(math.log2(a / b) >= 1.0 for a, b in zip(errs[:-1], errs[1:]))


def test_repulsive_defect_has_no_bound_state():
    lam, _ = ground_state(Grid.from_halfwidth(0.05, 30.0), 1.0)
    assert lam > -1e-3


def test_block_structure_exact():
    lin = build_linearized(GRID, P1)
    n = GRID.n
    L = lin.L.toarray()
    assert not L[:n, :n].any() and not L[n:, n:].any()
    assert np.array_equal(L[:n, n:], lin.Lminus.toarray())
    assert np.array_equal(L[n:, :n], -lin.Lplus.toarray())


def test_conjugation_identity():
    lin = build_linearized(GRID, P1)
    U = conjugation_matrix(GRID.n)
    rng = np.random.default_rng(1)
    for _ in range(3):
        f = rng.standard_normal(2 * GRID.n) + 1j * rng.standard_normal(2 * GRID.n)
        lhs = U.conj().T @ (-1j * (lin.L @ (U @ f)))
        rhs = lin.calH @ f
        assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(rhs).max()


def test_discrete_family_kernel_exact():
    lin = build_linearized(GRID, P1, "discrete")
    n = GRID.n
    z = np.zeros(n)
    r1 = lin.L @ np.concatenate([z, lin.Q])
    r2 = lin.L @ np.concatenate([lin.dQ, z]) - np.concatenate([z, lin.Q])
    assert np.abs(r1).max() < 1e-10 and np.abs(r2).max() < 1e-10


def test_closed_family_kernel_second_order_off_origin():
    res = []
    for h in (0.1, 0.05, 0.025):
        g = Grid.from_halfwidth(h, 20.0)
        lin = build_linearized(g, P1, "closed")
        r = lin.L @ np.concatenate([np.zeros(g.n), lin.Q])
        mask = np.ones(2 * g.n, bool)
        mask[[g.origin, g.n + g.origin]] = False
        res.append(np.abs(r[mask]).max())
    assert all(math.log2(a / b) > 1.8 for a, b in zip(res[:-1], res[1:]))


@pytest.fixture(scope="module")
def spectra():
    g = Grid.from_halfwidth(0.1, 20.0)
    return {w: discrete_spectrum(build_linearized(g, P1.with_omega(w), "discrete")) for w in (1.0, 1.6)}


def test_spectrum_below_omega1(spectra):
    r = spectra[1.0]
    assert r.cluster_dim == 2
    assert r.kernel_dims == (1, 2)
    assert len(r.gap_eigenvalues) == 0


def test_spectrum_between_omega1_and_Omega(spectra):
    gap = spectra[1.6].gap_eigenvalues
    assert len(gap) == 2
    assert np.abs(gap.real).max() < 1e-8
    assert gap[0].imag == pytest.approx(-gap[1].imag)


def test_spectrum_pairs_and_continuous_part(spectra):
    for w, r in spectra.items():
        lam = r.eigenvalues
        assert r.pair_asymmetry < 1e-8
        cont = lam[(np.abs(lam.imag) >= w) & (np.abs(lam) >= r.cluster_threshold)]
        assert np.abs(cont.real).max() < 1e-6


def test_defocusing_spectrum():
    g = Grid.from_halfwidth(0.1, 30.0)
    r = discrete_spectrum(build_linearized(g, SolitonParams(-1.0, 1, 5.0, 0.25), "discrete"))
    assert r.cluster_dim == 2 and len(r.gap_eigenvalues) == 0


def test_kernel_cluster_grows_to_four_at_critical_frequency():
    g = Grid.from_halfwidth(0.02, 6.0)

    def qdq(w):
        pr = soliton_arrays(g, SolitonParams(-1.0, -1, 5.0, w), "discrete")
        return inner(pr.Q, pr.dQ, g.h).real

    # the grid's own critical frequency, slightly below the continuum value
    om_h = brentq(qdq, 4.0, critical_frequency(-1.0, 5.0), xtol=1e-13)
    at = np.sort(np.abs(discrete_spectrum(build_linearized(g, P1.with_omega(om_h), "discrete"),
                                          rank_test=False).eigenvalues))
    away = np.sort(np.abs(discrete_spectrum(build_linearized(g, P1.with_omega(0.9 * om_h), "discrete"),
                                            rank_test=False).eigenvalues))
    assert at[3] < 1e-2 and at[4] > 1.0
    assert away[1] < 10 * g.h**2 and away[2] > 0.5


def test_hamiltonian_spectrum_report():
    r = discrete_spectrum(build_hamiltonian(Grid.from_halfwidth(0.05, 20.0), -1.0))
    assert np.all(np.abs(r.eigenvalues.imag) == 0)
    assert r.eigenvalues.real.min() == pytest.approx(-0.5, abs=1e-2)


LIN = build_linearized(GRID, P1, "discrete")
fields = arrays(np.complex128, GRID.n,
                elements=st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False))


@given(fields)
def test_projection_idempotent(f):
    Pf = project_continuous(f, LIN)
    scale = max(1.0, np.abs(f).max())
    assert np.abs(project_continuous(Pf, LIN) - Pf).max() < 1e-10 * scale
    # orthogonality conditions of the continuous subspace
    assert abs(inner(Pf, LIN.Q, GRID.h).real) < 1e-10 * scale
    assert abs(inner(Pf, 1j * LIN.dQ, GRID.h).real) < 1e-10 * scale


def test_projection_annihilates_generalized_kernel():
    assert np.abs(project_continuous(LIN.dQ.astype(complex), LIN)).max() < 1e-10
    assert np.abs(project_continuous(1j * LIN.Q, LIN)).max() < 1e-10


def test_projection_accepts_two_component_fields():
    f = np.exp(-GRID.x**2) * (1 + 2j)
    out = project_continuous(TwoComponentField.from_complex(f), LIN)
    assert isinstance(out, TwoComponentField)
    assert np.allclose(out.to_complex(), project_continuous(f, LIN))


def test_projection_rejects_critical_frequency():
    Om = critical_frequency(-1.0, 5.0)
    lin = build_linearized(Grid.from_halfwidth(0.05, 5.0), P1.with_omega(Om), "closed")
    with pytest.raises(ParameterError):
        project_continuous(np.ones(lin.grid.n), lin)


def test_discrete_soliton_solves_grid_equation():
    pr = soliton_arrays(GRID, P1, "discrete")
    H = build_hamiltonian(GRID, P1.q).matrix
    r = H @ pr.Q + P1.omega * pr.Q + P1.sigma * pr.Q ** (P1.p + 1)
    assert np.abs(r).max() < 1e-10
    closed = soliton_arrays(GRID, P1, "closed").Q
    assert np.abs(pr.Q - closed).max() < 0.05 * closed.max()


def test_two_component_round_trip():
    f = np.arange(6) + 1j * np.arange(6)[::-1]
    t = TwoComponentField.from_complex(f)
    assert np.array_equal(TwoComponentField.from_stacked(t.stacked()).to_complex(), f)
    with pytest.raises(ParameterError):
        TwoComponentField(np.zeros(3), np.zeros(4))


def test_operator_is_sparse_tridiagonal():
    H = build_hamiltonian(GRID, -1.0).matrix
    assert sp.issparse(H) and H.nnz == 3 * GRID.n - 2

"""Finite-difference operators H, L+, L-, L(omega) and the conjugated matrix operator.

Grid functions live on ``Grid.x``; the defect enters as ``q/h`` on the origin
diagonal.  Two-component fields are stacked as ``[comp1; comp2]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import NumericalError, ParameterError
from .soliton_family import (
    Grid,
    SolitonParams,
    critical_frequency,
    soliton_domega,
    soliton_domega2,
    soliton_profile,
)

__all__ = [
    "TwoComponentField",
    "OperatorMatrix",
    "ProfileArrays",
    "LinearizedOperator",
    "SpectrumReport",
    "inner",
    "build_hamiltonian",
    "hamiltonian_bands",
    "soliton_arrays",
    "discrete_soliton",
    "build_linearized",
    "conjugation_matrix",
    "discrete_spectrum",
    "project_continuous",
    "ground_state",
]


@dataclass
class TwoComponentField:
    comp1: np.ndarray
    comp2: np.ndarray

    def __post_init__(self):
        self.comp1 = np.asarray(self.comp1, dtype=float)
        self.comp2 = np.asarray(self.comp2, dtype=float)
        if self.comp1.shape != self.comp2.shape:
            raise ParameterError("components must have equal length")

    @classmethod
    def from_complex(cls, f) -> "TwoComponentField":
        f = np.asarray(f)
        return cls(f.real.copy(), f.imag.copy())

    @classmethod
    def from_stacked(cls, v) -> "TwoComponentField":
        v = np.asarray(v, dtype=float)
        n = v.size // 2
        return cls(v[:n].copy(), v[n:].copy())

    def to_complex(self) -> np.ndarray:
        return self.comp1 + 1j * self.comp2

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.comp1, self.comp2])


@dataclass
class OperatorMatrix:
    matrix: sp.spmatrix
    kind: str
    grid: Grid
    meta: dict = field(default_factory=dict)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class ProfileArrays:
    Q: np.ndarray
    dQ: np.ndarray
    d2Q: np.ndarray
    family: str


def inner(f, g, h: float) -> complex:
    """Complex grid inner product h * sum(conj(f) g)."""
    return complex(h * np.vdot(f, g))


def hamiltonian_bands(grid: Grid, q: float):
    """Diagonal vector and constant off-diagonal of the discrete H."""
    h = grid.h
    diag = np.full(grid.n, 1.0 / h**2)
    diag[grid.origin] += q / h
    return diag, -0.5 / h**2


def build_hamiltonian(grid: Grid, q: float) -> OperatorMatrix:
    """-1/2 d^2/dx^2 + q delta with homogeneous Dirichlet ends."""
    diag, off = hamiltonian_bands(grid, q)
    off_v = np.full(grid.n - 1, off)
    mat = sp.diags([off_v, diag, off_v], [-1, 0, 1], format="csr")
    return OperatorMatrix(mat, "H", grid, {"q": q})


def ground_state(grid: Grid, q: float):
    """Lowest eigenpair of the discrete H (eigenvector normalized in grid L2, positive)."""
    H = build_hamiltonian(grid, q).matrix
    d = H.diagonal()
    e = H.diagonal(1)
    vals, vecs = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    v = vecs[:, 0]
    v = v / np.sqrt(grid.h * np.dot(v, v))
    if v[grid.origin] < 0:
        v = -v
    return float(vals[0]), v


def _closed_profile(grid: Grid, params: SolitonParams) -> ProfileArrays:
    x = grid.x
    return ProfileArrays(
        soliton_profile(params, x), soliton_domega(params, x), soliton_domega2(params, x), "closed"
    )


@lru_cache(maxsize=64)
def _discrete_profile_cached(h, n_half, q, sigma, p, omega):
    grid = Grid(h, n_half)
    params = SolitonParams(q, sigma, p, omega)
    H = build_hamiltonian(grid, q).matrix.tocsc()
    Q = soliton_profile(params, grid.x)
    eye = sp.identity(grid.n, format="csc")
    for _ in range(60):
        F = H @ Q + omega * Q + sigma * Q ** (p + 1)
        J = H + omega * eye + sp.diags(sigma * (p + 1) * Q**p)
        dQ = spsolve(J.tocsc(), F)
        Q = Q - dQ
        if np.max(np.abs(dQ)) < 1e-14 * np.max(np.abs(Q)):
            break
    else:  # pragma: no cover
        raise NumericalError("discrete soliton Newton iteration did not converge")
    Lp = (H + omega * eye + sp.diags(sigma * (p + 1) * Q**p)).tocsc()
    dQ = -spsolve(Lp, Q)
    d2Q = -spsolve(Lp, 2.0 * dQ + sigma * p * (p + 1) * Q ** (p - 1) * dQ**2)
    for a in (Q, dQ, d2Q):
        a.setflags(write=False)
    return ProfileArrays(Q, dQ, d2Q, "discrete")


def discrete_soliton(grid: Grid, params: SolitonParams) -> ProfileArrays:
    """Grid soliton solving the discrete profile equation exactly, with dQ/domega from L+ dQ = -Q."""
    return _discrete_profile_cached(grid.h, grid.n_half, params.q, params.sigma, params.p, params.omega)


def soliton_arrays(grid: Grid, params: SolitonParams, family: str = "closed") -> ProfileArrays:
    if family == "closed":
        return _closed_profile(grid, params)
    if family == "discrete":
        return discrete_soliton(grid, params)
    raise ParameterError(f"unknown soliton family '{family}'")


@dataclass
class LinearizedOperator:
    grid: Grid
    params: SolitonParams
    profile: ProfileArrays
    Lplus: sp.csr_matrix
    Lminus: sp.csr_matrix
    L: sp.csr_matrix
    calH: sp.csr_matrix

    @property
    def Q(self):
        return self.profile.Q

    @property
    def dQ(self):
        return self.profile.dQ

    def apply(self, v: TwoComponentField) -> TwoComponentField:
        return TwoComponentField.from_stacked(self.L @ v.stacked())

    def as_operator(self) -> OperatorMatrix:
        return OperatorMatrix(self.L, "L", self.grid, {"params": self.params})


def build_linearized(grid: Grid, params: SolitonParams, family: str = "closed") -> LinearizedOperator:
    """L(omega) = [[0, L-], [-L+, 0]] and its conjugate calH = -i U* L U."""
    prof = soliton_arrays(grid, params, family)
    H = build_hamiltonian(grid, params.q).matrix
    eye = sp.identity(grid.n, format="csr")
    Qp = params.sigma * prof.Q**params.p
    p = params.p
    Lminus = (H + params.omega * eye + sp.diags(Qp)).tocsr()
    Lplus = (H + params.omega * eye + sp.diags((p + 1) * Qp)).tocsr()
    L = sp.bmat([[None, Lminus], [-Lplus, None]], format="csr")
    A = H + params.omega * eye
    V1 = sp.diags(0.5 * (p + 2) * Qp)
    V2 = sp.diags(0.5 * p * Qp)
    calH = sp.bmat([[A + V1, V2], [-V2, -A - V1]], format="csr")
    return LinearizedOperator(grid, params, prof, Lplus, Lminus, L, calH)


def conjugation_matrix(n: int) -> sp.csr_matrix:
    """U = (1/sqrt 2) [[1, 1], [i, -i]] acting blockwise on stacked fields."""
    eye = sp.identity(n, format="csr", dtype=complex)
    return (sp.bmat([[eye, eye], [1j * eye, -1j * eye]], format="csr") / np.sqrt(2.0)).tocsr()


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    cluster: np.ndarray
    cluster_dim: int
    cluster_threshold: float
    cluster_gap: float
    kernel_dims: tuple
    pair_asymmetry: float
    gap_eigenvalues: np.ndarray

    def summary(self) -> str:
        lines = [
            f"cluster_dim: {self.cluster_dim}",
            f"cluster_threshold: {self.cluster_threshold:.3e}",
            f"cluster_max_abs: {np.max(np.abs(self.cluster)) if self.cluster.size else 0.0:.3e}",
            f"cluster_gap: {self.cluster_gap:.3e}",
            f"kernel_dims(L, L^2): {self.kernel_dims}",
            f"pair_asymmetry: {self.pair_asymmetry:.3e}",
            f"gap_eigenvalues: {len(self.gap_eigenvalues)}",
        ]
        return "\n".join(lines)


def _rank_deficiency(M: np.ndarray, tol: float) -> int:
    s = sla.svdvals(M)
    return int(np.sum(s < tol * s[0]))


def discrete_spectrum(
    op,
    window=None,
    cluster_threshold: float | None = None,
    rank_tol: float = 1e-8,
    rank_test: bool = True,
) -> SpectrumReport:
    """Eigenvalues of the dense discretization inside ``window`` = (re_lo, re_hi, im_lo, im_hi).

    ``op`` is a LinearizedOperator or an OperatorMatrix of kind "H" or "L".
    The near-zero cluster collects eigenvalues with |lambda| below the
    threshold (default 10 h^2).
    """
    if isinstance(op, LinearizedOperator):
        mat, grid, omega = op.L, op.grid, op.params.omega
    else:
        mat, grid = op.matrix, op.grid
        omega = op.meta["params"].omega if "params" in op.meta else None
    dense = mat.toarray()
    try:
        if isinstance(op, OperatorMatrix) and op.kind == "H":
            lam = sla.eigvalsh(dense).astype(complex)
        else:
            lam = sla.eigvals(dense)
    except (sla.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(dense)
        raise NumericalError(f"eigensolver failed (condition number {cond:.3e}): {exc}") from exc
    lam = lam[np.argsort(np.abs(lam))]
    thr = 10.0 * grid.h**2 if cluster_threshold is None else cluster_threshold
    in_cluster = np.abs(lam) < thr
    cluster = lam[in_cluster]
    rest = lam[~in_cluster]
    gap = float(np.min(np.abs(rest)) / max(np.max(np.abs(cluster)), 1e-300)) if cluster.size and rest.size else np.inf
    # pairing lambda -> -lambda
    asym = 0.0
    for z in lam:
        asym = max(asym, float(np.min(np.abs(lam + z))))
    if window is not None:
        a, b, c, d = window
        sel = (lam.real >= a) & (lam.real <= b) & (lam.imag >= c) & (lam.imag <= d)
        shown = lam[sel]
    else:
        shown = lam
    if omega is not None:
        gap_eigs = rest[np.abs(rest.imag) < omega * (1 - 1e-9)]
    else:
        gap_eigs = np.array([], dtype=complex)
    kdims = (None, None)
    if rank_test and not (isinstance(op, OperatorMatrix) and op.kind == "H"):
        k1 = _rank_deficiency(dense, rank_tol)
        k2 = _rank_deficiency(dense @ dense, rank_tol**2)
        kdims = (k1, k2)
    return SpectrumReport(shown, cluster, int(cluster.size), thr, gap, kdims, asym, gap_eigs)


@lru_cache(maxsize=128)
def _omega_crit_cached(q, p):
    return critical_frequency(q, p)


def project_continuous(f, lin: LinearizedOperator):
    """P_c f: remove the generalized-kernel components along dQ/domega and iQ.

    ``f`` may be a complex array or a TwoComponentField; the same type is returned.
    """
    params = lin.params
    if params.sigma == -1 and params.p > 4:
        if abs(params.omega - _omega_crit_cached(params.q, params.p)) < 1e-6:
            raise ParameterError("omega too close to the critical frequency; <Q, dQ> degenerate")
    as_field = isinstance(f, TwoComponentField)
    u = f.to_complex() if as_field else np.asarray(f, dtype=complex)
    h = lin.grid.h
    Q, dQ = lin.Q, lin.dQ
    nrm = inner(Q, dQ, h).real
    if nrm == 0.0:
        raise ParameterError("degenerate <Q, dQ>")
    a = inner(u, Q, h).real / nrm
    b = inner(u, 1j * dQ, h).real / nrm
    out = u - a * dQ - b * 1j * Q
    return TwoComponentField.from_complex(out) if as_field else out

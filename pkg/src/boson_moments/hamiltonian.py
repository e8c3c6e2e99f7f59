"""Quadratic bosonic Hamiltonians: storage, validation, classification.

A Hamiltonian is the quadratic form

    H = 1/2 q^T A q + 1/2 p^T C p + 1/2 sum_jk F_jk (q_j p_k + p_k q_j)

over M modes with canonical operators [q_j, p_k] = i delta_jk.  A and C are
real symmetric, F is a general real matrix whose symmetric part is E+ and
whose antisymmetric part carries the number-preserving mixed couplings.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from . import config
from .errors import ScaleError, StructuralError


@dataclass(frozen=True)
class SparseSymmetricMatrix:
    """Real symmetric matrix stored as its upper triangle.

    ``entries`` holds 0-based ``(row, col, value)`` triplets with
    ``row <= col``, sorted lexicographically, without explicit zeros.
    """

    dim: int
    entries: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise StructuralError(f"dimension must be >= 1, got {self.dim}")
        seen = set()
        for r, c, _ in self.entries:
            if not (0 <= r <= c < self.dim):
                raise StructuralError(f"entry ({r}, {c}) outside upper triangle of {self.dim}x{self.dim}")
            if (r, c) in seen:
                raise StructuralError(f"duplicate entry ({r}, {c})")
            seen.add((r, c))

    @classmethod
    def from_triplets(cls, dim: int, triplets: Iterable[tuple[int, int, float]]) -> SparseSymmetricMatrix:
        """Build from 0-based triplets; lower-triangle triplets are mirrored."""
        acc: dict[tuple[int, int], float] = {}
        for r, c, v in triplets:
            r, c = (int(r), int(c)) if r <= c else (int(c), int(r))
            if (r, c) in acc:
                raise StructuralError(f"duplicate entry ({r}, {c})")
            acc[(r, c)] = float(v)
        entries = tuple(sorted((r, c, v) for (r, c), v in acc.items() if v != 0.0))
        return cls(dim, entries)

    @classmethod
    def from_dense(cls, matrix, tol: float = 0.0) -> SparseSymmetricMatrix:
        a = np.asarray(matrix, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise StructuralError(f"expected a square matrix, got shape {a.shape}")
        asym = np.max(np.abs(a - a.T)) if a.size else 0.0
        if asym > max(tol, 0.0):
            raise StructuralError(f"matrix is not symmetric (residual {asym:.3e})")
        rows, cols = np.nonzero(np.triu(a))
        return cls(a.shape[0], tuple((int(r), int(c), float(a[r, c])) for r, c in zip(rows, cols)))

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> SparseSymmetricMatrix:
        return cls(dim, tuple((j, j, float(scale)) for j in range(dim)) if scale else ())

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        for r, c, v in self.entries:
            a[r, c] = v
            a[c, r] = v
        return a

    def to_sparse(self) -> sp.csr_array:
        rows, cols, vals = [], [], []
        for r, c, v in self.entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
            if r != c:
                rows.append(c)
                cols.append(r)
                vals.append(v)
        return sp.csr_array((vals, (rows, cols)), shape=(self.dim, self.dim))

    @property
    def sparsity_d(self) -> int:
        counts = np.zeros(self.dim, dtype=int)
        for r, c, _ in self.entries:
            counts[r] += 1
            if r != c:
                counts[c] += 1
        return int(counts.max())

    def diagonal_slack(self) -> np.ndarray:
        """Row sums ``A_jj + sum_{k != j} A_jk``: the coupling to the reference point."""
        return self.to_dense().sum(axis=1)


def _as_sparse_general(F, dim: int) -> sp.csr_array:
    if F is None:
        return sp.csr_array((dim, dim))
    if sp.issparse(F):
        out = sp.csr_array(F, dtype=float)
    else:
        arr = np.asarray(F, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        out = sp.csr_array(arr)
    out.eliminate_zeros()
    return out


@dataclass(frozen=True)
class QuadraticHamiltonian:
    A: SparseSymmetricMatrix
    C: SparseSymmetricMatrix
    F: sp.csr_array = field(default=None)

    def __post_init__(self):
        F = _as_sparse_general(self.F, self.A.dim)
        object.__setattr__(self, "F", F)
        if self.A.dim != self.C.dim or F.shape != (self.A.dim, self.A.dim):
            raise StructuralError(
                f"dimension mismatch: A is {self.A.dim}, C is {self.C.dim}, F is {F.shape}"
            )

    @classmethod
    def from_dense(cls, A, C, F=None) -> QuadraticHamiltonian:
        return cls(SparseSymmetricMatrix.from_dense(A), SparseSymmetricMatrix.from_dense(C), F)

    @property
    def M(self) -> int:
        return self.A.dim

    def F_dense(self) -> np.ndarray:
        return self.F.toarray()

    @property
    def has_mixed_terms(self) -> bool:
        return self.F.nnz > 0


def _check_dense_cap(M: int, cap: int | None) -> None:
    cap = config.DENSE_MODE_CAP if cap is None else cap
    if M > cap:
        raise ScaleError(f"dense path limited to {cap} modes, instance has {M}", required=M)


def is_laplacian_stiffness(A: SparseSymmetricMatrix, tol: float = config.EXACT_TOL) -> bool:
    """Non-positive off-diagonals and non-negative diagonal slack."""
    if any(r != c and v > tol for r, c, v in A.entries):
        return False
    return bool(np.all(A.diagonal_slack() >= -tol))


@dataclass(frozen=True)
class ValidationReport:
    symmetry_residual_A: float
    symmetry_residual_C: float
    sparsity_d: int
    a_laplacian: bool
    c_laplacian: bool
    a_psd: bool
    c_psd: bool
    a_min_eigenvalue: float
    c_min_eigenvalue: float

    @property
    def laplacian(self) -> bool:
        return self.a_laplacian and self.c_laplacian

    @property
    def psd(self) -> bool:
        return self.a_psd and self.c_psd

    def as_dict(self) -> dict:
        return {
            "laplacian": self.laplacian,
            "psd": self.psd,
            "d": self.sparsity_d,
            "a_laplacian": self.a_laplacian,
            "c_laplacian": self.c_laplacian,
            "a_psd": self.a_psd,
            "c_psd": self.c_psd,
            "a_min_eigenvalue": self.a_min_eigenvalue,
            "c_min_eigenvalue": self.c_min_eigenvalue,
            "symmetry_residual_A": self.symmetry_residual_A,
            "symmetry_residual_C": self.symmetry_residual_C,
        }


def validate(H: QuadraticHamiltonian, tol: float = config.EXACT_TOL, max_dense: int | None = None) -> ValidationReport:
    _check_dense_cap(H.M, max_dense)
    A, C = H.A.to_dense(), H.C.to_dense()
    f_rows = np.diff(H.F.indptr) if H.F.nnz else np.zeros(1, dtype=int)
    f_cols = np.bincount(H.F.indices, minlength=H.M) if H.F.nnz else np.zeros(1, dtype=int)
    d = max(H.A.sparsity_d, H.C.sparsity_d, int(f_rows.max()), int(f_cols.max()))
    a_min = float(np.linalg.eigvalsh(A)[0])
    c_min = float(np.linalg.eigvalsh(C)[0])
    return ValidationReport(
        symmetry_residual_A=float(np.max(np.abs(A - A.T))),
        symmetry_residual_C=float(np.max(np.abs(C - C.T))),
        sparsity_d=d,
        a_laplacian=is_laplacian_stiffness(H.A, tol),
        c_laplacian=is_laplacian_stiffness(H.C, tol),
        a_psd=a_min >= -tol,
        c_psd=c_min >= -tol,
        a_min_eigenvalue=a_min,
        c_min_eigenvalue=c_min,
    )


@dataclass(frozen=True)
class FirstMomentGenerator:
    """Real 2M x 2M matrix G with d/dt (<q>, <p>) = G (<q>, <p>)."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigvec_condition: float
    semisimple: bool


def generator_matrix(H: QuadraticHamiltonian) -> np.ndarray:
    """Block matrix ``[[F^T, C], [-A, -F]]`` of the Heisenberg equations.

    From the canonical commutators: i[H, q] = F^T q + C p and
    i[H, p] = -A q - F p for the symmetrized mixed term.
    """
    A, C = H.A.to_dense(), H.C.to_dense()
    if H.has_mixed_terms:
        F = H.F_dense()
        return np.block([[F.T, C], [-A, -F]])
    Z = np.zeros_like(A)
    return np.block([[Z, C], [-A, Z]])


def _eigenbasis(G: np.ndarray, w: np.ndarray, V: np.ndarray) -> np.ndarray | None:
    """Replace eigenvectors of clustered eigenvalues by an orthonormal null-space basis.

    ``eig`` returns nearly parallel vectors for degenerate eigenvalues even
    when G is diagonalizable.  Returns None if some cluster has fewer
    independent eigenvectors than its multiplicity (a Jordan block).
    """
    n = G.shape[0]
    scale = max(1.0, float(np.max(np.abs(G))))
    cluster_tol = 1e-6 * scale
    V = V.copy()
    done = np.zeros(n, dtype=bool)
    for i in range(n):
        if done[i]:
            continue
        members = np.flatnonzero(np.abs(w - w[i]) <= cluster_tol)
        done[members] = True
        if members.size == 1:
            continue
        lam = w[members].mean()
        _, s, vh = np.linalg.svd(G - lam * np.eye(n))
        null = vh[s <= 1e-7 * scale].conj().T
        if null.shape[1] < members.size:
            return None
        V[:, members] = null[:, : members.size]
    return V


def first_moment_generator(H: QuadraticHamiltonian) -> FirstMomentGenerator:
    G = generator_matrix(H)
    w, V = np.linalg.eig(G)
    V = _eigenbasis(G, w, V)
    cond = math.inf if V is None else float(np.linalg.cond(V))
    return FirstMomentGenerator(
        matrix=G,
        eigenvalues=w,
        eigvec_condition=cond,
        semisimple=bool(np.isfinite(cond) and cond < config.SEMISIMPLE_COND_LIMIT),
    )


class HamiltonianTag(str, enum.Enum):
    INERTIAL = "Inertial"
    HOPPING = "HoppingNumberPreserving"
    GENERAL = "GeneralQuadratic"


@dataclass(frozen=True)
class HamiltonianClass:
    tag: HamiltonianTag
    a_laplacian: bool
    c_laplacian: bool
    a_psd: bool
    c_psd: bool
    ac_positive_spectrum: bool
    bounded_dynamics: bool

    def as_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "a_laplacian": self.a_laplacian,
            "c_laplacian": self.c_laplacian,
            "a_psd": self.a_psd,
            "c_psd": self.c_psd,
            "ac_positive_spectrum": self.ac_positive_spectrum,
            "bounded_dynamics": self.bounded_dynamics,
        }


def classify(H: QuadraticHamiltonian, tol: float = config.EVOLVED_TOL, max_dense: int | None = None) -> HamiltonianClass:
    """Place H in the Venn diagram of inertial / hopping / general quadratic.

    Inertial requires F = 0 with PSD A and C; hopping requires E+ = 0 and
    A = C.  An instance in both regions is tagged Inertial.  Boundedness is
    decided from the spectrum of the first-moment generator: purely
    imaginary eigenvalues and a well-conditioned eigenbasis.
    """
    report = validate(H, tol, max_dense)
    F = H.F_dense()
    e_plus = 0.5 * (F + F.T)
    A, C = H.A.to_dense(), H.C.to_dense()
    f_zero = np.max(np.abs(F), initial=0.0) <= tol
    if f_zero and report.a_psd and report.c_psd:
        tag = HamiltonianTag.INERTIAL
    elif np.max(np.abs(e_plus), initial=0.0) <= tol and np.max(np.abs(A - C)) <= tol:
        tag = HamiltonianTag.HOPPING
    else:
        tag = HamiltonianTag.GENERAL

    ac = np.linalg.eigvals(A @ C)
    ac_positive = bool(np.all(np.abs(ac.imag) <= tol) and np.all(ac.real > tol))

    gen = first_moment_generator(H)
    scale = max(1.0, float(np.max(np.abs(gen.matrix))))
    bounded = bool(np.all(np.abs(gen.eigenvalues.real) <= tol * scale) and gen.semisimple)
    return HamiltonianClass(
        tag=tag,
        a_laplacian=report.a_laplacian,
        c_laplacian=report.c_laplacian,
        a_psd=report.a_psd,
        c_psd=report.c_psd,
        ac_positive_spectrum=ac_positive,
        bounded_dynamics=bounded,
    )


_PAULI_I = np.eye(2)
_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_I_PAULI_Y = np.array([[0.0, 1.0], [-1.0, 0.0]])  # iY as a real matrix


@dataclass(frozen=True)
class GeneratorDecomposition:
    """Sigma, Delta, E+, E- parts of H and Pauli reassembly residuals.

    ``residual_real`` treats E- as the real antisymmetric part of F;
    ``residual_hermitian`` uses the Hermitian matrix -i * antisym(F) in the
    identity-Pauli slot instead.  Only the latter vanishes when F has an
    antisymmetric part.
    """

    sigma: np.ndarray
    delta: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    residual_real: float
    residual_hermitian: float


def _pauli_assembly(e_minus, e_plus, delta, sigma) -> np.ndarray:
    return (
        np.kron(_PAULI_I, e_minus)
        + 1j * np.kron(_PAULI_Z, e_plus)
        + np.kron(_I_PAULI_Y, delta)
        - np.kron(_PAULI_X, sigma)
    )


def decompose_generator(H: QuadraticHamiltonian) -> GeneratorDecomposition:
    A, C, F = H.A.to_dense(), H.C.to_dense(), H.F_dense()
    sigma = 0.5 * (A + C)
    delta = 0.5 * (A - C)
    e_plus = 0.5 * (F + F.T)
    e_minus = 0.5 * (F - F.T)

    M = H.M
    G = generator_matrix(H)
    # (q, p) -> (iq, p)
    V = np.diag(np.concatenate([np.full(M, 1j), np.ones(M)]))
    V_inv = np.diag(np.concatenate([np.full(M, -1j), np.ones(M)]))
    target = V @ G @ V_inv

    res_real = np.max(np.abs(target - (-1j) * _pauli_assembly(e_minus, e_plus, delta, sigma)))
    res_herm = np.max(np.abs(target - (-1j) * _pauli_assembly(-1j * e_minus, e_plus, delta, sigma)))
    return GeneratorDecomposition(sigma, delta, e_plus, e_minus, float(res_real), float(res_herm))

"""Time evolution of first moments and of encoded moment vectors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import config
from .encoding import IncidenceFactor, MomentVector, n_pairs
from .errors import NumericalError, ParameterError, ScaleError, StructuralError
from .hamiltonian import QuadraticHamiltonian, generator_matrix


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Hermitian generator of greek first moments, d/dt <z> = i H0 <z>."""

    dim: int
    upper: sp.csr_array  # B^T D
    lower: sp.csr_array  # D^T B
    max_abs_entry: float

    @property
    def matrix(self) -> sp.csr_array:
        return sp.csr_array(sp.block_array([[None, self.upper], [self.lower, None]], format="csr"))

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_residual(self) -> float:
        diff = (self.upper.T - self.lower).tocsr()
        return float(np.max(np.abs(diff.data), initial=0.0))

    def max_row_nnz(self) -> int:
        return int(np.diff(self.matrix.indptr).max())


def effective_hamiltonian(B: IncidenceFactor, D: IncidenceFactor) -> EffectiveHamiltonian:
    if B.source_dim != D.source_dim:
        raise StructuralError(f"B acts on {B.source_dim} modes, D on {D.source_dim}")
    Bm, Dm = B.matrix(), D.matrix()
    upper = sp.csr_array(Bm.T @ Dm)
    lower = sp.csr_array(Dm.T @ Bm)
    upper.eliminate_zeros()
    lower.eliminate_zeros()
    h0max = float(np.max(np.abs(upper.data), initial=0.0))
    return EffectiveHamiltonian(2 * n_pairs(B.source_dim), upper, lower, h0max)


@dataclass(frozen=True)
class EvolutionResult:
    state: Union[MomentVector, np.ndarray]
    time: float
    method: str
    residual_estimate: float
    overflow: bool = False


def evolve_first_moments(H: QuadraticHamiltonian, z0, t: float) -> EvolutionResult:
    """Exact linear first-moment dynamics ``z(t) = expm(t G) z0``.

    This is the reference path for everything built on greek coordinates.
    Overflowing entries (unbounded dynamics at large t) come back as signed
    infinities with ``overflow=True``.
    """
    if not math.isfinite(t):
        raise ParameterError(f"time must be finite, got {t}")
    G = generator_matrix(H)
    z0 = np.asarray(z0)
    if z0.shape[0] != G.shape[0]:
        raise StructuralError(f"state has length {z0.shape[0]}, generator is {G.shape[0]}")
    if t == 0:
        return EvolutionResult(z0.copy(), 0.0, "dense-expm", 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with np.errstate(over="ignore", invalid="ignore"):
            z = la.expm(t * G) @ z0
    finite = np.isfinite(z)
    if not np.all(finite):
        z = np.where(finite, z, np.copysign(np.inf, np.nan_to_num(z.real, nan=1.0)))
        return EvolutionResult(z, float(t), "dense-expm", math.inf, overflow=True)
    return EvolutionResult(z, float(t), "dense-expm", 0.0)


def _kronecker_sum(H: sp.csr_array, r: int) -> sp.csr_array:
    n = H.shape[0]
    total = sp.csr_array((n**r, n**r), dtype=H.dtype)
    for j in range(r):
        term = sp.csr_array(sp.identity(1))
        for k in range(r):
            term = sp.kron(term, H if k == j else sp.identity(n), format="csr")
        total = total + term
    return sp.csr_array(total)


def _apply_on_every_axis(U: np.ndarray, T: np.ndarray) -> np.ndarray:
    for axis in range(T.ndim):
        T = np.moveaxis(np.tensordot(U, T, axes=([1], [axis])), 0, axis)
    return T


def evolve_moment_vector(
    H0: EffectiveHamiltonian,
    psi0: MomentVector,
    t: float,
    eps: float = config.EVOLVED_TOL,
    dense_cap: int | None = None,
) -> EvolutionResult:
    """Evolve every rank-r sector under exp(i t sum_j H0^(j)).

    Sectors up to ``dense_cap`` amplitudes apply the dense propagator
    expm(i t H0) on each tensor slot, which equals the exponential of the
    Kronecker sum.  Larger sectors use Krylov action of the sparse Kronecker
    sum.  The vacuum amplitude is untouched.  ``residual_estimate`` is the
    largest per-sector norm defect, which must stay below ``eps`` split evenly
    across sectors.
    """
    if H0.dim != psi0.dim:
        raise StructuralError(f"H0 has dimension {H0.dim}, state has {psi0.dim}")
    if not math.isfinite(t):
        raise ParameterError(f"time must be finite, got {t}")
    if t == 0:
        return EvolutionResult(psi0, 0.0, "dense-expm", 0.0)
    cap = config.dense_dimension_cap() if dense_cap is None else dense_cap
    for r in range(psi0.order_max + 1):
        if psi0.dim**r > config.MEMORY_CAP:
            raise ScaleError(f"sector {r} needs {psi0.dim**r} amplitudes", required=psi0.dim**r)

    n_sectors = max(psi0.order_max, 1)
    H = H0.matrix
    U = None
    method = "dense-expm"
    residual = 0.0
    sectors = [psi0.sectors[0].copy()]
    for r in range(1, psi0.order_max + 1):
        T0 = psi0.sectors[r]
        if not np.any(T0):
            sectors.append(T0.copy())
            continue
        if T0.size <= cap:
            if U is None:
                U = la.expm(1j * t * H0.to_dense())
            T = _apply_on_every_axis(U, T0)
        else:
            method = "krylov-action"
            S = _kronecker_sum(H, r)
            T = expm_multiply(1j * t * S, T0.reshape(-1), traceA=0.0).reshape(T0.shape)
        defect = abs(np.linalg.norm(T) - np.linalg.norm(T0))
        residual = max(residual, defect)
        if defect > eps / n_sectors:
            raise NumericalError(f"sector {r} norm drifted by {defect:.3e} (budget {eps / n_sectors:.3e})")
        sectors.append(T)
    return EvolutionResult(psi0.replace_sectors(sectors), float(t), method, residual)


def closed_form_evolution(a_tilde, q0, qdot0, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve q'' = -a_tilde q for symmetric, possibly indefinite a_tilde.

    Per eigenvalue lam: cos / sin branch for lam > 0, cosh / sinh for
    lam < 0, and the free-particle limit (1, t) for |lam| <= 1e-12.
    """
    a = np.asarray(a_tilde, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"expected a square matrix, got {a.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > config.EXACT_TOL * max(1.0, np.max(np.abs(a))):
        raise StructuralError("a_tilde must be symmetric")
    if t == 0:
        return np.array(q0, dtype=float), np.array(qdot0, dtype=float)
    lam, V = np.linalg.eigh(0.5 * (a + a.T))
    c = np.empty_like(lam)
    s = np.empty_like(lam)  # sin(w t) / w and its branches
    pos = lam > config.ZERO_EIGENVALUE_CUTOFF
    neg = lam < -config.ZERO_EIGENVALUE_CUTOFF
    zero = ~(pos | neg)
    w = np.sqrt(lam[pos])
    c[pos] = np.cos(w * t)
    s[pos] = np.sin(w * t) / w
    k = np.sqrt(-lam[neg])
    c[neg] = np.cosh(k * t)
    s[neg] = np.sinh(k * t) / k
    c[zero] = 1.0
    s[zero] = t

    x0 = V.T @ np.asarray(q0, dtype=float)
    v0 = V.T @ np.asarray(qdot0, dtype=float)
    q = V @ (c * x0 + s * v0)
    qdot = V @ (-lam * s * x0 + c * v0)
    return q, qdot


@dataclass(frozen=True)
class ResourceEstimate:
    """Asymptotic query and gate counts with all constants set to one.

    Order-of-magnitude indicators, not contractual costs.
    """

    queries: float
    gates: float


def resource_estimate(t: float, K: float, d: float, h0max: float, eps: float, M: int = 1) -> ResourceEstimate:
    """Q = t K d |H0|_max + log(1/eps) and G = Q log^2(M Q / eps).

    ``K`` enters the query bound as a free multiplicative parameter.
    """
    for name, value in (("t", t), ("K", K), ("d", d), ("h0max", h0max), ("eps", eps), ("M", M)):
        if not value > 0:
            raise ParameterError(f"{name} must be positive, got {value}")
    Q = t * K * d * h0max + math.log(1.0 / eps)
    G = Q * math.log(M * Q / eps) ** 2
    return ResourceEstimate(Q, G)

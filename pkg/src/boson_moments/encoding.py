"""Incidence factors, greek coordinates and the encoded moment vector.

Greek coordinates are the redundant linear combinations

    z_(j,k)     = i sum_m B_{m,(j,k)} q_m       (position type)
    z_bar(j,k)  =   sum_m D_{m,(j,k)} p_m       (momentum type)

indexed by pairs j <= k.  Pairs are linearized lexicographically and the bar
flag is the most significant bit, so greek index ``g`` lies in
``[0, 2K)`` with ``K = M(M+1)/2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from . import config
from .errors import DegenerateStateError, ScaleError, SignConventionError, StructuralError
from .hamiltonian import SparseSymmetricMatrix


def n_pairs(M: int) -> int:
    return M * (M + 1) // 2


def modes_from_pairs(K: int) -> int:
    M = int((math.isqrt(8 * K + 1) - 1) // 2)
    if n_pairs(M) != K:
        raise StructuralError(f"{K} is not a triangular number")
    return M


def pair_index(j: int, k: int, M: int) -> int:
    """Lexicographic position of the 0-based pair (j, k), j <= k."""
    if not (0 <= j <= k < M):
        raise StructuralError(f"invalid pair ({j}, {k}) for M={M}")
    return j * M - j * (j - 1) // 2 + (k - j)


def pair_from_index(index: int, M: int) -> tuple[int, int]:
    if not (0 <= index < n_pairs(M)):
        raise StructuralError(f"pair index {index} out of range for M={M}")
    j = 0
    while index >= M - j:
        index -= M - j
        j += 1
    return j, j + index


@dataclass(frozen=True, order=True)
class GreekIndex:
    bar: bool
    pair: tuple[int, int]

    def linear(self, M: int) -> int:
        return int(self.bar) * n_pairs(M) + pair_index(*self.pair, M)

    @classmethod
    def from_linear(cls, g: int, M: int) -> GreekIndex:
        K = n_pairs(M)
        if not (0 <= g < 2 * K):
            raise StructuralError(f"greek index {g} out of range for M={M}")
        return cls(bar=g >= K, pair=pair_from_index(g % K, M))

    def __str__(self) -> str:
        j, k = self.pair
        return f"{'bar' if self.bar else ''}({j + 1},{k + 1})"


@dataclass(frozen=True)
class IncidenceFactor:
    """Sparse M x M(M+1)/2 factor with ``factor @ factor.T == A``.

    ``columns`` maps a pair (j, k) to its nonzero ``(row, value)`` entries;
    pairs with zero coupling are absent.
    """

    source_dim: int
    columns: Mapping[tuple[int, int], tuple[tuple[int, float], ...]]

    @property
    def target_dim(self) -> int:
        return n_pairs(self.source_dim)

    def matrix(self) -> sp.csc_array:
        M = self.source_dim
        rows, cols, vals = [], [], []
        for (j, k), entries in self.columns.items():
            col = pair_index(j, k, M)
            for r, v in entries:
                rows.append(r)
                cols.append(col)
                vals.append(v)
        return sp.csc_array((vals, (rows, cols)), shape=(M, self.target_dim))

    def to_dense(self) -> np.ndarray:
        return self.matrix().toarray()


def build_incidence_factor(A: SparseSymmetricMatrix, tol: float = config.EXACT_TOL) -> IncidenceFactor:
    """Vertex-edge factor of a Laplacian-type stiffness matrix.

    Column (j, k), j < k, is sqrt(-A_jk) (e_j - e_k); column (j, j) is
    sqrt(slack_j) e_j with slack_j = A_jj + sum_{k != j} A_jk.
    """
    M = A.dim
    slack = np.zeros(M)
    columns: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
    for r, c, v in A.entries:
        slack[r] += v
        if r != c:
            slack[c] += v
            if v > 0:
                raise SignConventionError(
                    f"positive off-diagonal A[{r + 1},{c + 1}] = {v}; spring couplings must be non-positive"
                )
            w = math.sqrt(-v)
            columns[(r, c)] = ((r, w), (c, -w))
    for j in range(M):
        if slack[j] < -tol:
            raise SignConventionError(f"negative diagonal slack {slack[j]:.3e} at mode {j + 1}")
        if slack[j] > tol:
            columns[(j, j)] = ((j, math.sqrt(slack[j])),)
    return IncidenceFactor(M, dict(sorted(columns.items())))


def greek_map_columns(B: IncidenceFactor, D: IncidenceFactor) -> list[list[tuple[int, complex]]]:
    """For each cartesian index a in [0, 2M), the greek entries of (iB^T + D^T) e_a."""
    if B.source_dim != D.source_dim:
        raise StructuralError(f"B acts on {B.source_dim} modes, D on {D.source_dim}")
    M = B.source_dim
    K = n_pairs(M)
    out: list[list[tuple[int, complex]]] = [[] for _ in range(2 * M)]
    for (j, k), entries in B.columns.items():
        g = pair_index(j, k, M)
        for r, v in entries:
            out[r].append((g, 1j * v))
    for (j, k), entries in D.columns.items():
        g = K + pair_index(j, k, M)
        for r, v in entries:
            out[M + r].append((g, complex(v)))
    return out


def greek_map_dense(B: IncidenceFactor, D: IncidenceFactor) -> np.ndarray:
    """Dense 2K x 2M matrix block_diag(i B^T, D^T)."""
    M = B.source_dim
    K = n_pairs(M)
    W = np.zeros((2 * K, 2 * M), dtype=complex)
    W[:K, :M] = 1j * B.to_dense().T
    W[K:, M:] = D.to_dense().T
    return W


def to_greek_moments(
    B: IncidenceFactor,
    D: IncidenceFactor,
    cartesian: Mapping[tuple[int, ...], complex],
) -> dict[tuple[int, ...], complex]:
    """Contract every slot of the cartesian moment tensors with iB^T (+) D^T.

    Cartesian keys are tuples over ``[0, 2M)`` (``a < M`` is q_a, ``a >= M``
    is p_{a-M}); the tuple length is the order.  Output keys are greek
    linear indices.  Entries that cancel exactly are dropped.
    """
    cols = greek_map_columns(B, D)
    two_m = len(cols)
    out: dict[tuple[int, ...], complex] = {}
    for key, value in cartesian.items():
        if not key:
            raise StructuralError("order-0 entries are not moments; the vacuum is added by the encoder")
        for a in key:
            if not (0 <= a < two_m):
                raise StructuralError(f"cartesian index {a} out of range for M={two_m // 2}")
        for combo in itertools.product(*(cols[a] for a in key)):
            g = tuple(c[0] for c in combo)
            coeff = complex(value)
            for c in combo:
                coeff *= c[1]
            out[g] = out.get(g, 0.0) + coeff
    return {k: v for k, v in out.items() if v != 0}


@dataclass(frozen=True)
class MomentVector:
    """Normalized amplitudes of all moments up to ``order_max``.

    ``sectors[r]`` is the dense rank-r tensor over greek indices (shape
    ``(dim,) * r``); ``sectors[0]`` is the 0-d vacuum amplitude.  Raw
    moments are amplitudes times ``normalization``.
    """

    dim: int
    order_max: int
    sectors: tuple[np.ndarray, ...]
    normalization: float

    def __post_init__(self):
        if len(self.sectors) != self.order_max + 1:
            raise StructuralError("need one sector per order 0..order_max")
        for r, s in enumerate(self.sectors):
            if s.shape != (self.dim,) * r:
                raise StructuralError(f"sector {r} has shape {s.shape}")
            s.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return modes_from_pairs(self.dim // 2)

    def amplitude(self, index: tuple[int, ...]) -> complex:
        return complex(self.sectors[len(index)][tuple(index)])

    def moment(self, index: tuple[int, ...]) -> complex:
        return self.amplitude(index) * self.normalization

    def norm(self) -> float:
        return math.sqrt(sum(float(np.vdot(s, s).real) for s in self.sectors))

    def nonzero_items(self, cutoff: float = 0.0) -> Iterable[tuple[tuple[int, ...], complex]]:
        for r, s in enumerate(self.sectors):
            if r == 0:
                if abs(s[()]) > cutoff:
                    yield (), complex(s[()])
                continue
            for idx in zip(*np.nonzero(np.abs(s) > cutoff)):
                yield tuple(int(i) for i in idx), complex(s[idx])

    def nnz(self) -> int:
        return sum(int(np.count_nonzero(s)) for s in self.sectors)

    def replace_sectors(self, sectors) -> MomentVector:
        return MomentVector(self.dim, self.order_max, tuple(sectors), self.normalization)


def encode_state(
    greek: Mapping[tuple[int, ...], complex],
    dim: int,
    order_max: int | None = None,
    include_vacuum: bool = True,
    cap: int = config.NONZERO_MOMENT_CAP,
) -> MomentVector:
    """Assemble the normalized moment vector from sparse greek moments."""
    if len(greek) > cap:
        raise ScaleError(f"{len(greek)} nonzero moments exceed the cap of {cap}", required=len(greek))
    orders = [len(k) for k in greek]
    if any(r == 0 for r in orders):
        raise StructuralError("order-0 key given explicitly; use include_vacuum")
    R = max(orders, default=0) if order_max is None else order_max
    if orders and max(orders) > R:
        raise StructuralError(f"moment of order {max(orders)} exceeds order_max={R}")
    for r in range(R + 1):
        if dim**r > config.MEMORY_CAP:
            raise ScaleError(f"sector {r} needs {dim**r} amplitudes (cap {config.MEMORY_CAP})", required=dim**r)

    sectors = [np.zeros((dim,) * r, dtype=complex) for r in range(R + 1)]
    sectors[0][()] = 1.0 if include_vacuum else 0.0
    for key, value in greek.items():
        if any(not (0 <= g < dim) for g in key):
            raise StructuralError(f"greek index in {key} out of range [0, {dim})")
        sectors[len(key)][key] += value
    N = math.sqrt(sum(float(np.vdot(s, s).real) for s in sectors))
    if N == 0.0:
        raise DegenerateStateError("all moments are zero and the vacuum is excluded")
    return MomentVector(dim, R, tuple(s / N for s in sectors), N)

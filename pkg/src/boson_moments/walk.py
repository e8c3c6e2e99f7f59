"""Continuous-time quantum walks as inertially coupled bosons.

A walk with adjacency T becomes H = 1/2 sum T~_jk (q_j q_k + p_j p_k) with
T~ = c*1 - T.  The complex first moment <q> + i<p> then evolves as
exp(-i T~ t) applied to the initial walk amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la

from . import config
from .dynamics import evolve_first_moments
from .errors import InstanceParseError, NotPSDError, StructuralError
from .hamiltonian import QuadraticHamiltonian, SparseSymmetricMatrix


@dataclass(frozen=True)
class WalkGraph:
    adjacency: SparseSymmetricMatrix

    def __post_init__(self):
        for r, c, v in self.adjacency.entries:
            if r == c:
                raise StructuralError(f"self-loop at vertex {r + 1}")
            if v < 0:
                raise StructuralError(f"negative weight on edge ({r + 1}, {c + 1})")

    @classmethod
    def from_edges(cls, M: int, edges) -> WalkGraph:
        """Edges as 0-based ``(j, k)`` or ``(j, k, weight)`` tuples."""
        trip = []
        for e in edges:
            j, k = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            trip.append((j, k, w))
        return cls(SparseSymmetricMatrix.from_triplets(M, trip))

    @property
    def vertices(self) -> int:
        return self.adjacency.dim

    @property
    def max_degree(self) -> int:
        deg = np.zeros(self.vertices, dtype=int)
        for r, c, _ in self.adjacency.entries:
            deg[r] += 1
            deg[c] += 1
        return int(deg.max())

    @property
    def max_row_sum(self) -> float:
        return float(self.adjacency.to_dense().sum(axis=1).max())


def read_edge_list(path: str | Path) -> WalkGraph:
    """Parse ``j k [weight]`` lines (1-based); optional ``vertices M`` header."""
    M = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "vertices":
                M = int(parts[1])
                continue
            if len(parts) not in (2, 3):
                raise ValueError("expected 'j k [weight]'")
            j, k = int(parts[0]) - 1, int(parts[1]) - 1
            if j < 0 or k < 0:
                raise ValueError("vertices are 1-based")
            edges.append((j, k, float(parts[2])) if len(parts) == 3 else (j, k))
        except (ValueError, IndexError) as exc:
            raise InstanceParseError(f"{path}:{lineno}: {exc}") from exc
    n = max((max(e[0], e[1]) + 1 for e in edges), default=1)
    if M is None:
        M = n
    elif M < n:
        raise InstanceParseError(f"{path}: edge references vertex {n} beyond 'vertices {M}'")
    try:
        return WalkGraph.from_edges(M, edges)
    except StructuralError as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class WalkEmbedding:
    shift_c: float
    t_tilde: SparseSymmetricMatrix
    hamiltonian: QuadraticHamiltonian
    spring_constants: dict[tuple[int, int], float]


def embed_walk(graph: WalkGraph, c: float | None = None, strict: bool = True) -> WalkEmbedding:
    """Shift the walk Hamiltonian so that A = C = c*1 - T is a stiffness matrix.

    ``c=None`` picks the maximum weighted degree (row sum), which equals the
    maximum vertex degree on unweighted graphs.
    """
    M = graph.vertices
    T = graph.adjacency.to_dense()
    row_sum = graph.max_row_sum
    if c is None:
        c = row_sum
    elif strict and c < row_sum - config.EXACT_TOL:
        raise NotPSDError(f"shift c={c} below the maximum row sum {row_sum}")
    t_tilde = c * np.eye(M) - T
    if M <= config.DENSE_MODE_CAP and strict:
        lo = float(np.linalg.eigvalsh(t_tilde)[0])
        if lo < -config.EXACT_TOL:
            raise NotPSDError(f"T~ has eigenvalue {lo:.3e}")
    A = SparseSymmetricMatrix.from_dense(t_tilde)
    springs: dict[tuple[int, int], float] = {}
    for r, col, v in graph.adjacency.entries:
        springs[(r, col)] = v
    slack = t_tilde.sum(axis=1)
    for j in range(M):
        springs[(j, j)] = float(slack[j])
    return WalkEmbedding(float(c), A, QuadraticHamiltonian(A, A), dict(sorted(springs.items())))


def walk_amplitudes(embedding: WalkEmbedding, amp0, t: float) -> np.ndarray:
    """Reference walk evolution exp(-i T~ t) amp0 via eigendecomposition."""
    if t == 0:
        return np.asarray(amp0, dtype=complex).copy()
    lam, V = np.linalg.eigh(embedding.t_tilde.to_dense())
    return V @ (np.exp(-1j * lam * t) * (V.T @ np.asarray(amp0, dtype=complex)))


def bosonic_amplitudes(embedding: WalkEmbedding, amp0, t: float) -> np.ndarray:
    """<q>(t) + i<p>(t) from the bosonic first-moment dynamics."""
    amp0 = np.asarray(amp0, dtype=complex)
    z0 = np.concatenate([amp0.real, amp0.imag])
    z = evolve_first_moments(embedding.hamiltonian, z0, t).state
    M = amp0.shape[0]
    return z[:M] + 1j * z[M:]


def verify_walk_equivalence(embedding: WalkEmbedding, amp0, t: float) -> float:
    """Max-norm deviation between the bosonic and the walk amplitudes."""
    amp0 = np.asarray(amp0, dtype=complex)
    if amp0.shape != (embedding.t_tilde.dim,):
        raise StructuralError(f"amplitude vector has shape {amp0.shape}")
    return float(np.max(np.abs(bosonic_amplitudes(embedding, amp0, t) - walk_amplitudes(embedding, amp0, t))))


def walk_propagator(embedding: WalkEmbedding, t: float) -> np.ndarray:
    return la.expm(-1j * t * embedding.t_tilde.to_dense())

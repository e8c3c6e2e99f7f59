"""Population readouts, the promise decision, and moment reconstruction."""

from __future__ import annotations

import enum
import math
import re
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import config
from .encoding import MomentVector, n_pairs, pair_from_index, pair_index
from .errors import InstanceParseError, NotReconstructibleError, ParameterError, StructuralError
from .hamiltonian import SparseSymmetricMatrix


@dataclass(frozen=True)
class SlotPattern:
    """Constraint on one greek slot; ``None`` fields are wildcards.

    ``first`` alone fixes the first pair element, ``first`` and ``second``
    fix the whole pair.  Indices are 0-based.
    """

    bar: bool | None = None
    first: int | None = None
    second: int | None = None

    def mask(self, M: int) -> np.ndarray:
        K = n_pairs(M)
        keep = np.ones(2 * K, dtype=bool)
        if self.bar is not None:
            keep[:K] &= not self.bar
            keep[K:] &= self.bar
        if self.first is not None:
            sel = np.zeros(K, dtype=bool)
            for p in range(K):
                j, k = pair_from_index(p, M)
                sel[p] = j == self.first and (self.second is None or k == self.second)
            keep &= np.concatenate([sel, sel])
        return keep

    def matches(self, g: int, M: int) -> bool:
        K = n_pairs(M)
        if self.bar is not None and (g >= K) != self.bar:
            return False
        if self.first is None:
            return True
        j, k = pair_from_index(g % K, M)
        return j == self.first and (self.second is None or k == self.second)

    def __str__(self) -> str:
        flag = {None: "", True: "bar", False: "nobar"}[self.bar]
        if self.first is None:
            return flag or "*"
        second = "*" if self.second is None else str(self.second + 1)
        return f"{flag}({self.first + 1},{second})"


@dataclass(frozen=True)
class IndexSetSpec:
    """Union of per-slot templates, restricted to orders r_min..r_max.

    A multi-index of order r belongs to the set if some template of length r
    matches it slot by slot, or if ``match_all`` is set.  ``r_max=None``
    means the state's ``order_max``.
    """

    patterns: tuple[tuple[SlotPattern, ...], ...] = ()
    r_min: int = 0
    r_max: int | None = None
    match_all: bool = False

    @classmethod
    def everything(cls, r_min: int = 0, r_max: int | None = None) -> IndexSetSpec:
        return cls((), r_min, r_max, True)

    @classmethod
    def of(cls, *indices: tuple[int, ...], M: int) -> IndexSetSpec:
        """Exact set of greek multi-indices given by linear index."""
        pats = []
        K = n_pairs(M)
        for idx in indices:
            pats.append(tuple(SlotPattern(g >= K, *pair_from_index(g % K, M)) for g in idx))
        return cls(tuple(pats))

    def contains(self, index: tuple[int, ...], M: int) -> bool:
        r = len(index)
        if r < self.r_min or (self.r_max is not None and r > self.r_max):
            return False
        if self.match_all:
            return True
        return any(
            len(p) == r and all(s.matches(g, M) for s, g in zip(p, index)) for p in self.patterns
        )

    def sector_mask(self, r: int, M: int) -> np.ndarray | bool:
        """Boolean mask over the rank-r sector (or a scalar for r = 0)."""
        if r < self.r_min or (self.r_max is not None and r > self.r_max):
            return False
        if self.match_all:
            return True
        dim = 2 * n_pairs(M)
        mask = np.zeros((dim,) * r, dtype=bool)
        for p in self.patterns:
            if len(p) != r:
                continue
            term = np.ones((), dtype=bool)
            for s in p:
                term = np.multiply.outer(term, s.mask(M))
            mask |= term
        return mask if r else bool(mask)

    def __str__(self) -> str:
        head = f"orders {self.r_min}..{'' if self.r_max is None else self.r_max}: "
        if self.match_all:
            return head + "all"
        return head + " ; ".join(" ".join(str(s) for s in p) if p else "vac" for p in self.patterns)


_SLOT_RE = re.compile(r"^(bar|nobar)?(?:\((\d+),(\d+|\*)\))?$")
_ORDERS_RE = re.compile(r"^\s*orders\s+(\d+)\s*\.\.\s*(\d*)\s*:(.*)$", re.S)


def parse_slot(token: str) -> SlotPattern:
    if token == "*":
        return SlotPattern()
    m = _SLOT_RE.match(token)
    if not m or not token:
        raise InstanceParseError(f"bad slot token {token!r}")
    flag, j, k = m.groups()
    bar = None if flag is None else flag == "bar"
    if j is None:
        return SlotPattern(bar)
    j0 = int(j) - 1
    k0 = None if k == "*" else int(k) - 1
    if j0 < 0 or (k0 is not None and k0 < j0):
        raise InstanceParseError(f"slot {token!r} needs 1 <= j <= k")
    return SlotPattern(bar, j0, k0)


def parse_index_set(text: str) -> IndexSetSpec:
    """Parse the textual form, e.g. ``"orders 1..2: bar(1,1) ; (2,*) *"``.

    Templates are separated by ``;`` and slots by whitespace.  Slot tokens
    are ``(j,k)``, ``(j,*)``, ``bar``/``nobar`` (optionally prefixed to a
    pair), and ``*``.  ``all`` selects everything, ``vac`` the vacuum.
    """
    r_min, r_max = 0, None
    m = _ORDERS_RE.match(text)
    if m:
        r_min = int(m.group(1))
        r_max = int(m.group(2)) if m.group(2) else None
        text = m.group(3)
    body = text.strip()
    if body == "all":
        return IndexSetSpec((), r_min, r_max, True)
    patterns = []
    for chunk in body.split(";") if body else []:
        chunk = chunk.strip()
        if chunk == "vac":
            patterns.append(())
        elif chunk:
            patterns.append(tuple(parse_slot(tok) for tok in chunk.split()))
    return IndexSetSpec(tuple(patterns), r_min, r_max)


def format_index_set(spec: IndexSetSpec) -> str:
    return str(spec)


@dataclass(frozen=True)
class PopulationResult:
    zeta: float
    contributing_count: int
    time: float = 0.0


def zeta(psi: MomentVector, spec: IndexSetSpec, time: float = 0.0) -> PopulationResult:
    """Sum of |moment|^2 over the index set: squared amplitudes times N^2."""
    r_max = psi.order_max if spec.r_max is None else spec.r_max
    longest = max((len(p) for p in spec.patterns), default=0)
    if spec.r_min > psi.order_max or r_max > psi.order_max or longest > psi.order_max:
        raise ParameterError(f"index set reaches order {max(r_max, longest)} beyond order_max={psi.order_max}")
    M = psi.n_modes
    total = 0.0
    count = 0
    for r in range(spec.r_min, r_max + 1):
        mask = spec.sector_mask(r, M)
        s = psi.sectors[r]
        weights = np.abs(s) ** 2
        sel = weights * mask if r else (weights if mask else 0.0)
        total += float(np.sum(sel))
        count += int(np.count_nonzero(sel))
    return PopulationResult(total * psi.normalization**2, count, time)


class Decision(str, enum.Enum):
    ABOVE_A = "AboveA"
    BELOW_B = "BelowB"
    PROMISE_VIOLATION = "PromiseViolation"


def decide(zeta_value: float, a: float, b: float, gap: float = 0.0) -> Decision:
    if not a > b:
        raise ParameterError(f"need a > b, got a={a}, b={b}")
    if a - b < gap:
        raise ParameterError(f"a - b = {a - b} below the configured gap {gap}")
    if zeta_value > a:
        return Decision.ABOVE_A
    if zeta_value < b:
        return Decision.BELOW_B
    return Decision.PROMISE_VIOLATION


# --- reconstruction of cartesian moments ---------------------------------


@dataclass(frozen=True)
class FirstMomentEstimate:
    value: float
    magnitude: float
    sign: int  # +1, -1, or 0 when the Hadamard branches tie
    sign_reliable: bool
    path: str  # "diagonal" or "relative"
    anchor: int  # mode whose diagonal coordinate fixed the value


@dataclass(frozen=True)
class SecondMomentEstimate:
    value: float  # product of diagonal coordinates
    via_relative: float | None  # three squared coordinates; None without coupling
    discrepancy: float | None


def _stiffness(kind: str, A: SparseSymmetricMatrix, C: SparseSymmetricMatrix):
    if kind in ("q", "qq"):
        return A, False
    if kind in ("p", "pp"):
        return C, True
    raise ParameterError(f"unknown moment kind {kind!r}")


def _greek(bar: bool, j: int, k: int, M: int) -> int:
    return int(bar) * n_pairs(M) + pair_index(min(j, k), max(j, k), M)


def _hadamard_sign(vacuum: complex, amplitude: complex) -> int:
    """Sign from the two outcomes of mixing a component with the vacuum."""
    p_plus = abs(vacuum + amplitude) ** 2 / 2
    p_minus = abs(vacuum - amplitude) ** 2 / 2
    if p_plus > p_minus:
        return 1
    if p_minus > p_plus:
        return -1
    return 0


def _signed_coordinate(psi: MomentVector, g: int, bar: bool, scale: float) -> tuple[float, int]:
    # position-type coordinates carry a factor i; undo it before interfering
    phase = 1.0 if bar else -1j
    amp = phase * psi.sectors[1][g]
    sign = _hadamard_sign(complex(psi.sectors[0][()]), amp)
    return abs(amp) * psi.normalization / scale, sign


def reconstruct_first(
    psi: MomentVector,
    A: SparseSymmetricMatrix,
    C: SparseSymmetricMatrix,
    kind: str,
    j: int,
    tol: float = config.EXACT_TOL,
) -> FirstMomentEstimate:
    """Recover <q_j> (kind "q") or <p_j> (kind "p") from greek first moments.

    Uses the diagonal coordinate when mode j couples to the reference point;
    otherwise walks relative coordinates to the nearest mode that does,
    preferring lexicographically smallest neighbours.
    """
    S, bar = _stiffness(kind, A, C)
    M = S.dim
    if psi.order_max < 1:
        raise ParameterError("state carries no first moments")
    if not 0 <= j < M:
        raise StructuralError(f"mode {j} out of range")
    slack = S.diagonal_slack()
    dense = S.to_dense()

    if slack[j] > tol:
        mag, sign = _signed_coordinate(psi, _greek(bar, j, j, M), bar, math.sqrt(slack[j]))
        return FirstMomentEstimate(sign * mag if sign else mag, mag, sign, mag >= config.SIGN_THRESHOLD, "diagonal", j)

    parent = {j: None}
    queue = deque([j])
    anchor = None
    while queue:
        u = queue.popleft()
        if slack[u] > tol:
            anchor = u
            break
        for v in range(M):
            if v != u and dense[u, v] < 0 and v not in parent:
                parent[v] = u
                queue.append(v)
    if anchor is None:
        raise NotReconstructibleError(f"mode {j + 1} has no path to a mode coupled to the reference point")

    mag, sign = _signed_coordinate(psi, _greek(bar, anchor, anchor, M), bar, math.sqrt(slack[anchor]))
    value = sign * mag
    reliable = mag >= config.SIGN_THRESHOLD or mag == 0.0
    node = anchor
    while parent[node] is not None:
        prev = parent[node]
        a, b = min(prev, node), max(prev, node)
        dmag, dsign = _signed_coordinate(psi, _greek(bar, a, b, M), bar, math.sqrt(-dense[a, b]))
        diff = dsign * dmag  # x_a - x_b
        value = value + diff if prev == a else value - diff
        reliable = reliable and (dmag >= config.SIGN_THRESHOLD or dmag == 0.0)
        node = prev
    return FirstMomentEstimate(value, abs(value), int(np.sign(value)), reliable, "relative", anchor)


def reconstruct_second(
    psi: MomentVector,
    A: SparseSymmetricMatrix,
    C: SparseSymmetricMatrix,
    kind: str,
    j: int,
    jp: int,
    tol: float = config.EXACT_TOL,
) -> SecondMomentEstimate:
    """Recover <q_j q_j'> (kind "qq") or <p_j p_j'> (kind "pp").

    Primary value: product of the two diagonal coordinates over the square
    roots of their slacks.  When j != j' couple directly, the combination
    of the three squared coordinates (j,j'), (j,j), (j',j') is evaluated as
    well and the discrepancy between the two reported.
    """
    S, bar = _stiffness(kind[0], A, C)
    M = S.dim
    if psi.order_max < 2:
        raise ParameterError("state carries no second moments")
    slack = S.diagonal_slack()
    if slack[j] <= tol or slack[jp] <= tol:
        raise NotReconstructibleError(f"modes {j + 1}, {jp + 1} need positive slack for second moments")
    # two position-type slots contribute i * i = -1
    phase2 = 1.0 if bar else -1.0
    sec = psi.sectors[2]
    N = psi.normalization

    def square(a: int, b: int) -> float:
        g = _greek(bar, a, b, M)
        return float((phase2 * sec[g, g] * N).real)

    gj, gjp = _greek(bar, j, j, M), _greek(bar, jp, jp, M)
    product = float((phase2 * sec[gj, gjp] * N).real) / math.sqrt(slack[j] * slack[jp])

    relative = None
    coupling = S.to_dense()[j, jp]
    if j != jp and coupling < -tol:
        relative = 0.5 * (square(j, jp) / coupling + square(j, j) / slack[j] + square(jp, jp) / slack[jp])
    discrepancy = None if relative is None else abs(relative - product)
    return SecondMomentEstimate(product, relative, discrepancy)


def reconstruct(psi: MomentVector, A: SparseSymmetricMatrix, C: SparseSymmetricMatrix, target: tuple):
    """Dispatch on ``target``: ("q", j), ("p", j), ("qq", j, j') or ("pp", j, j')."""
    kind = target[0]
    if kind in ("q", "p"):
        return reconstruct_first(psi, A, C, kind, target[1])
    if kind in ("qq", "pp"):
        return reconstruct_second(psi, A, C, kind, target[1], target[2])
    raise ParameterError(f"unknown reconstruction target {target!r}")


@dataclass(frozen=True)
class Reconstruction:
    """All recoverable cartesian first and second moments; NaN where not."""

    q: np.ndarray
    p: np.ndarray
    qq: np.ndarray | None
    pp: np.ndarray | None
    max_discrepancy: float


def reconstruct_all(psi: MomentVector, A: SparseSymmetricMatrix, C: SparseSymmetricMatrix) -> Reconstruction:
    M = A.dim
    first = {"q": np.full(M, np.nan), "p": np.full(M, np.nan)}
    for kind in first:
        for j in range(M):
            try:
                first[kind][j] = reconstruct_first(psi, A, C, kind, j).value
            except NotReconstructibleError:
                pass
    second = {"qq": None, "pp": None}
    worst = 0.0
    if psi.order_max >= 2:
        for kind in second:
            out = np.full((M, M), np.nan)
            for j in range(M):
                for jp in range(M):
                    try:
                        est = reconstruct_second(psi, A, C, kind, j, jp)
                    except NotReconstructibleError:
                        continue
                    out[j, jp] = est.value
                    if est.discrepancy is not None:
                        worst = max(worst, est.discrepancy)
            second[kind] = out
    return Reconstruction(first["q"], first["p"], second["qq"], second["pp"], worst)

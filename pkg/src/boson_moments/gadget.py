"""Clock-register (Feynman-Kitaev) gadget emulating postselected circuits.

A circuit of L Hadamard/Toffoli gates on n qubits becomes a bosonic system
of (L+2) 2^n modes, labelled by a clock layer l = 1..L+2 and a basis state
j of the qubits.  Qubit 1 is the postselection register P (most significant
bit of j), qubit 2 the output register Q, the rest form R.  A rank-one
squeezing term of strength beta on the last layer with P = 1 creates a
single exponentially growing mode which amplifies the postselected branch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize

from . import config
from .dynamics import closed_form_evolution, evolve_first_moments
from .errors import (
    InstanceParseError,
    NumericalError,
    ParameterError,
    PostselectionImpossibleError,
    ScaleError,
    StructuralError,
)
from .hamiltonian import QuadraticHamiltonian, SparseSymmetricMatrix

FK_MODE_CAP = 4096
STATEVECTOR_QUBIT_CAP = 12
STATEVECTOR_GATE_CAP = 64
RELIABLE_AMPLIFICATION = 1e2

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


class Gate(NamedTuple):
    name: str  # "H" or "CCX"
    qubits: tuple[int, ...]  # 0-based; target last


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.n < 2:
            raise StructuralError("need at least the P and Q qubits")
        if not self.gates:
            raise StructuralError("circuit needs at least one gate")
        for g in self.gates:
            expected = {"H": 1, "CCX": 3}.get(g.name)
            if expected is None:
                raise StructuralError(f"unsupported gate {g.name!r}; only H and CCX are real-valued here")
            if len(g.qubits) != expected or len(set(g.qubits)) != expected:
                raise StructuralError(f"gate {g.name} needs {expected} distinct qubits, got {g.qubits}")
            if any(not 0 <= q < self.n for q in g.qubits):
                raise StructuralError(f"gate {g.name}{g.qubits} outside {self.n} qubits")

    @classmethod
    def build(cls, n: int, *gates: tuple) -> Circuit:
        """``Circuit.build(3, ("H", 0), ("CCX", 0, 1, 2))`` with 0-based qubits."""
        return cls(n, tuple(Gate(g[0], tuple(int(q) for q in g[1:])) for g in gates))

    @property
    def L(self) -> int:
        return len(self.gates)


def read_circuit(path: str | Path) -> Circuit:
    """Parse ``qubits n`` then one ``H t`` / ``CCX c1 c2 t`` per line (1-based)."""
    n = None
    gates = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "qubits":
                n = int(parts[1])
            elif parts[0] in ("H", "CCX"):
                gates.append(Gate(parts[0], tuple(int(q) - 1 for q in parts[1:])))
            else:
                raise ValueError(f"unknown gate {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise InstanceParseError(f"{path}:{lineno}: {exc}") from exc
    if n is None:
        raise InstanceParseError(f"{path}: missing 'qubits n' header")
    try:
        return Circuit(n, tuple(gates))
    except StructuralError as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc


def write_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n}"]
    for g in circuit.gates:
        lines.append(" ".join([g.name, *(str(q + 1) for q in g.qubits)]))
    return "\n".join(lines) + "\n"


def gate_matrix(gate: Gate, n: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix; qubit 0 is the most significant bit."""
    dim = 2**n
    if gate.name == "H":
        (q,) = gate.qubits
        return np.kron(np.kron(np.eye(2**q), _HADAMARD), np.eye(2 ** (n - q - 1)))
    c1, c2, tq = gate.qubits
    perm = np.arange(dim)
    bit = lambda q: 1 << (n - 1 - q)  # noqa: E731
    on = ((perm & bit(c1)) != 0) & ((perm & bit(c2)) != 0)
    perm = np.where(on, perm ^ bit(tq), perm)
    U = np.zeros((dim, dim))
    U[perm, np.arange(dim)] = 1.0
    return U


def _clock_layers(circuit: Circuit) -> list[np.ndarray]:
    """U_1 .. U_L followed by the extra identity step U_{L+1}."""
    return [gate_matrix(g, circuit.n) for g in circuit.gates] + [np.eye(2**circuit.n)]


def clock_chain(L: int, beta: float = 0.0) -> np.ndarray:
    """Jacobi matrix of the clock: 4 on the diagonal, -1 next to it, -beta^2 in the last corner."""
    X = 4.0 * np.eye(L + 2) - np.eye(L + 2, k=1) - np.eye(L + 2, k=-1)
    X[-1, -1] -= beta**2
    return X


@dataclass(frozen=True)
class FKInstance:
    circuit: Circuit
    beta: float
    A: np.ndarray
    projector: np.ndarray  # diagonal of Pi: last layer with P = 1
    e_plus: np.ndarray
    a_tilde: np.ndarray

    @property
    def L(self) -> int:
        return self.circuit.L

    @property
    def n(self) -> int:
        return self.circuit.n

    @property
    def modes(self) -> int:
        return self.A.shape[0]

    @property
    def C(self) -> np.ndarray:
        return np.eye(self.modes)

    def mode(self, layer: int, j: int) -> int:
        """Linear mode index of clock layer ``layer`` (1-based) and basis state ``j``."""
        return (layer - 1) * 2**self.n + j

    def hamiltonian(self) -> QuadraticHamiltonian:
        return QuadraticHamiltonian(
            SparseSymmetricMatrix.from_dense(self.A),
            SparseSymmetricMatrix.identity(self.modes),
            self.e_plus,
        )

    def initial_velocity(self) -> np.ndarray:
        v = np.zeros(self.modes)
        v[self.mode(1, 0)] = 1.0
        return v


def build_fk(circuit: Circuit, beta: float, check_beta: bool = True, cap: int = FK_MODE_CAP) -> FKInstance:
    """Stiffness A, squeezing E+ = -beta Pi and the generator A - (E+)^2."""
    if check_beta and not beta > 2:
        raise ParameterError(f"beta must exceed 2 for a guaranteed bound state, got {beta}")
    if beta < 0:
        raise ParameterError("beta must be non-negative")
    L, n = circuit.L, circuit.n
    dim_q = 2**n
    modes = (L + 2) * dim_q
    if modes > cap:
        raise ScaleError(f"gadget needs {modes} modes (cap {cap})", required=modes)
    A = 4.0 * np.eye(modes)
    for l, U in enumerate(_clock_layers(circuit)):  # l = 0 .. L, hop between layers l and l+1
        a, b = l * dim_q, (l + 1) * dim_q
        A[a : a + dim_q, b : b + dim_q] -= U.T
        A[b : b + dim_q, a : a + dim_q] -= U
    if np.max(np.abs(A - A.T)) > 0:
        raise NumericalError("FK stiffness matrix is not symmetric")
    proj = np.zeros(modes)
    proj[(L + 1) * dim_q + dim_q // 2 :] = 1.0
    e_plus = -beta * np.diag(proj)
    a_tilde = A - e_plus @ e_plus
    return FKInstance(circuit, float(beta), A, proj, e_plus, a_tilde)


@dataclass(frozen=True)
class ClockTransform:
    S: np.ndarray
    X0: np.ndarray
    X1: np.ndarray
    residual: float


def clock_transform(fk: FKInstance) -> ClockTransform:
    """S = sum_l |l><l| (x) U_{L+1} ... U_l and the block structure of S A~ S^T."""
    L, n = fk.L, fk.n
    dim_q = 2**n
    layers = _clock_layers(fk.circuit)
    S = np.zeros_like(fk.A)
    acc = np.eye(dim_q)
    for l in range(L + 1, -1, -1):  # l = L+1 .. 0 (0-based layer index)
        a = l * dim_q
        S[a : a + dim_q, a : a + dim_q] = acc
        if l > 0:
            acc = acc @ layers[l - 1]
    X0 = clock_chain(L)
    X1 = clock_chain(L, fk.beta)
    p1 = np.zeros(dim_q)
    p1[dim_q // 2 :] = 1.0
    expected = np.kron(X0, np.diag(1.0 - p1)) + np.kron(X1, np.diag(p1))
    residual = float(np.max(np.abs(S @ fk.a_tilde @ S.T - expected)))
    return ClockTransform(S, X0, X1, residual)


@dataclass(frozen=True)
class BoundState:
    kappa1: float
    alpha1: float
    overlap_first: float
    overlap_readout: float
    normalization: float
    L: int

    def amplitude(self, layer: int) -> float:
        """Component of the normalized bound state on clock layer ``layer`` (1-based)."""
        return self.normalization * math.sinh(layer * self.kappa1)

    def vector(self) -> np.ndarray:
        return np.array([self.amplitude(l) for l in range(1, self.L + 3)])


@dataclass(frozen=True)
class ClockSpectrum:
    gammas: np.ndarray
    modes: np.ndarray  # columns are the closed-form X0 eigenvectors
    bound_state: BoundState | None
    beta_sq_threshold: float
    kappa0: float
    x0_check_residual: float

    @property
    def beta_threshold(self) -> float:
        return math.sqrt(self.beta_sq_threshold)


KAPPA0 = math.log(2.0 + math.sqrt(3.0))  # acosh(2)


def beta_sq_threshold(L: int) -> float:
    """Smallest beta^2 for which the perturbed chain has a negative eigenvalue."""
    # sqrt(3) * coth((L+2) kappa0), written with (2+sqrt3)^(2(L+2))
    x = math.exp(-2 * (L + 2) * KAPPA0)
    return 2.0 + math.sqrt(3.0) * (1.0 + x) / (1.0 - x)


def quantization_residual(kappa: float, beta: float, L: int) -> float:
    """cosh k + sinh k coth((L+2) k) - beta^2; increasing in k."""
    return math.cosh(kappa) + math.sinh(kappa) / math.tanh((L + 2) * kappa) - beta**2


def solve_clock_spectrum(beta: float, L: int) -> ClockSpectrum:
    if L < 0:
        raise ParameterError(f"L must be >= 0, got {L}")
    size = L + 2
    l = np.arange(1, size + 1)
    gammas = 4.0 - 2.0 * np.cos(np.pi * l / (L + 3))
    modes = math.sqrt(2.0 / (L + 3)) * np.sin(np.outer(l, l) * np.pi / (L + 3))
    X0 = clock_chain(L)
    x0_check = float(np.max(np.abs(X0 @ modes - modes * gammas)))

    threshold = beta_sq_threshold(L)
    bound = None
    if beta**2 > threshold:
        lo, hi = 1e-8, math.acosh(beta**2)
        f_lo, f_hi = quantization_residual(lo, beta, L), quantization_residual(hi, beta, L)
        if not (f_lo < 0 < f_hi):
            raise NumericalError(
                f"quantization condition not bracketed on [{lo}, {hi}]: g={f_lo:.3e}, {f_hi:.3e} (beta={beta}, L={L})"
            )
        kappa = optimize.bisect(quantization_residual, lo, hi, args=(beta, L), xtol=1e-300, maxiter=200)
        sinh_sq = np.sinh(l * kappa) ** 2
        c1 = 1.0 / math.sqrt(float(sinh_sq.sum()))
        bound = BoundState(
            kappa1=kappa,
            alpha1=4.0 - 2.0 * math.cosh(kappa),
            overlap_first=c1**2 * sinh_sq[0],
            overlap_readout=c1**2 * sinh_sq[L],  # layer L+1
            normalization=c1,
            L=L,
        )
    return ClockSpectrum(gammas, modes, bound, threshold, KAPPA0, x0_check)


# --- brute-force statevector oracle ----------------------------------------


def _apply_gate(state: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    psi = state.reshape((2,) * n)
    if gate.name == "H":
        (q,) = gate.qubits
        psi = np.moveaxis(np.tensordot(_HADAMARD, psi, axes=([1], [q])), 0, q)
    else:
        c1, c2, tq = gate.qubits
        psi = psi.copy()
        sel = [slice(None)] * n
        sel[c1], sel[c2] = 1, 1
        sub = psi[tuple(sel)]
        t_axis = tq - (tq > c1) - (tq > c2)
        psi[tuple(sel)] = np.flip(sub, axis=t_axis)
    return psi.reshape(-1)


def simulate_statevector(circuit: Circuit) -> np.ndarray:
    if circuit.n > STATEVECTOR_QUBIT_CAP or circuit.L > STATEVECTOR_GATE_CAP:
        raise ScaleError(
            f"statevector oracle limited to {STATEVECTOR_QUBIT_CAP} qubits and {STATEVECTOR_GATE_CAP} gates"
        )
    state = np.zeros(2**circuit.n)
    state[0] = 1.0
    for g in circuit.gates:
        state = _apply_gate(state, g, circuit.n)
    return state


@dataclass(frozen=True)
class PostselectionOracle:
    delta: float
    outcome: float  # || <1_Q | Psi_1> ||^2
    psi1: np.ndarray


def brute_force_postselect(circuit: Circuit) -> PostselectionOracle:
    """Statevector reference: postselect P = 1, then weigh Q = 1."""
    psi = simulate_statevector(circuit).reshape(2, 2, -1)
    branch = psi[1]
    delta = float(np.linalg.norm(branch))
    if delta < 1e-14:
        raise PostselectionImpossibleError("no amplitude on P = 1; postselection impossible")
    psi1 = branch / delta
    outcome = float(np.sum(psi1[1] ** 2))
    return PostselectionOracle(delta, outcome, psi1.reshape(-1))


# --- the full pipeline -----------------------------------------------------


class Reliability(str, enum.Enum):
    RELIABLE = "Reliable"
    UNRELIABLE = "Unreliable"


@dataclass(frozen=True)
class PostselectionDecision:
    zeta_num: float
    zeta_den: float
    ratio: float
    accept: bool
    oracle_value: float
    delta: float
    t_f: float
    amplification: float  # W(t_f); 0 without a bound state
    status: Reliability
    near_threshold: bool  # ratio within 1/6 of 1/2

    def as_dict(self) -> dict:
        return {
            "zeta_num": self.zeta_num,
            "zeta_den": self.zeta_den,
            "ratio": self.ratio,
            "accept": self.accept,
            "oracle_value": self.oracle_value,
            "delta": self.delta,
            "t_f": self.t_f,
            "amplification": self.amplification,
            "status": self.status.value,
            "near_threshold": self.near_threshold,
        }


def amplification(bound: BoundState, delta: float, t: float) -> float:
    """W(t) = delta cosh(sqrt(-alpha1) t) <L+1|chi1><chi1|1>."""
    growth = math.sqrt(-bound.alpha1)
    return delta * math.cosh(growth * t) * bound.amplitude(bound.L + 1) * bound.amplitude(1)


def auto_final_time(bound: BoundState, delta: float, target: float = 1e6) -> float:
    """Smallest integer time with W(t) >= target."""
    base = delta * bound.amplitude(bound.L + 1) * bound.amplitude(1)
    t = math.acosh(max(1.0, target / base)) / math.sqrt(-bound.alpha1)
    return float(max(1, math.ceil(t)))


@dataclass(frozen=True)
class ReadoutLayer:
    momenta: np.ndarray  # <p> on layer L+1, indexed by basis state j
    zeta_num: float
    zeta_den: float


def readout_layer(fk: FKInstance, t: float) -> ReadoutLayer:
    """Evolve the gadget to time t and read momenta on layer L+1 with P = 1."""
    qdot0 = fk.initial_velocity()
    q, qdot = closed_form_evolution(fk.a_tilde, np.zeros(fk.modes), qdot0, t)
    p = qdot + fk.beta * fk.projector * q
    dim_q = 2**fk.n
    layer = p[fk.mode(fk.L + 1, 0) : fk.mode(fk.L + 1, 0) + dim_q]
    j = np.arange(dim_q)
    p_bit = (j >> (fk.n - 1)) & 1
    q_bit = (j >> (fk.n - 2)) & 1
    zeta_den = float(np.sum(layer[p_bit == 1] ** 2))
    zeta_num = float(np.sum(layer[(p_bit == 1) & (q_bit == 1)] ** 2))
    return ReadoutLayer(layer, zeta_num, zeta_den)


def run_postbqp(
    circuit: Circuit,
    beta: float,
    t_f: float | None = None,
    w_target: float = 1e6,
    check_beta: bool = True,
) -> PostselectionDecision:
    """Decide the postselected circuit from the bosonic readout ratio.

    ``t_f=None`` picks the smallest integer time at which the bound-state
    amplification W reaches ``w_target``; without a bound state it falls
    back to L + 2 and the decision is flagged unreliable.
    """
    oracle = brute_force_postselect(circuit)
    fk = build_fk(circuit, beta, check_beta=check_beta)
    bound = solve_clock_spectrum(beta, circuit.L).bound_state
    if t_f is None:
        t_f = auto_final_time(bound, oracle.delta, w_target) if bound else float(circuit.L + 2)
    w = amplification(bound, oracle.delta, t_f) if bound else 0.0

    read = readout_layer(fk, t_f)
    ratio = read.zeta_num / read.zeta_den if read.zeta_den > 0 else 0.0
    reliable = bound is not None and read.zeta_den > 0 and w >= RELIABLE_AMPLIFICATION
    return PostselectionDecision(
        zeta_num=read.zeta_num,
        zeta_den=read.zeta_den,
        ratio=ratio,
        accept=ratio > 0.5,
        oracle_value=oracle.outcome,
        delta=oracle.delta,
        t_f=float(t_f),
        amplification=w,
        status=Reliability.RELIABLE if reliable else Reliability.UNRELIABLE,
        near_threshold=abs(ratio - 0.5) < 1.0 / 6.0,
    )


# --- alternative hard families ---------------------------------------------


class AltFamily(str, enum.Enum):
    EMINUS_DOUBLED = "EminusDoubled"
    INDEFINITE_A = "IndefiniteA"


_Z = np.diag([1.0, -1.0])
_IY = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class AltFamilyReport:
    family: AltFamily
    A: np.ndarray
    C: np.ndarray
    F: np.ndarray
    residuals: dict[str, float] = field(default_factory=dict)


def build_alt_family(
    circuit: Circuit,
    beta: float,
    family: AltFamily | str,
    times: tuple[float, ...] = (0.5, 1.0, 2.0),
    check_beta: bool = True,
) -> AltFamilyReport:
    """Hard families without the symmetric squeezing term.

    EminusDoubled: two copies of the clock with A = A_FK (x) Z, C = 1 (x) Z,
    E- = beta Pi (x) iY.  Residuals cover the anticommutator, the square of
    E-, C A versus two FK copies, and (E-)^2 + C A versus A~ (x) 1.  The
    generator that the commutator dynamics of the real antisymmetric F
    actually produces, C A - (E-)^2, is reported against A~ (x) 1 as
    ``commutator_generator``.

    IndefiniteA: A = A~, C = 1, F = 0; ``q_trajectory`` is the largest
    relative deviation of q(t) from the E+ gadget over ``times``.
    """
    family = AltFamily(family)
    fk = build_fk(circuit, beta, check_beta=check_beta)
    if family is AltFamily.EMINUS_DOUBLED:
        A = np.kron(fk.A, _Z)
        C = np.kron(np.eye(fk.modes), _Z)
        Pi = np.diag(fk.projector)
        E = beta * np.kron(Pi, _IY)
        target = np.kron(fk.a_tilde, np.eye(2))
        residuals = {
            "anticommutator": float(np.max(np.abs(E @ C + C @ E))),
            "square": float(np.max(np.abs(E @ E + beta**2 * np.kron(Pi, np.eye(2))))),
            "fk_copies": float(np.max(np.abs(C @ A - np.kron(fk.A, np.eye(2))))),
            "identity": float(np.max(np.abs(E @ E + C @ A - target))),
            "commutator_generator": float(np.max(np.abs(C @ A - E @ E - target))),
        }
        return AltFamilyReport(family, A, C, E, residuals)

    H_ind = QuadraticHamiltonian.from_dense(fk.a_tilde, np.eye(fk.modes))
    H_fk = fk.hamiltonian()
    z0 = np.concatenate([np.zeros(fk.modes), fk.initial_velocity()])
    worst = 0.0
    for t in times:
        q_ind = evolve_first_moments(H_ind, z0, t).state[: fk.modes]
        q_fk = evolve_first_moments(H_fk, z0, t).state[: fk.modes]
        worst = max(worst, float(np.max(np.abs(q_ind - q_fk)) / max(1.0, np.max(np.abs(q_fk)))))
    return AltFamilyReport(family, fk.a_tilde, np.eye(fk.modes), np.zeros_like(fk.A), {"q_trajectory": worst})

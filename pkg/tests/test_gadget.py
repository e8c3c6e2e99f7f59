import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given
from hypothesis import strategies as st

from boson_moments.errors import (
    InstanceParseError,
    ParameterError,
    PostselectionImpossibleError,
    ScaleError,
    StructuralError,
)
from boson_moments.gadget import (
    KAPPA0,
    AltFamily,
    Circuit,
    Reliability,
    beta_sq_threshold,
    brute_force_postselect,
    build_alt_family,
    build_fk,
    clock_transform,
    gate_matrix,
    quantization_residual,
    read_circuit,
    run_postbqp,
    solve_clock_spectrum,
    write_circuit,
)
from oracles import clock_chain_dense, gate_unitary, postselect_oracle

H_P = Circuit.build(2, ("H", 0))
THREE = Circuit.build(3, ("H", 0), ("H", 2), ("CCX", 0, 2, 1))


def random_circuit(rng, n, L):
    gates = []
    for _ in range(L):
        if rng.random() < 0.5:
            gates.append(("H", int(rng.integers(n))))
        else:
            gates.append(("CCX", *(int(q) for q in rng.permutation(n)[:3])))
    return Circuit.build(n, *gates)


# --- circuits ---------------------------------------------------------------


def test_circuit_validation():
    with pytest.raises(StructuralError):
        Circuit.build(2, ("CCX", 0, 1, 2))
    with pytest.raises(StructuralError):
        Circuit.build(3, ("CCX", 0, 0, 1))
    with pytest.raises(StructuralError):
        Circuit.build(3, ("X", 0))
    with pytest.raises(StructuralError):
        Circuit(2, ())


@given(st.integers(3, 4), st.integers(0, 2**32 - 1))
def test_gate_matrices_match_basis_action(n, seed):
    c = random_circuit(np.random.default_rng(seed), n, 4)
    for g in c.gates:
        assert np.allclose(gate_matrix(g, n), gate_unitary(g.name, g.qubits, n), atol=1e-15)


def test_circuit_file_roundtrip(tmp_path):
    f = tmp_path / "c.circ"
    f.write_text(write_circuit(THREE))
    assert read_circuit(f) == THREE


@pytest.mark.parametrize("body", ["H 1\n", "qubits 2\nX 1\n", "qubits 2\nH\n", "qubits 2\nH 3\n"])
def test_circuit_file_errors(tmp_path, body):
    f = tmp_path / "c.circ"
    f.write_text(body)
    with pytest.raises(InstanceParseError):
        read_circuit(f)


# --- FK matrices ------------------------------------------------------------


def test_fk_dimensions():
    fk = build_fk(H_P, 3.0)
    assert fk.A.shape == (12, 12) and int(fk.projector.sum()) == 2
    assert np.allclose(fk.e_plus @ fk.e_plus, 9.0 * np.diag(fk.projector))
    assert np.allclose(fk.a_tilde, fk.a_tilde.T)


def test_fk_beta_zero_band():
    fk = build_fk(THREE, 0.0, check_beta=False)
    w = np.linalg.eigvalsh(fk.a_tilde)
    assert w.min() >= 2 - 1e-12 and w.max() <= 6 + 1e-12


def test_fk_needs_beta_above_two():
    with pytest.raises(ParameterError):
        build_fk(H_P, 2.0)


def test_fk_scale_cap():
    with pytest.raises(ScaleError):
        build_fk(THREE, 3.0, cap=10)


def test_clock_transform_hadamard():
    ct = clock_transform(build_fk(H_P, 3.0))
    assert ct.residual <= 1e-10
    assert np.allclose(ct.X1, clock_chain_dense(1, 3.0))


def test_clock_transform_beta_zero():
    ct = clock_transform(build_fk(THREE, 0.0, check_beta=False))
    assert np.array_equal(ct.X0, ct.X1) and ct.residual <= 1e-10
    # beta = 0: S A S^T is 2^n copies of the clock chain
    assert np.allclose(ct.S @ build_fk(THREE, 0.0, check_beta=False).A @ ct.S.T, np.kron(ct.X0, np.eye(8)))


@given(st.integers(2, 4), st.integers(1, 6), st.floats(2.05, 5.0), st.integers(0, 2**32 - 1))
def test_clock_transform_random(n, L, beta, seed):
    rng = np.random.default_rng(seed)
    if n == 2:
        gates = [("H", int(rng.integers(2))) for _ in range(L)]
        c = Circuit.build(2, *gates)
    else:
        c = random_circuit(rng, n, L)
    assert clock_transform(build_fk(c, beta)).residual <= 1e-10


# --- clock spectrum ---------------------------------------------------------


def test_spectrum_l0_beta3():
    b = solve_clock_spectrum(3.0, 0).bound_state
    assert b.alpha1 == pytest.approx((-1 - math.sqrt(85)) / 2, abs=1e-10)
    assert b.alpha1 == pytest.approx(np.linalg.eigvalsh([[4, -1], [-1, -5]])[0], abs=1e-10)
    assert b.alpha1 <= 4 - 9


def test_spectrum_beta_zero_l3():
    spec = solve_clock_spectrum(0.0, 3)
    assert spec.bound_state is None
    closed = 4 - 2 * np.cos(np.pi * np.arange(1, 6) / 6)
    assert np.allclose(spec.gammas, closed, atol=0)
    assert np.allclose(np.linalg.eigvalsh(clock_chain_dense(3)), closed, atol=1e-10)


def test_threshold_formula():
    for L in (0, 3, 20):
        x = (2 + math.sqrt(3)) ** (2 * (L + 2))
        assert beta_sq_threshold(L) == pytest.approx(2 + math.sqrt(3) * (x + 1) / (x - 1), rel=1e-14)
    assert KAPPA0 == pytest.approx(math.acosh(2))
    assert solve_clock_spectrum(3.0, 2).beta_threshold == pytest.approx(math.sqrt(beta_sq_threshold(2)))


def test_no_bound_state_below_threshold():
    beta = math.sqrt(beta_sq_threshold(4)) - 1e-3
    assert solve_clock_spectrum(beta, 4).bound_state is None
    assert np.linalg.eigvalsh(clock_chain_dense(4, beta))[0] > 0


@pytest.mark.parametrize("beta", [2.1, 3.0, 5.0])
def test_unique_negative_eigenvalue(beta):
    for L in range(21):
        spec = solve_clock_spectrum(beta, L)
        w = np.linalg.eigvalsh(clock_chain_dense(L, beta))
        assert np.count_nonzero(w < 0) == 1
        b = spec.bound_state
        assert b.alpha1 == pytest.approx(w[0], abs=1e-10)
        assert b.alpha1 == pytest.approx(4 - 2 * math.cosh(b.kappa1), abs=1e-10)
        assert b.alpha1 <= 4 - beta**2
        assert abs(quantization_residual(b.kappa1, beta, L)) <= 1e-10
        assert np.allclose(np.linalg.norm(b.vector()), 1)
        assert spec.x0_check_residual <= 1e-10


@pytest.mark.parametrize("beta", [2.1, 3.0, 5.0])
def test_bound_state_vector_is_eigenvector(beta):
    for L in (0, 4, 12):
        b = solve_clock_spectrum(beta, L).bound_state
        v = b.vector()
        assert np.allclose(clock_chain_dense(L, beta) @ v, b.alpha1 * v, atol=1e-9)


@pytest.mark.parametrize("beta", [2.1, 3.0, 5.0])
def test_first_layer_overlap_scaling(beta):
    vals = []
    for L in range(2, 21):
        b = solve_clock_spectrum(beta, L).bound_state
        vals.append(b.overlap_first * (L + 2) * math.exp(2 * L * b.kappa1))
    assert min(vals) > 1e-3
    assert all(y >= x for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize("beta", [2.1, 3.0, 5.0])
def test_readout_overlap_analytic_bound(beta):
    # |<L+1|chi1>|^2 >= 2 sinh k e^{-3k} (1 - 2 e^{-2k}); the 5% figure is
    # checked separately in the acceptance suite
    for L in range(1, 21):
        k = solve_clock_spectrum(beta, L).bound_state.kappa1
        bound = 2 * math.sinh(k) * math.exp(-3 * k) * (1 - 2 * math.exp(-2 * k))
        assert solve_clock_spectrum(beta, L).bound_state.overlap_readout >= bound


def test_x0_cosine_is_contractive():
    for L in (0, 5, 20):
        lam, V = np.linalg.eigh(clock_chain_dense(L))
        for t in np.linspace(0, 100, 51):
            assert np.linalg.norm(V @ np.diag(np.cos(np.sqrt(lam) * t)) @ V.T, 2) <= 1 + 1e-12


# --- statevector oracle -------------------------------------------------------


def test_oracle_hadamard_on_p():
    o = brute_force_postselect(H_P)
    assert o.delta == pytest.approx(1 / math.sqrt(2)) and o.outcome == pytest.approx(0)


def test_oracle_product_state():
    o = brute_force_postselect(Circuit.build(2, ("H", 0), ("H", 1)))
    assert o.delta == pytest.approx(1 / math.sqrt(2)) and o.outcome == pytest.approx(0.5)


def test_oracle_impossible():
    with pytest.raises(PostselectionImpossibleError):
        brute_force_postselect(Circuit.build(3, ("H", 1), ("H", 2)))


@given(st.integers(2, 4), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_oracle_matches_full_unitary(n, L, seed):
    rng = np.random.default_rng(seed)
    if n == 2:
        c = Circuit.build(2, *[("H", int(rng.integers(2))) for _ in range(L)])
    else:
        c = random_circuit(rng, n, L)
    delta, outcome = postselect_oracle(n, [(g.name, *g.qubits) for g in c.gates])
    if delta < 1e-14:
        with pytest.raises(PostselectionImpossibleError):
            brute_force_postselect(c)
        return
    o = brute_force_postselect(c)
    assert o.delta == pytest.approx(delta, abs=1e-12) and o.outcome == pytest.approx(outcome, abs=1e-12)


def test_oracle_caps():
    with pytest.raises(ScaleError):
        brute_force_postselect(Circuit.build(13, ("H", 0)))


# --- decision pipeline --------------------------------------------------------


def test_run_postbqp_deterministic_outcome():
    c = Circuit.build(3, ("H", 0), ("H", 2), ("H", 2))
    d = run_postbqp(c, 3.0)
    assert abs(d.ratio - d.oracle_value) <= 1e-3
    assert not d.accept and d.status is Reliability.RELIABLE
    assert d.amplification >= 1e6


def test_run_postbqp_accepts():
    c = Circuit.build(3, ("H", 1), ("H", 2), ("CCX", 1, 2, 0))
    d = run_postbqp(c, 3.0)
    assert d.oracle_value == pytest.approx(1) and d.accept and abs(d.ratio - 1) <= 1e-3


def test_run_postbqp_beta_zero_unreliable():
    d = run_postbqp(THREE, 0.0, check_beta=False)
    assert d.status is Reliability.UNRELIABLE and d.amplification == 0


def test_run_postbqp_time_zero_unreliable():
    d = run_postbqp(THREE, 3.0, t_f=0.0)
    assert d.zeta_den == 0 and d.ratio == 0 and d.status is Reliability.UNRELIABLE


def test_ratio_bounded():
    rng = np.random.default_rng(4)
    for _ in range(10):
        c = random_circuit(rng, 3, 4)
        try:
            d = run_postbqp(c, 2.5)
        except PostselectionImpossibleError:
            continue
        assert -1e-12 <= d.ratio <= 1 + 1e-12 and d.zeta_num <= d.zeta_den * (1 + 1e-12)


# --- alternative families ---------------------------------------------------


@pytest.mark.parametrize("circuit", [H_P, THREE])
def test_eminus_doubled_identities(circuit):
    rep = build_alt_family(circuit, 3.0, AltFamily.EMINUS_DOUBLED)
    for key in ("anticommutator", "square", "fk_copies", "identity"):
        assert rep.residuals[key] <= 1e-12, key
    # the commutator dynamics of a real antisymmetric F carries the opposite sign of beta^2 Pi
    assert rep.residuals["commutator_generator"] == pytest.approx(2 * 9.0)
    assert np.allclose(rep.F, -rep.F.T)


@pytest.mark.parametrize("circuit", [H_P, THREE])
def test_indefinite_family_reproduces_gadget(circuit):
    rep = build_alt_family(circuit, 3.0, "IndefiniteA")
    assert rep.residuals["q_trajectory"] <= 1e-8
    assert np.linalg.eigvalsh(rep.A)[0] < 0


@pytest.mark.parametrize("beta", [2.1, 3.0, 5.0])
def test_readout_overlap_closed_form(beta):
    # sum_{l=1}^{L+2} sinh^2(l k) = (sinh((2L+5) k) / sinh k - (2L+5)) / 4
    for L in range(21):
        b = solve_clock_spectrum(beta, L).bound_state
        k = b.kappa1
        closed = 4 * math.sinh((L + 1) * k) ** 2 / (math.sinh((2 * L + 5) * k) / math.sinh(k) - (2 * L + 5))
        assert b.overlap_readout == pytest.approx(closed, rel=1e-10)
        w, V = np.linalg.eigh(clock_chain_dense(L, beta))
        assert b.overlap_readout == pytest.approx(V[L, 0] ** 2, rel=1e-8)

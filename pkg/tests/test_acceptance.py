"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py`` for just the summary lines.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from boson_moments.dynamics import evolve_first_moments, evolve_moment_vector  # noqa: E402
from boson_moments.encoding import build_incidence_factor  # noqa: E402
from boson_moments.gadget import AltFamily, Circuit, build_alt_family, run_postbqp, solve_clock_spectrum  # noqa: E402
from boson_moments.hamiltonian import QuadraticHamiltonian, SparseSymmetricMatrix, classify  # noqa: E402
from boson_moments.readout import reconstruct_first, reconstruct_second  # noqa: E402
from boson_moments.walk import WalkGraph, bosonic_amplitudes, embed_walk, verify_walk_equivalence  # noqa: E402
from circuits import engineered_circuits  # noqa: E402
from oracles import clock_chain_dense, encoded_oracle, random_cartesian, random_stiffness  # noqa: E402
from pipeline import encoded_start  # noqa: E402

TIE_TOL = 1e-12


def report(number: int, ok: bool, detail: str) -> None:
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()


def check(number: int, ok: bool, detail: str) -> None:
    report(number, ok, detail)
    assert ok, detail


def S(A):
    return SparseSymmetricMatrix.from_dense(np.atleast_2d(A))


# 1 ---------------------------------------------------------------------------


def test_criterion_1_factorization():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        M = int(rng.integers(1, 33))
        d = int(rng.integers(1, 7))
        A = random_stiffness(rng, M, d=d)
        B = build_incidence_factor(S(A)).matrix()
        worst = max(worst, float(np.max(np.abs((B @ B.T).toarray() - A))))
    elapsed = time.perf_counter() - start
    check(1, worst <= 1e-12 and elapsed < 10, f"200 instances, max |BB^T - A| = {worst:.2e}, {elapsed:.2f} s")


# 2 and 3 ---------------------------------------------------------------------


def _inertial_suite():
    rng = np.random.default_rng(202)
    for _ in range(50):
        M = int(rng.integers(1, 5))
        R = int(rng.integers(1, 4))
        A, C = random_stiffness(rng, M), random_stiffness(rng, M)
        yield A, C, random_cartesian(rng, M, R, count=5), R


def test_criterion_2_oracle_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for A, C, cart, R in _inertial_suite():
        H0, psi0 = encoded_start(A, C, cart, R)
        for t in (0.1, 1.0, 10.0):
            psi = evolve_moment_vector(H0, psi0, t).state
            ref = encoded_oracle(A, C, cart, R, t)
            for r in range(R + 1):
                dev = np.max(np.abs(np.asarray(psi.sectors[r]) - ref[r] / psi0.normalization), initial=0.0)
                worst = max(worst, float(dev))
    elapsed = time.perf_counter() - start
    check(
        2,
        worst <= 1e-8 and elapsed < 60,
        f"50 instances x 3 times, max amplitude deviation = {worst:.2e}, {elapsed:.2f} s",
    )


def test_criterion_3_unitarity():
    worst = 0.0
    for A, C, cart, R in _inertial_suite():
        H0, psi0 = encoded_start(A, C, cart, R)
        for t in (0.1, 1.0, 10.0, 25.0, 50.0, 100.0):
            worst = max(worst, abs(evolve_moment_vector(H0, psi0, t).state.norm() - 1.0))
    check(3, worst <= 1e-8, f"max | ||psi(t)|| - 1 | over t <= 100 = {worst:.2e}")


# 4 ---------------------------------------------------------------------------


def test_criterion_4_walk_equivalence():
    rng = np.random.default_rng(404)
    worst_dev = worst_norm = 0.0
    for _ in range(50):
        M = int(rng.integers(2, 33))
        p = rng.uniform(0.05, 0.5)
        edges = [(j, k) for j in range(M) for k in range(j + 1, M) if rng.random() < p]
        emb = embed_walk(WalkGraph.from_edges(M, edges))
        amp0 = rng.normal(size=M) + 1j * rng.normal(size=M)
        amp0 /= np.linalg.norm(amp0)
        for t in (0.5, 5.0, 50.0, 100.0):
            worst_dev = max(worst_dev, verify_walk_equivalence(emb, amp0, t))
            worst_norm = max(worst_norm, abs(np.linalg.norm(bosonic_amplitudes(emb, amp0, t)) - 1.0))
    check(
        4,
        worst_dev <= 1e-8 and worst_norm <= 1e-8,
        f"50 graphs, max amplitude deviation = {worst_dev:.2e}, max norm drift = {worst_norm:.2e}",
    )


# 5 ---------------------------------------------------------------------------


def test_criterion_5_clock_spectra():
    start = time.perf_counter()
    gamma_err = 0.0
    for L in range(21):
        spec = solve_clock_spectrum(0.0, L)
        closed = 4 - 2 * np.cos(np.pi * np.arange(1, L + 3) / (L + 3))
        dense = np.linalg.eigvalsh(clock_chain_dense(L))
        gamma_err = max(gamma_err, float(np.max(np.abs(spec.gammas - closed))), float(np.max(np.abs(dense - closed))))
    unique = True
    alpha_err = 0.0
    below_bound = True
    min_overlap = math.inf
    worst_case = None
    for beta in (2.1, 3.0, 5.0):
        for L in range(21):
            b = solve_clock_spectrum(beta, L).bound_state
            w = np.linalg.eigvalsh(clock_chain_dense(L, beta))
            unique &= b is not None and int(np.count_nonzero(w < 0)) == 1
            alpha_err = max(alpha_err, abs(b.alpha1 - w[0]), abs(b.alpha1 - (4 - 2 * math.cosh(b.kappa1))))
            below_bound &= b.alpha1 <= 4 - beta**2
            if b.overlap_readout < min_overlap:
                min_overlap, worst_case = b.overlap_readout, (beta, L)
    elapsed = time.perf_counter() - start
    parts = {
        "gamma_l": gamma_err <= 1e-10,
        "unique negative": unique,
        "alpha1": alpha_err <= 1e-10,
        "alpha1 <= 4 - beta^2": below_bound,
        "readout overlap >= 0.05": min_overlap >= 0.05,
        "runtime": elapsed < 30,
    }
    failed = [k for k, v in parts.items() if not v]
    detail = (
        f"gamma err {gamma_err:.1e}, alpha1 err {alpha_err:.1e}, "
        f"min readout overlap {min_overlap:.4f} at beta={worst_case[0]}, L={worst_case[1]}, {elapsed:.2f} s"
    )
    if failed:
        detail += "; failing: " + ", ".join(failed)
    check(5, not failed, detail)


# 6 ---------------------------------------------------------------------------


def test_criterion_6_postbqp_soundness():
    start = time.perf_counter()
    agree = shrink = 0
    circuits = engineered_circuits()
    for c in circuits:
        d = run_postbqp(c, 3.0)
        later = run_postbqp(c, 3.0, t_f=d.t_f + c.L)
        agree += d.accept == (d.oracle_value > 0.5)
        # non-increase up to a numerical tie
        shrink += abs(later.ratio - later.oracle_value) <= abs(d.ratio - d.oracle_value) + TIE_TOL
    elapsed = time.perf_counter() - start
    ok = agree == len(circuits) == 20 and shrink >= 18 and elapsed < 300
    check(6, ok, f"decisions agree {agree}/20, error non-increasing at t_f + L in {shrink}/20, {elapsed:.2f} s")


# 7 ---------------------------------------------------------------------------


def test_criterion_7_alternative_families():
    worst_identity = worst_traj = 0.0
    for c in (Circuit.build(2, ("H", 0)), Circuit.build(3, ("H", 0), ("H", 2), ("CCX", 0, 2, 1))):
        rep = build_alt_family(c, 3.0, AltFamily.EMINUS_DOUBLED)
        worst_identity = max(worst_identity, *(rep.residuals[k] for k in ("anticommutator", "square", "identity")))
        worst_traj = max(worst_traj, build_alt_family(c, 3.0, AltFamily.INDEFINITE_A).residuals["q_trajectory"])
    check(
        7,
        worst_identity <= 1e-12 and worst_traj <= 1e-8,
        f"identity residual {worst_identity:.1e}, IndefiniteA q(t) deviation {worst_traj:.1e}",
    )


# 8 ---------------------------------------------------------------------------


def test_criterion_8_reconstruction():
    rng = np.random.default_rng(808)
    err = disc = 0.0
    sign_checks = sign_fail = 0
    for _ in range(50):
        M = int(rng.integers(1, 7))
        A = random_stiffness(rng, M, positive_slack=True)
        C = random_stiffness(rng, M, positive_slack=True)
        q = rng.normal(size=M) * 10.0 ** rng.integers(-5, 1, size=M)
        p = rng.normal(size=M)
        Xq, Xp = rng.normal(size=(M, M)), rng.normal(size=(M, M))
        Qq, Pp = Xq + Xq.T, Xp + Xp.T
        cart = {}
        for j in range(M):
            cart[(j,)] = q[j]
            cart[(M + j,)] = p[j]
            for k in range(M):
                cart[(j, k)] = Qq[j, k]
                cart[(M + j, M + k)] = Pp[j, k]
        _, psi = encoded_start(A, C, cart, 2)
        for kind, truth, stiff in (("q", q, A), ("p", p, C)):
            for j in range(M):
                est = reconstruct_first(psi, S(A), S(C), kind, j)
                err = max(err, abs(est.value - truth[j]))
                if abs(truth[j]) >= 1e-6:
                    sign_checks += 1
                    sign_fail += est.sign != np.sign(truth[j])
        for kind, truth in (("qq", Qq), ("pp", Pp)):
            for j in range(M):
                for jp in range(M):
                    est = reconstruct_second(psi, S(A), S(C), kind, j, jp)
                    err = max(err, abs(est.value - truth[j, jp]))
                    if est.discrepancy is not None:
                        disc = max(disc, est.discrepancy)
    ok = err <= 1e-10 and disc <= 1e-10 and sign_fail == 0
    check(
        8,
        ok,
        f"50 instances, max error {err:.1e}, two-formula discrepancy {disc:.1e}, "
        f"signs wrong {sign_fail}/{sign_checks}",
    )


# 9 ---------------------------------------------------------------------------


def test_criterion_9_squeezing_boundary():
    squeeze = QuadraticHamiltonian.from_dense([[1.0]], [[-1.0]])
    oscillator = QuadraticHamiltonian.from_dense([[1.0]], [[1.0]])
    z = evolve_first_moments(squeeze, [1.0, -1.0], 5.0).state
    want = math.exp(5.0) * np.array([1.0, -1.0])
    rel = float(np.max(np.abs(z - want)) / np.max(np.abs(want)))
    unbounded = not classify(squeeze).bounded_dynamics
    bounded = classify(oscillator).bounded_dynamics
    check(
        9,
        unbounded and bounded and rel <= 1e-8,
        f"squeezing unbounded={unbounded}, oscillator bounded={bounded}, e^t growth rel err {rel:.1e}",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "--no-header", "-p", "no:cacheprovider"]))

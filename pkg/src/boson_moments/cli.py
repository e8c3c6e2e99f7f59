"""Command-line entry point ``boson-moments``.

Numeric output is CSV with 17 significant digits.  Each command also emits a
JSON summary.  With ``--out DIR`` both go to files in DIR and the summary is
printed; otherwise CSV goes to stdout and the summary to stderr.  Exit codes:
0 success, 1 parse error, 2 precondition violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config
from .dynamics import effective_hamiltonian, evolve_moment_vector, resource_estimate
from .encoding import GreekIndex, build_incidence_factor, encode_state, n_pairs, to_greek_moments
from .errors import InstanceParseError, NumericalError, PreconditionError, StructuralError
from .gadget import (
    AltFamily,
    build_alt_family,
    build_fk,
    clock_transform,
    read_circuit,
    run_postbqp,
    solve_clock_spectrum,
)
from .hamiltonian import classify, validate
from .instance import Instance, load_instance
from .readout import IndexSetSpec, decide, reconstruct_all, zeta
from .walk import embed_walk, read_edge_list, verify_walk_equivalence

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 1, 2, 3


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _emit(args, tables: dict[str, str], summary: dict) -> None:
    """Write CSV tables and the JSON summary per the --out convention."""
    text = json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, body in tables.items():
            (out / f"{name}.csv").write_text(body)
        (out / "summary.json").write_text(text)
        sys.stdout.write(text)
        return
    for body in tables.values():
        sys.stdout.write(body)
    sys.stderr.write(text)


# --- instance pipeline -----------------------------------------------------


def _prepare(inst: Instance, tol: float):
    H = inst.hamiltonian
    if H.has_mixed_terms:
        raise StructuralError("moment encoding needs F = 0 (inertial coupling)")
    B = build_incidence_factor(H.A, tol)
    D = build_incidence_factor(H.C, tol)
    if inst.mode == "cartesian-input":
        greek = to_greek_moments(B, D, inst.moment_map())
    else:
        greek = inst.moment_map()
    psi0 = encode_state(greek, 2 * n_pairs(inst.M), inst.resolved_order_max())
    return B, D, psi0


def _times(args, inst: Instance) -> list[float]:
    return sorted(args.t) if args.t else list(inst.times)


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    report = validate(inst.hamiltonian, args.tol, args.max_dense_modes)
    summary = report.as_dict()
    summary["classification"] = classify(inst.hamiltonian, max_dense=args.max_dense_modes).as_dict()
    sys.stdout.write(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_factor(args) -> int:
    inst = load_instance(args.instance)
    rows = []
    for name, S in (("B", inst.hamiltonian.A), ("D", inst.hamiltonian.C)):
        fac = build_incidence_factor(S, args.tol)
        for (j, k), entries in fac.columns.items():
            for r, v in entries:
                rows.append((name, r + 1, j + 1, k + 1, v))
    table = _csv_text(["factor", "row", "pair_j", "pair_k", "value"], rows)
    summary = {"M": inst.M, "K": n_pairs(inst.M), "nonzeros": len(rows)}
    _emit(args, {"factors": table}, summary)
    return EXIT_OK


def cmd_evolve(args) -> int:
    inst = load_instance(args.instance)
    B, D, psi0 = _prepare(inst, args.tol)
    H0 = effective_hamiltonian(B, D)
    spec = inst.readout or IndexSetSpec.everything()
    zrows, mrows, per_time = [], [], []
    for t in _times(args, inst):
        res = evolve_moment_vector(H0, psi0, t, args.tol_evolve, args.cap_dense)
        pop = zeta(res.state, spec, t)
        decision = None
        if inst.decision is not None:
            d = inst.decision
            decision = decide(pop.zeta, d["a"], d["b"], d.get("gap", 0.0)).value
        zrows.append((t, pop.zeta, pop.contributing_count, decision or ""))
        for key, amp in res.state.nonzero_items(cutoff=args.cutoff):
            label = " ".join(str(GreekIndex.from_linear(g, inst.M)) for g in key) or "vac"
            m = amp * res.state.normalization
            mrows.append((t, len(key), label, m.real, m.imag))
        per_time.append(
            {
                "time": t,
                "zeta": pop.zeta,
                "contributing": pop.contributing_count,
                "decision": decision,
                "method": res.method,
                "residual_estimate": res.residual_estimate,
                "norm": res.state.norm(),
            }
        )
    summary = {"M": inst.M, "order_max": psi0.order_max, "normalization": psi0.normalization, "readout": str(spec)}
    summary["times"] = per_time
    summary["status"] = "ok"
    _emit(
        args,
        {
            "zeta": _csv_text(["time", "zeta", "contributing", "decision"], zrows),
            "moments": _csv_text(["time", "order", "index", "re", "im"], mrows),
        }
        if args.out
        else {"zeta": _csv_text(["time", "zeta", "contributing", "decision"], zrows)},
        summary,
    )
    return EXIT_OK


def cmd_readout(args) -> int:
    inst = load_instance(args.instance)
    B, D, psi0 = _prepare(inst, args.tol)
    H0 = effective_hamiltonian(B, D)
    H = inst.hamiltonian
    rows, worst = [], 0.0
    for t in _times(args, inst):
        psi = evolve_moment_vector(H0, psi0, t, args.tol_evolve, args.cap_dense).state
        rec = reconstruct_all(psi, H.A, H.C)
        worst = max(worst, rec.max_discrepancy)
        for kind, vec in (("q", rec.q), ("p", rec.p)):
            for j, v in enumerate(vec):
                rows.append((t, kind, j + 1, "", v))
        for kind, mat in (("qq", rec.qq), ("pp", rec.pp)):
            if mat is None:
                continue
            for j in range(inst.M):
                for jp in range(j, inst.M):
                    rows.append((t, kind, j + 1, jp + 1, mat[j, jp]))
    table = _csv_text(["time", "kind", "j", "jp", "value"], rows)
    _emit(args, {"reconstruction": table}, {"M": inst.M, "max_discrepancy": worst})
    return EXIT_OK


def cmd_walk(args) -> int:
    graph = read_edge_list(args.graph)
    emb = embed_walk(graph, args.c)
    M = graph.vertices
    if args.random_start:
        rng = np.random.default_rng(args.seed)
        amp0 = rng.normal(size=M) + 1j * rng.normal(size=M)
        amp0 /= np.linalg.norm(amp0)
    else:
        amp0 = np.zeros(M, dtype=complex)
        amp0[args.start - 1] = 1.0
    from .walk import bosonic_amplitudes

    rows, worst = [], 0.0
    for t in sorted(args.t or [1.0]):
        dev = verify_walk_equivalence(emb, amp0, t)
        norm = float(np.linalg.norm(bosonic_amplitudes(emb, amp0, t)))
        worst = max(worst, dev)
        rows.append((t, dev, norm))
    table = _csv_text(["time", "deviation", "norm"], rows)
    summary = {"vertices": M, "shift_c": emb.shift_c, "max_deviation": worst, "max_degree": graph.max_degree}
    _emit(args, {"walk": table}, summary)
    return EXIT_OK


def cmd_postbqp_spectrum(args) -> int:
    rows = []
    for beta in sorted(args.beta):
        for L in sorted(args.L):
            spec = solve_clock_spectrum(beta, L)
            for l, g in enumerate(spec.gammas, 1):
                rows.append((beta, L, "gamma", l, g))
            rows.append((beta, L, "beta_sq_threshold", "", spec.beta_sq_threshold))
            b = spec.bound_state
            if b is not None:
                rows.append((beta, L, "kappa1", "", b.kappa1))
                rows.append((beta, L, "alpha1", "", b.alpha1))
                rows.append((beta, L, "overlap_first", "", b.overlap_first))
                rows.append((beta, L, "overlap_readout", "", b.overlap_readout))
    table = _csv_text(["beta", "L", "quantity", "l", "value"], rows)
    _emit(args, {"spectrum": table}, {"beta": sorted(args.beta), "L": sorted(args.L), "rows": len(rows)})
    return EXIT_OK


def cmd_postbqp_build(args) -> int:
    circuit = read_circuit(args.circuit)
    beta = args.beta[0]
    fk = build_fk(circuit, beta, check_beta=not args.no_beta_check)
    rows = [("clock_transform", clock_transform(fk).residual)]
    for fam in AltFamily:
        rep = build_alt_family(circuit, beta, fam, check_beta=not args.no_beta_check)
        rows.extend((f"{fam.value}.{k}", v) for k, v in sorted(rep.residuals.items()))
    table = _csv_text(["check", "residual"], rows)
    _emit(args, {"build": table}, {"n": circuit.n, "L": circuit.L, "modes": fk.modes, "beta": beta})
    return EXIT_OK


def cmd_postbqp_run(args) -> int:
    circuit = read_circuit(args.circuit)
    t_f = args.t[0] if args.t else None
    dec = run_postbqp(circuit, args.beta[0], t_f=t_f, check_beta=not args.no_beta_check)
    d = dec.as_dict()
    table = _csv_text(["key", "value"], sorted(d.items()))
    _emit(args, {"decision": table}, d)
    return EXIT_OK


def cmd_estimate(args) -> int:
    est = resource_estimate(args.t[0] if args.t else 1.0, args.K, args.d, args.h0max, args.eps, args.M)
    sys.stdout.write(json.dumps({"queries": est.queries, "gates": est.gates}, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=config.EXACT_TOL, help="structural tolerance")
    common.add_argument("--out", help="directory for CSV and summary files")
    common.add_argument("--seed", type=int, default=0)

    timed = argparse.ArgumentParser(add_help=False)
    timed.add_argument("--t", type=float, nargs="+", help="evaluation times (default: from the instance)")

    evolving = argparse.ArgumentParser(add_help=False)
    evolving.add_argument("--cap-dense", type=int, default=None, help="largest sector evolved with a dense propagator")
    evolving.add_argument("--tol-evolve", type=float, default=config.EVOLVED_TOL, help="norm-drift budget")

    p = argparse.ArgumentParser(prog="boson-moments", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="structural checks and classification")
    s.add_argument("instance")
    s.add_argument("--max-dense-modes", type=int, default=None)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("factor", parents=[common], help="emit incidence factors B and D")
    s.add_argument("instance")
    s.set_defaults(func=cmd_factor)

    s = sub.add_parser("evolve", parents=[common, timed, evolving], help="evolve the moment vector, emit zeta")
    s.add_argument("instance")
    s.add_argument("--cutoff", type=float, default=0.0, help="drop moments below this magnitude in moments.csv")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("readout", parents=[common, timed, evolving], help="reconstruct cartesian moments")
    s.add_argument("instance")
    s.set_defaults(func=cmd_readout)

    s = sub.add_parser("walk", parents=[common, timed], help="embed a quantum walk and check equivalence")
    s.add_argument("graph")
    s.add_argument("--c", type=float, default=None, help="diagonal shift (default: max weighted degree)")
    s.add_argument("--start", type=int, default=1, help="1-based start vertex")
    s.add_argument("--random-start", action="store_true", help="random normalized start amplitudes from --seed")
    s.set_defaults(func=cmd_walk)

    pb = sub.add_parser("postbqp", help="clock-register gadget")
    pbs = pb.add_subparsers(dest="action", required=True)
    gadget = argparse.ArgumentParser(add_help=False)
    gadget.add_argument("--beta", type=float, nargs="+", required=True)
    gadget.add_argument("--no-beta-check", action="store_true")

    s = pbs.add_parser("spectrum", parents=[common], help="clock spectra over beta and L")
    s.add_argument("--beta", type=float, nargs="+", required=True)
    s.add_argument("--L", type=int, nargs="+", required=True)
    s.set_defaults(func=cmd_postbqp_spectrum)

    s = pbs.add_parser("build", parents=[common, gadget], help="build the gadget and report identity residuals")
    s.add_argument("circuit")
    s.set_defaults(func=cmd_postbqp_build)

    s = pbs.add_parser("run", parents=[common, gadget, timed], help="decide a postselected circuit")
    s.add_argument("circuit")
    s.set_defaults(func=cmd_postbqp_run)

    s = sub.add_parser("estimate", parents=[timed], help="asymptotic query and gate counts")
    s.add_argument("--K", type=float, required=True)
    s.add_argument("--d", type=float, required=True)
    s.add_argument("--h0max", type=float, required=True)
    s.add_argument("--eps", type=float, default=config.EVOLVED_TOL)
    s.add_argument("--M", type=int, default=1)
    s.set_defaults(func=cmd_estimate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PreconditionError as exc:
        print(f"precondition violated ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

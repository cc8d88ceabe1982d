"""Command-line frontend: orbit evolution, degeneration graphs, invariant suites.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 non-generic
runtime failure.  All file output is UTF-8 with deterministic formatting
(floats as scientific notation with 17 significant digits), so identical
inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import spectral
from .errors import IsomonError, InvalidState
from .garnier import (
    GarnierState,
    build_fuchsian_211,
    pair_stabilizer_nullity,
    schlesinger_step,
    schlesinger_step_detailed,
)
from .linear_core import Normalization
from .monodromy import compare_reps, monodromy_rep

_EXIT_OK = 0
_EXIT_VERIFY = 1
_EXIT_INPUT = 2
_EXIT_NONGENERIC = 3


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _fmt_c(z: complex) -> list[str]:
    return [_fmt(z.real), _fmt(z.imag)]


def _default_tol() -> float:
    raw = os.environ.get("ISOMON_TOL", "")
    if not raw:
        return 1e-12
    try:
        return float(raw)
    except ValueError:
        raise InvalidState(f"ISOMON_TOL must be a float, got {raw!r}")


def _load_state(path: str) -> GarnierState:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    data = json.loads(text)
    state = GarnierState.from_json(text)
    derived = data.get("derived", {})
    if "theta_inf1" in derived:
        claimed = complex(derived["theta_inf1"][0], derived["theta_inf1"][1])
        if abs(claimed - state.theta_inf1) > 1e-9:
            raise InvalidState(
                "trace identity violated: stored theta_inf1 "
                f"differs from the recomputed value by {abs(claimed - state.theta_inf1):.3e}"
            )
    return state


_CSV_COMPLEX = [
    "q1", "p1", "q2", "p2", "w1", "w2", "w3", "w4", "t1", "t2",
    "rho_t1", "rho_t2", "rho_1", "sigma_1", "sigma_2", "sigma_3", "sigma_4",
]
_CSV_REAL = ["kernel_residual", "consistency_residual", "triangularity_residual"]
_CSV_VERIFY = ["monodromy_checked", "monodromy_compatible", "monodromy_mismatch"]


def _csv_header() -> str:
    cols = ["step", "direction"]
    for name in _CSV_COMPLEX:
        cols += [f"{name}_re", f"{name}_im"]
    cols += _CSV_REAL + _CSV_VERIFY
    return ",".join(cols)


def _csv_row(step: int, direction: str, s: GarnierState, residuals, verify) -> str:
    sig = s.sigma
    values = [s.q1, s.p1, s.q2, s.p2, *s.w, s.t1, s.t2,
              s.rho_t1, s.rho_t2, s.rho_1, *sig]
    cells = [str(step), direction]
    for z in values:
        cells += _fmt_c(z)
    cells += [(_fmt(r) if r is not None else "") for r in residuals]
    checked, compatible, mismatch = verify
    cells += [str(checked), compatible, (_fmt(mismatch) if mismatch is not None else "")]
    return ",".join(cells)


def cmd_evolve(args) -> int:
    try:
        state = _load_state(args.state)
        tol = _default_tol()
    except (OSError, ValueError, KeyError, IsomonError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    directions = {
        "s1": lambda k: "s1",
        "s2": lambda k: "s2",
        "alternate": lambda k: "s1" if k % 2 == 0 else "s2",
    }[args.dir]

    lines = [_csv_header(), _csv_row(0, "init", state, (None, None, None), (0, "", None))]
    base_rep = None
    if args.verify_monodromy:
        base_rep = monodromy_rep(build_fuchsian_211(state).system(), tol=tol)
    current = state
    for k in range(args.steps):
        d = directions(k)
        try:
            res = schlesinger_step_detailed(current, d)
        except IsomonError as exc:
            print(f"non-generic step {k + 1} ({d}): {type(exc).__name__}: {exc}", file=sys.stderr)
            return _EXIT_NONGENERIC
        current = res.state
        verify = (0, "", None)
        if args.verify_monodromy and (k + 1) % args.verify_monodromy == 0:
            rep = monodromy_rep(
                build_fuchsian_211(current).system(), base=base_rep.base, tol=tol
            )
            rpt = compare_reps(base_rep, rep, rep_tol=1e-6)
            verify = (1, "yes" if rpt.compatible else "no", rpt.max_mismatch)
        lines.append(
            _csv_row(
                k + 1, d, current,
                (res.kernel_residual, res.consistency_residual, res.triangularity_residual),
                verify,
            )
        )
    out_text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(out_text)
    else:
        sys.stdout.write(out_text)
    if args.steps == 0:
        sys.stdout.write(state.to_json() + "\n")
    failed = [ln for ln in lines if ",no," in ln]
    return _EXIT_VERIFY if failed else _EXIT_OK


def cmd_degenerations(args) -> int:
    if args.oshima_3pt:
        seeds = list(spectral.OSHIMA_3PT_TYPES)
    elif args.seeds:
        try:
            with open(args.seeds, "r", encoding="utf-8") as fh:
                seeds = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        except OSError as exc:
            print(f"input error: {exc}", file=sys.stderr)
            return _EXIT_INPUT
    else:
        seeds = []
    try:
        parsed = [spectral.parse_spectral_type(s) for s in seeds]
    except IsomonError as exc:
        print(f"input error: cannot parse seed: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    graph = spectral.degeneration_graph(parsed)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(graph.to_json() + "\n")
    if args.dot:
        with open(args.dot, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(graph.to_dot())
    print(f"nodes: {len(graph.nodes)}  edges: {len(graph.edges)}  "
          f"reduced: {len(graph.transitive_reduction())}")
    if args.expected_edges:
        try:
            with open(args.expected_edges, "r", encoding="utf-8") as fh:
                expected = [tuple(e) for e in json.load(fh)]
        except (OSError, ValueError) as exc:
            print(f"input error: {exc}", file=sys.stderr)
            return _EXIT_INPUT
        missing = graph.unmatched(expected)
        for a, b in missing:
            print(f"UNMATCHED: {a} -> {b}")
        if not missing:
            print("all expected arrows matched")
    return _EXIT_OK


def _check(name, passed, measure, table):
    table.append((name, bool(passed), measure))


def _suite_exponents(state, table):
    for d in ("s1", "s2"):
        res = schlesinger_step_detailed(state, d)
        if d == "s1":
            want0 = [state.rho_t1 + 1, state.rho_t2, state.rho_1, 0.0]
            want1 = [state.sigma[0] - 1, *state.sigma[1:]]
        else:
            want0 = [state.rho_t1, state.rho_t2 + 1, state.rho_1, 0.0]
            want1 = [state.sigma[0], state.sigma[1] - 1, *state.sigma[2:]]
        key = lambda z: (complex(z).real, complex(z).imag)  # noqa: E731
        err0 = np.max(np.abs(np.array(sorted(np.diag(res.a0bar), key=key))
                             - np.array(sorted(want0, key=key))))
        err1 = np.max(np.abs(np.array(sorted(np.diag(res.a1bar), key=key))
                             - np.array(sorted(want1, key=key))))
        _check(f"exponent-shift-{d}", max(err0, err1) <= 1e-9, float(max(err0, err1)), table)


def _suite_gauge(state, table):
    res = schlesinger_step_detailed(state, "s1")
    _check("triangular-structure", res.triangularity_residual <= 1e-10,
           res.triangularity_residual, table)
    ru = schlesinger_step(state, "s1", Normalization.UNIT_DIAGONAL_U)
    rl = schlesinger_step(state, "s1", Normalization.UNIT_DIAGONAL_L)
    dev = max(abs(ru.q1 - rl.q1), abs(ru.p1 - rl.p1), abs(ru.q2 - rl.q2), abs(ru.p2 - rl.p2))
    scale = max(abs(ru.q1), abs(ru.p1), abs(ru.q2), abs(ru.p2), 1.0)
    _check("normalization-independence", dev / scale <= 1e-9, float(dev / scale), table)
    nullity = pair_stabilizer_nullity(res.a0bar, res.a1bar)
    _check("gauge-rigidity", nullity == 4, float(nullity), table)


def _suite_monodromy(state, table, tol):
    rep1 = monodromy_rep(build_fuchsian_211(state).system(), tol=tol)
    after = schlesinger_step(state, "s1")
    rep2 = monodromy_rep(build_fuchsian_211(after).system(), base=rep1.base, tol=tol)
    defect = max(rep1.relation_defect, rep2.relation_defect)
    _check("cyclic-relation", defect <= 1e-8, float(defect), table)
    rpt = compare_reps(rep1, rep2, rep_tol=1e-6)
    _check("monodromy-invariance", rpt.compatible, float(rpt.max_mismatch), table)


def cmd_verify(args) -> int:
    try:
        state = _load_state(args.state)
    except (OSError, ValueError, KeyError, IsomonError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    tol = _default_tol()
    table: list[tuple[str, bool, float]] = []
    try:
        if args.suite in ("exponents", "all"):
            _suite_exponents(state, table)
        if args.suite in ("gauge", "all"):
            _suite_gauge(state, table)
        if args.suite in ("monodromy", "all"):
            _suite_monodromy(state, table, tol)
    except IsomonError as exc:
        print(f"non-generic state: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_NONGENERIC
    width = max(len(n) for n, _, _ in table)
    for name, ok, measure in table:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {measure:.3e}")
    return _EXIT_OK if all(ok for _, ok, _ in table) else _EXIT_VERIFY


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="isomon",
        description="discrete isomonodromic deformations: orbits, degeneration graphs, verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="run a discrete orbit and write its trace")
    ev.add_argument("state", help="GarnierState JSON file")
    ev.add_argument("--dir", choices=("s1", "s2", "alternate"), default="s1")
    ev.add_argument("--steps", type=int, default=1)
    ev.add_argument("--out", default=None, help="orbit CSV path (default: stdout)")
    ev.add_argument("--verify-monodromy", type=int, default=0, metavar="K",
                    help="compare monodromy against the initial state every K steps")
    ev.set_defaults(func=cmd_evolve)

    dg = sub.add_parser("degenerations", help="explore confluence degenerations of spectral types")
    dg.add_argument("--seeds", default=None, help="file with one spectral type per line")
    dg.add_argument("--oshima-3pt", action="store_true",
                    help="seed with the nine three-point types with four accessory parameters")
    dg.add_argument("--out", default=None, help="graph JSON path")
    dg.add_argument("--dot", default=None, help="graph dot path")
    dg.add_argument("--expected-edges", default=None,
                    help="JSON list of [src, dst] arrows; unmatched ones are reported")
    dg.set_defaults(func=cmd_degenerations)

    vf = sub.add_parser("verify", help="run invariant suites on a state")
    vf.add_argument("state", help="GarnierState JSON file")
    vf.add_argument("--suite", choices=("exponents", "gauge", "monodromy", "all"), default="all")
    vf.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IsomonError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_NONGENERIC


if __name__ == "__main__":
    sys.exit(main())

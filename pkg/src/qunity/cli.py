"""Command-line interface: ``qunity check|simulate|compile|verify|classical``.

A FILE argument is a path to a ``.qunity`` source or the name of a bundled
corpus file (``coin`` or ``coin.qunity``).  The term acted on is the file's
``main`` entry, or ``--entry TEXT`` evaluated with the file's definitions in
scope.  Exit status is 0 on success, 1 on user errors (I/O, parse, type,
non-classical input) and 2 on internal invariant breaches, including a
failed circuit verification.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import corpus
from . import syntax as S
from .circuit import Circuit, Controlled, U3, circuit_json, emit_qasm3, gate_counts
from .classical import NotClassical, run_classical
from .compiler import CompileError, compile_derivation, verify
from .expand import EXPR, PROG as PROG_SORT, ExpansionError, expand_node, expand_text
from .linalg import dump_matrix
from .parser import QunitySyntaxError, parse, parse_term
from .semantics import as_superoperator, denote, state_of
from .typecheck import MIXED, PROG, PURE, Derivation, QunityTypeError, infer, show_derivation
from .values import expr_to_value, show_value, value_index, values_of

USER_ERROR = 1
INTERNAL_ERROR = 2


class UserError(Exception):
    """A problem with the input rather than with the toolchain."""


@dataclass
class RunReport:
    command: str
    source: str
    judgment: str = ""
    result: dict = field(default_factory=dict)
    elapsed: float = 0.0


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Loaded:
    source: str
    label: str
    derivation: Derivation
    definitions: dict


def _read(path: str) -> tuple:
    p = Path(path)
    if p.is_file():
        return str(p), p.read_text(encoding="utf-8")
    name = path if path.endswith(".qunity") else f"{path}.qunity"
    if name in corpus.corpus_files():
        return f"corpus:{name}", corpus.read_source(name)
    raise UserError(f"no such file: {path}")


def load(path: str, entry: Optional[str] = None) -> Loaded:
    source, text = _read(path)
    prog = parse(text)
    if entry is not None:
        node, label = parse_term(entry), entry
    elif prog.entry is not None:
        node, label = prog.entry, prog.entry_text.strip()
    else:
        raise UserError(f"{source} has no 'main' entry; pass --entry")
    # A bare name such as ``had`` elaborates as an (unbound) variable first,
    # so fall back to reading the term as a program.
    first_error = None
    for sort in (EXPR, PROG_SORT):
        try:
            d = infer(expand_node(node, prog.definitions, sort))
            return Loaded(source, label, d, prog.definitions)
        except (ExpansionError, QunityTypeError) as exc:
            first_error = first_error or exc
    raise first_error


def _type_text(d: Derivation) -> str:
    if isinstance(d.type, (S.Coherent, S.Channel)):
        return S.show_progtype(d.type)
    return S.show_type(d.type)


def judgment_line(d: Derivation, label: str) -> str:
    t = _type_text(d)
    if d.kind == PURE:
        return f"⊢ {label} : {t} (pure expression)"
    if d.kind == MIXED:
        return f"∅ ⊩ {label} : {t} (mixed expression)"
    kind = "pure" if isinstance(d.type, S.Coherent) else "mixed"
    return f"⊢ {label} : {t} ({kind} program)"


def parse_value(text: str, t: S.DataType, definitions: dict):
    try:
        e = expand_text(text, definitions, sort=EXPR)
        return expr_to_value(e, t)
    except (ValueError, QunitySyntaxError) as exc:
        raise UserError(f"{text!r} is not a value of type {S.show_type(t)}: {exc}") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_check(args, out) -> RunReport:
    ld = load(args.file, args.entry)
    line = judgment_line(ld.derivation, ld.label)
    print(line, file=out)
    if args.show_derivation:
        print(show_derivation(ld.derivation), file=out)
    return RunReport("check", ld.source, line, {"type": _type_text(ld.derivation)})


def _state_lines(vec: np.ndarray, t: S.DataType) -> list:
    lines = []
    for v, a in zip(values_of(t), vec):
        if abs(a) > 1e-12:
            lines.append(f"{show_value(v, t)}: {a.real:+.6f}{a.imag:+.6f}j")
    return lines or ["(zero vector)"]


def cmd_simulate(args, out) -> RunReport:
    ld = load(args.file, args.entry)
    d = ld.derivation
    if args.pure and (d.kind == MIXED or (d.kind == PROG and isinstance(d.type, S.Channel))):
        raise UserError(f"{ld.label} has a mixed type; --pure needs a pure judgment")
    if d.kind == PURE and d.gamma + d.delta:
        raise UserError("only closed terms can be simulated")
    mixed = args.mixed or d.kind == MIXED or isinstance(d.type, S.Channel)
    result: dict = {}
    if d.kind == PROG and args.input is not None:
        dom, cod = d.type.dom, d.type.cod
        k = value_index(dom, parse_value(args.input, dom, ld.definitions))
        if mixed:
            rho_in = np.zeros((len(values_of(dom)),) * 2, dtype=complex)
            rho_in[k, k] = 1.0
            matrix = as_superoperator(d).apply(rho_in)
            print(dump_matrix(matrix), file=out)
        else:
            matrix = denote(d)[:, [k]]
            print("\n".join(_state_lines(matrix[:, 0], cod)), file=out)
    elif d.kind == PROG:
        if args.input is None and mixed:
            matrix = as_superoperator(d).matrix()
        else:
            matrix = denote(d)
        print(dump_matrix(matrix), file=out)
    else:
        if args.input is not None:
            raise UserError("--input applies to programs only")
        if mixed:
            matrix = state_of(d)
            print(dump_matrix(matrix), file=out)
        else:
            matrix = denote(d)
            print("\n".join(_state_lines(matrix[:, 0], d.type)), file=out)
    if args.dump:
        Path(args.dump).write_text(dump_matrix(matrix) + "\n", encoding="utf-8")
        result["dump"] = args.dump
    result["shape"] = list(matrix.shape)
    return RunReport("simulate", ld.source, judgment_line(d, ld.label), result)


def circuit_stats(c: Circuit) -> dict:
    return {"totalQubits": c.n, "n_prep": len(c.preps), "n_flag": len(c.flags),
            "n_garb": len(c.garbage), "gates": len(c.gates), "gate_counts": gate_counts(c)}


def cmd_compile(args, out) -> RunReport:
    ld = load(args.file, args.entry)
    c = compile_derivation(ld.derivation)
    stats = circuit_stats(c)
    print(judgment_line(ld.derivation, ld.label), file=out)
    print(json.dumps(stats, sort_keys=True), file=out)
    if args.qasm3:
        Path(args.qasm3).write_text(emit_qasm3(c), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(circuit_json(c) + "\n", encoding="utf-8")
    return RunReport("compile", ld.source, judgment_line(ld.derivation, ld.label), stats)


def corrupt(c: Circuit, index: int, delta: float = 0.1) -> Circuit:
    """``c`` with the rotation angle of its ``index``-th U3 gate perturbed (a negative control)."""
    positions = [i for i, g in enumerate(c.gates) if isinstance(_inner(g), U3)]
    if not positions:
        raise UserError("circuit has no U3 gate to corrupt")
    i = positions[index % len(positions)]
    gates = list(c.gates)
    gates[i] = _perturb(gates[i], delta)
    return replace(c, gates=tuple(gates))


def _inner(g):
    while isinstance(g, Controlled):
        g = g.inner
    return g


def _perturb(g, delta: float):
    if isinstance(g, Controlled):
        return Controlled(g.controls, _perturb(g.inner, delta))
    return U3(g.theta + delta, g.phi, g.lam, g.target)


def cmd_verify(args, out) -> RunReport:
    if args.corpus:
        targets = [(f"{e.file}:{e.name}", e.derivation()) for e in corpus.ENTRIES]
        source = "corpus"
    else:
        if args.file is None:
            raise UserError("verify needs FILE or --corpus")
        ld = load(args.file, args.entry)
        targets, source = [(ld.label, ld.derivation)], ld.source
    failures = 0
    for label, d in targets:
        c = compile_derivation(d)
        if args.corrupt is not None:
            c = corrupt(c, args.corrupt)
        rep = verify(d, c, tol=args.tol)
        failures += not rep.ok
        print(rep.line(label), file=out)
    return RunReport("verify", source, "", {"checked": len(targets), "failures": failures})


def cmd_classical(args, out) -> RunReport:
    ld = load(args.file, args.entry)
    d = ld.derivation
    if d.kind == PROG:
        if args.input is None:
            raise UserError("a program needs --input")
        t_in, t_out = d.type.dom, d.type.cod
        res = run_classical(d, parse_value(args.input, t_in, ld.definitions))
    else:
        if args.input is not None:
            raise UserError("--input applies to programs only")
        if d.gamma or d.delta:
            raise UserError("only closed terms can be run")
        t_out = d.type
        res = run_classical(d)
    text = show_value(res.value, t_out) if res else "undefined"
    print(text, file=out)
    return RunReport("classical", ld.source, judgment_line(d, ld.label), {"value": text})


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qunity", description="Command-line tools for Qunity programs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, file_required=True):
        sp.add_argument("file", nargs=None if file_required else "?",
                        help="a .qunity file or the name of a bundled corpus file")
        sp.add_argument("--entry", metavar="TERM", help="term to use instead of main")
        sp.add_argument("--report", metavar="PATH", help="write a JSON run report")

    sp = sub.add_parser("check", help="type-check and print the judgment")
    common(sp)
    sp.add_argument("--show-derivation", action="store_true", help="print the derivation tree")
    sp.set_defaults(run=cmd_check)

    sp = sub.add_parser("simulate", help="print the denotation or output state")
    common(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--mixed", action="store_true", help="use the density-matrix view")
    g.add_argument("--pure", action="store_true", help="require a pure judgment")
    sp.add_argument("--input", metavar="VALUE", help="input value for a program")
    sp.add_argument("--dump", metavar="PATH", help="also write the matrix as JSON")
    sp.set_defaults(run=cmd_simulate)

    sp = sub.add_parser("compile", help="compile to a circuit and print its statistics")
    common(sp)
    sp.add_argument("--qasm3", metavar="PATH", help="write OpenQASM 3")
    sp.add_argument("--json", metavar="PATH", help="write the circuit as JSON")
    sp.set_defaults(run=cmd_compile)

    sp = sub.add_parser("verify", help="check the compiled circuit against the semantics")
    common(sp, file_required=False)
    sp.add_argument("--corpus", action="store_true", help="verify every bundled corpus entry")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--corrupt", type=int, metavar="K",
                    help="perturb the K-th rotation before checking (negative control)")
    sp.set_defaults(run=cmd_verify)

    sp = sub.add_parser("classical", help="run the classical interpreter")
    common(sp)
    sp.add_argument("--input", metavar="VALUE", help="input value for a program")
    sp.set_defaults(run=cmd_classical)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        report = args.run(args, out)
    except (UserError, QunitySyntaxError, ExpansionError, QunityTypeError, NotClassical,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USER_ERROR
    except (CompileError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR
    report.elapsed = time.perf_counter() - start
    if args.report:
        Path(args.report).write_text(json.dumps(asdict(report), sort_keys=True, default=str) + "\n",
                                     encoding="utf-8")
    if args.command == "verify" and report.result["failures"]:
        return INTERNAL_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: zeta, lfun, table, bench and verify.

Exit codes: 0 ok, 1 usage, 2 parameter validation, 3 oracle failure,
4 verification or certification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

from .dirichlet import build_character, default_params_chi, lfun_theorem2
from .errors import BlockZetaError, DomainError, ParameterError, TableError
from .experiments import bench_rows, table_rows
from .numeric import ComplexPoint, PrecisionContext, default_context, required_mantissa_bits
from .schedule import EvalParams, default_params
from .verify import SUITES, run_suites
from .zeta import EvalResult, zeta_hybrid, zeta_theorem1

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_ORACLE, EXIT_VERIFY = 0, 1, 2, 3, 4

TABLE_HEADER = "t,m,abs_error,certified_bound,runtime_ms"
BENCH_HEADER = "t,strategy,terms_evaluated,runtime_ms"
AUTO_TARGET = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _pa(text: str) -> tuple[int, int]:
    try:
        p, a = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected P,A, got {text!r}")
    return p, a


def _bits(text: str) -> int | str:
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")


def _add_common(sp, auto: bool = False, bits_help: str | None = None) -> None:
    sp.add_argument("--bits", type=_bits if auto else int, default=None,
                    help=bits_help or "mantissa bits (default 53 or $PRECISION_BITS)"
                    + ("; 'auto' inverts the round-off model for 1e-10" if auto else ""))
    sp.add_argument("--threads", type=int, default=1)


def _add_point(sp) -> None:
    sp.add_argument("--sigma", required=True, help="real part, decimal string")
    sp.add_argument("--t", required=True, help="imaginary part, decimal string")
    sp.add_argument("--m", type=int, default=6)
    sp.add_argument("--u0", type=int)
    sp.add_argument("--v0", type=int)
    sp.add_argument("--M", type=int)
    sp.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="blockzeta", description="Zeta and L-function values with certified bounds")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    z = sub.add_parser("zeta", help="evaluate zeta(s)")
    _add_point(z)
    z.add_argument("--L1", type=int, default=6, help="Euler-Maclaurin corrections at M")
    z.add_argument("--tail", choices=("em", "plain"), default="em",
                   help="em: corrections at M; plain: q/(sigma M^sigma) tail bound")
    _add_common(z, auto=True)

    lf = sub.add_parser("lfun", help="evaluate L(s, chi) for chi mod p^a")
    _add_point(lf)
    lf.add_argument("--p", type=int, required=True)
    lf.add_argument("--a", type=int, required=True)
    lf.add_argument("--index", type=int, required=True)
    _add_common(lf, auto=True)

    tb = sub.add_parser("table", help="error table against the Euler-Maclaurin oracle")
    tb.add_argument("--t", type=_str_list, default=["1000", "10000"])
    tb.add_argument("--m", type=_int_list, default=[0, 2, 4, 6])
    tb.add_argument("--oracle-bits", type=int, default=256)
    tb.add_argument("--L1", type=int, default=6)
    tb.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_common(tb, bits_help="mantissa bits for every row (default: 53, raised per row "
                              "until the round-off estimate is below the certified bound)")

    bn = sub.add_parser("bench", help="compare direct, em-only and block strategies")
    bn.add_argument("--t", type=_str_list, default=["1000"])
    bn.add_argument("--strategies", type=_str_list, default=["direct", "em-only", "block"])
    bn.add_argument("--m", type=int, default=6)
    bn.add_argument("--L1", type=int, default=6)
    bn.add_argument("--count-only", action="store_true", help="report term counts without timing")
    bn.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_common(bn)

    vf = sub.add_parser("verify", help="run the invariant suites")
    vf.add_argument("--suite", action="append", choices=sorted(SUITES),
                    help="suite to run (repeatable, default all)")
    vf.add_argument("--pa", type=_pa, action="append", help="modulus p^a as P,A (repeatable)")
    vf.add_argument("--per-character", type=int, default=20)
    return ap


def _context(args, s: ComplexPoint | None = None, M: int | None = None) -> PrecisionContext:
    bits = getattr(args, "bits", None)
    if bits == "auto":
        return PrecisionContext(required_mantissa_bits(s.t, max(M, 2), AUTO_TARGET))
    if bits is not None:
        return PrecisionContext(bits)
    return default_context()


def _params(args, base: EvalParams, scale_v0: int) -> EvalParams:
    u0 = args.u0 if args.u0 is not None else base.u0
    if args.v0 is not None:
        v0 = args.v0
    elif args.u0 is not None:
        v0 = scale_v0 * u0
    else:
        v0 = base.v0
    M = args.M if args.M is not None else max(base.M, v0)
    return EvalParams(u0=u0, v0=v0, M=M, m=args.m)


def _num(x) -> float | str:
    x = float(x)
    return x if math.isfinite(x) else str(x)


def result_document(s: ComplexPoint, res: EvalResult, timing_ms: float) -> dict:
    """JSON document for one evaluation."""
    v = res.complex_value
    p = res.params
    return {
        "s": {"sigma": _fmt_exact(s.sigma), "t": _fmt_exact(s.t)},
        "value": {"re": v.real, "im": v.imag},
        "certified": {"truncation_bound": _num(res.truncation_bound),
                      "tail_bound": _num(res.tail_bound)},
        "estimate": {"roundoff": _num(res.roundoff_estimate)},
        "params": {"u0": p.u0, "v0": p.v0, "M": p.M, "m": p.m, "R": res.R,
                   "block_count": res.block_count, "precision_bits": res.precision_bits},
        "timing_ms": timing_ms,
    }


def _fmt_exact(x) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _emit_doc(doc: dict, fmt: str, out) -> None:
    if fmt == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
        return
    flat = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            for k2, v2 in val.items():
                flat[f"{key}.{k2}"] = v2
        else:
            flat[key] = val
    w = csv.writer(out, lineterminator="\n")
    w.writerow(flat.keys())
    w.writerow(flat.values())


def cmd_zeta(args, out) -> int:
    s = ComplexPoint(args.sigma, args.t)
    mode = "em-tail" if args.tail == "em" else "theorem1-tail"
    p = _params(args, default_params(s, args.m, mode), 10 * (args.m + 1))
    ctx = _context(args, s, p.M)
    t0 = time.perf_counter()
    if args.tail == "em":
        res = zeta_hybrid(s, p, args.L1, ctx, args.threads)
    else:
        res = zeta_theorem1(s, p, ctx, args.threads)
    doc = result_document(s, res, 1e3 * (time.perf_counter() - t0))
    if args.tail == "em":
        doc["params"]["L1"] = args.L1
    _emit_doc(doc, args.format, out)
    return EXIT_OK


def cmd_lfun(args, out) -> int:
    s = ComplexPoint(args.sigma, args.t)
    chi = build_character(args.p, args.a, args.index)
    if chi.is_principal:
        raise ParameterError("principal character")
    p = _params(args, default_params_chi(s, chi, args.m), chi.p ** chi.b)
    ctx = _context(args, s, p.M)
    t0 = time.perf_counter()
    res = lfun_theorem2(s, chi, p, ctx, args.threads)
    doc = result_document(s, res, 1e3 * (time.perf_counter() - t0))
    doc.update({"p": chi.p, "a": chi.a, "index": chi.index, "postnikov_L": chi.postnikov_L})
    _emit_doc(doc, args.format, out)
    return EXIT_OK


def cmd_table(args, out) -> int:
    # no --bits and no $PRECISION_BITS: per-row precision from the round-off model
    explicit = args.bits is not None or os.environ.get("PRECISION_BITS")
    ctx = _context(args) if explicit else None
    for t in args.t:
        ComplexPoint("0.5", t)
    rows = table_rows(args.t, args.m, args.oracle_bits, args.L1, ctx, args.threads)
    if args.format == "csv":
        out.write(TABLE_HEADER + "\n")
        for r in rows:
            out.write(r.csv() + "\n")
    else:
        json.dump([{"t": r.t, "m": r.m, "abs_error": _num(r.abs_error),
                    "certified_bound": _num(r.certified_bound), "runtime_ms": r.runtime_ms,
                    "error": r.error} for r in rows], out, indent=2)
        out.write("\n")
    if any(r.error is not None for r in rows):
        for r in rows:
            if r.error is not None:
                print(f"oracle failure at t={r.t}: {r.error}", file=sys.stderr)
                break
        return EXIT_ORACLE
    bad = [r for r in rows if not r.ok]
    if bad:
        print(f"certified bound exceeded at t={bad[0].t}, m={bad[0].m}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_bench(args, out) -> int:
    ctx = _context(args)
    for name in args.strategies:
        if name not in ("direct", "em-only", "block"):
            raise UsageError(f"unknown strategy {name!r}")
    rows = bench_rows(args.t, args.strategies, args.m, args.L1, ctx, args.count_only,
                      args.threads)
    if args.format == "csv":
        out.write(BENCH_HEADER + "\n")
        for r in rows:
            out.write(r.csv() + "\n")
    else:
        json.dump([{"t": r.t, "strategy": r.strategy, "terms_evaluated": r.terms_evaluated,
                    "runtime_ms": r.runtime_ms} for r in rows], out, indent=2)
        out.write("\n")
    return EXIT_OK


def cmd_verify(args, out) -> int:
    results = run_suites(args.suite, args.pa, per_character=args.per_character)
    for r in results:
        out.write(r.summary() + "\n")
    failed = [r for r in results if not r.ok]
    if failed:
        out.write(f"FAILED: {failed[0].name}: {failed[0].first_failure}\n")
        return EXIT_VERIFY
    out.write("all suites passed\n")
    return EXIT_OK


COMMANDS = {"zeta": cmd_zeta, "lfun": cmd_lfun, "table": cmd_table,
            "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, DomainError, TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BlockZetaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())

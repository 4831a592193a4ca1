"""Reference-error table reproduction, strategy benchmarks and the EM oracle."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .numeric import ComplexPoint, PrecisionContext, _prec, required_mantissa_bits
from .schedule import build_schedule, default_params
from .zeta import EvalResult, em_tail_bound, zeta_direct, zeta_euler_maclaurin, zeta_hybrid

__all__ = [
    "REFERENCE_ERRORS",
    "oracle_N",
    "em_oracle",
    "TableRow",
    "table_rows",
    "BenchRow",
    "bench_rows",
]

# observed errors at sigma = 1/2 with u0 = 6 ceil(sqrt q), v0 = 10(m+1)u0,
# M = 10 ceil(q) and 6 Euler-Maclaurin corrections, keyed by (t, m)
REFERENCE_ERRORS = {
    (10**4, 0): 3.0e-4, (10**4, 2): 1.7e-6, (10**4, 4): 5.8e-9, (10**4, 6): 3.7e-11,
    (10**6, 0): 1.2e-2, (10**6, 2): 1.6e-5, (10**6, 4): 7.0e-9, (10**6, 6): 6.9e-12,
    (10**8, 0): 1.9e-2, (10**8, 2): 2.7e-5, (10**8, 4): 2.8e-7, (10**8, 6): 9.4e-10,
    (10**10, 0): 5.4e-3, (10**10, 2): 1.6e-5, (10**10, 4): 4.2e-8, (10**10, 6): 1.9e-10,
}

ORACLE_BITS = 256
ORACLE_L1 = 30
ORACLE_MAX_TERMS = 2 * 10**6


def oracle_N(s: ComplexPoint, L1: int = ORACLE_L1, max_terms: int = ORACLE_MAX_TERMS,
             target: float = 1e-40) -> int:
    """N = 100 ceil(q) when affordable, else the smallest multiple of ceil(q) meeting target."""
    cq = math.ceil(s.conductor_q)
    if 100 * cq <= max_terms:
        return 100 * cq
    N = cq
    while em_tail_bound(s, N, L1) > target:
        N += cq
    return N


def em_oracle(s: ComplexPoint, bits: int = ORACLE_BITS, L1: int = ORACLE_L1,
              N: int | None = None) -> EvalResult:
    """High-precision Euler-Maclaurin reference value."""
    ctx = PrecisionContext(bits, bits + 64)
    return zeta_euler_maclaurin(s, N or oracle_N(s, L1), L1, ctx)


@dataclass
class TableRow:
    t: str
    m: int
    abs_error: float
    certified_bound: float
    runtime_ms: float
    ok: bool = True
    error: str | None = None

    def csv(self) -> str:
        if self.error is not None:
            return f"{self.t},{self.m},ERROR,ERROR,{self.runtime_ms:.1f}"
        return f"{self.t},{self.m},{self.abs_error:.3e},{self.certified_bound:.3e},{self.runtime_ms:.1f}"


def table_rows(ts, ms, oracle_bits: int = ORACLE_BITS, L1: int = 6,
               ctx: PrecisionContext | None = None, threads: int = 1) -> list[TableRow]:
    """Error of the hybrid evaluation against the EM oracle for each (t, m).

    Without ``ctx`` each row starts in double precision and is re-evaluated
    at ``required_mantissa_bits`` when the round-off estimate exceeds a tenth
    of the certified bound, so the comparison is not swamped by rounding.
    """
    rows = []
    for t in ts:
        s = ComplexPoint("0.5", t)
        oracle = None
        err = None
        try:
            oracle = em_oracle(s, oracle_bits)
            if not math.isfinite(oracle.tail_bound) or oracle.tail_bound > 1e-30:
                err = f"oracle bound {oracle.tail_bound:.2e} too large"
        except Exception as exc:  # report the row as an oracle failure
            err = f"{type(exc).__name__}: {exc}"
        for m in ms:
            t0 = time.perf_counter()
            if err is not None:
                rows.append(TableRow(str(t), m, math.nan, math.nan, 0.0, False, err))
                continue
            p = default_params(s, m)
            res = zeta_hybrid(s, p, L1, ctx or PrecisionContext(), threads)
            bound = res.truncation_bound + res.tail_bound + oracle.tail_bound
            if ctx is None and res.roundoff_estimate > bound / 10:
                bits = required_mantissa_bits(s.t, p.M, bound)
                res = zeta_hybrid(s, p, L1, PrecisionContext(bits), threads)
            ms_ = 1e3 * (time.perf_counter() - t0)
            ae = _abs_diff(res, oracle)
            rows.append(TableRow(str(t), m, ae, bound, ms_, ae <= bound))
    return rows


def _abs_diff(res: EvalResult, oracle: EvalResult) -> float:
    if res.precision_bits <= 53:
        return abs(res.complex_value - oracle.complex_value)
    with _prec(oracle.precision_bits):
        return float((res.value - oracle.value).abs_upper())


@dataclass
class BenchRow:
    t: str
    strategy: str
    terms_evaluated: int
    runtime_ms: float
    result: EvalResult | None = None

    def csv(self) -> str:
        return f"{self.t},{self.strategy},{self.terms_evaluated},{self.runtime_ms:.1f}"


def block_terms(s: ComplexPoint, m: int) -> int:
    """v0 + (m+1)(R+1) for the default em-tail parameters."""
    p = default_params(s, m)
    sched = build_schedule(p.u0, p.v0, p.M)
    return p.v0 + (m + 1) * sched.block_count


def bench_rows(ts, strategies, m: int = 6, L1: int = 6, ctx: PrecisionContext | None = None,
               count_only: bool = False, threads: int = 1) -> list[BenchRow]:
    """Time the direct, em-only and block strategies at M = N = 10 ceil(q)."""
    ctx = ctx or PrecisionContext()
    rows = []
    for t in ts:
        s = ComplexPoint("0.5", t)
        p = default_params(s, m)
        for strat in strategies:
            t0 = time.perf_counter()
            res = None
            if strat == "direct":
                terms = p.M
                if not count_only:
                    res = zeta_direct(s, p.M, ctx)
            elif strat == "em-only":
                terms = p.M - 1 + L1
                if not count_only:
                    res = zeta_euler_maclaurin(s, p.M, L1, ctx)
            elif strat == "block":
                if count_only:
                    terms = block_terms(s, m)
                else:
                    res = zeta_hybrid(s, p, L1, ctx, threads)
                    terms = res.terms_evaluated
            else:
                raise ValueError(f"unknown strategy {strat!r}")
            rows.append(BenchRow(str(t), strat, terms, 1e3 * (time.perf_counter() - t0), res))
    return rows

"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in the terminal summary; run alone with
``pytest tests/test_acceptance.py -v`` or as a script.
"""

import math
import sys
import time

import numpy as np
import pytest
from flint import ctx as flint_ctx

from blockzeta.coefficients import epsilon_m
from blockzeta.dirichlet import build_character, default_params_chi, lfun_theorem2
from blockzeta.experiments import REFERENCE_ERRORS, table_rows
from blockzeta.numeric import ComplexPoint, PrecisionContext, inv_powers, required_mantissa_bits
from blockzeta.schedule import EvalParams, build_schedule, default_params, validate_params
from blockzeta.verify import suite_beta, suite_gkr, suite_regimes
from blockzeta.zeta import calB, direct_sum, extra_terms, zeta_hybrid, zeta_theorem1
from conftest import ACCEPTANCE_LINES


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_reference_table():
    t0 = time.perf_counter()
    rows = table_rows(["1000", "10000", "1000000"], [0, 2, 4, 6])
    secs = time.perf_counter() - t0
    bad = []
    worst = 0.0
    for r in rows:
        key = (int(float(r.t)), r.m)
        scale_ok = key not in REFERENCE_ERRORS or r.abs_error <= 10 * REFERENCE_ERRORS[key]
        if r.error is not None or not r.ok or not scale_ok:
            bad.append(f"(t={r.t}, m={r.m}) err={r.abs_error:.2e} bound={r.certified_bound:.2e}")
        if key in REFERENCE_ERRORS:
            worst = max(worst, r.abs_error / REFERENCE_ERRORS[key])
    ok = not bad and secs < 120
    report(1, ok, f"{len(rows)} rows, worst error/reference {worst:.2f}, {secs:.0f}s"
           + (f"; {bad[0]}" if bad else ""))


def test_criterion_2_bound_magnitude():
    s = ComplexPoint("0.5", "1e4")
    res = zeta_hybrid(s, default_params(s, 6), 6, PrecisionContext(80))
    with flint_ctx.workprec(128):
        err = float((res.value - s.acb().zeta()).abs_upper())
    ok4 = math.isfinite(res.truncation_bound) and res.truncation_bound > 0 \
        and res.truncation_bound >= err
    big = ComplexPoint("0.5", "1e10")
    p = default_params(big, 6)
    b10 = epsilon_m(big, p.u0, 6) * calB(big, p.u0, p.v0, p.M)
    ok10 = math.isfinite(b10) and b10 > 0
    report(2, ok4 and ok10, f"t=1e4 bound {res.truncation_bound:.2e} vs error {err:.2e} "
           f"(ratio {res.truncation_bound / err:.1e}); t=1e10 bound {b10:.2e}")


def test_criterion_3_block_identity_m40():
    rng = np.random.default_rng(2024)
    ctx = PrecisionContext(128)
    worst = 0.0
    cases = 0
    failures = []
    while cases < 50:
        s = ComplexPoint(f"{rng.uniform(0.1, 3):.6f}", f"{rng.uniform(-500, 500):.6f}")
        u0 = int(rng.integers(12, 80))
        v0 = u0 + int(rng.integers(0, 2000))
        M = int(min(10 ** 5, v0 + math.exp(rng.uniform(0, math.log(10 ** 5)))))
        p = EvalParams(u0, v0, M, 40)
        if not validate_params(s, p):
            continue
        cases += 1
        res = zeta_theorem1(s, p, ctx)
        head, extra = direct_sum(s, 1, M, ctx), extra_terms(s, M, ctx)
        with flint_ctx.workprec(128):
            diff = float((res.value - head - extra).abs_upper())
        tol = 1e3 * ctx.epsilon_mach * M
        worst = max(worst, diff / tol)
        if diff > tol:
            failures.append(f"s={s} params={p.as_dict()} diff={diff:.2e} > {tol:.2e}")
    report(3, not failures, f"{cases} cases, worst diff/tol {worst:.2e}"
           + (f"; {failures[0]}" if failures else ""))


def _direct_L(s, chi, M, ctx):
    ns = np.arange(1, M, dtype=np.int64)
    with ctx.working():
        return ctx.total(inv_powers(ns, s, ctx) * chi.backend_values(ns, ctx))


def _abs(x, ctx):
    if ctx.is_double:
        return abs(x)
    with ctx.working():
        return float(x.abs_upper())


def test_criterion_4_dirichlet_certification():
    t0 = time.perf_counter()
    cases = 0
    escalated = 0
    worst = 0.0
    failures = []
    dbl = PrecisionContext()
    for p_, a_ in ((3, 2), (3, 3), (2, 4), (5, 2), (7, 2)):
        q = p_ ** a_
        for index in range(1, q - q // p_):
            chi = build_character(p_, a_, index)
            for t in ("10", "100", "1000"):
                s = ComplexPoint("0.5", t)
                ref = {}
                for m in (0, 4, 8):
                    prm = default_params_chi(s, chi, m)
                    ctx = dbl
                    res = lfun_theorem2(s, chi, prm, ctx)
                    bound = res.truncation_bound
                    if res.roundoff_estimate > bound / 10:
                        # the comparison must not be dominated by rounding
                        ctx = PrecisionContext(required_mantissa_bits(s.t, prm.M, bound))
                        res = lfun_theorem2(s, chi, prm, ctx)
                        escalated += 1
                    key = (ctx.mantissa_bits, prm.M)
                    if key not in ref:
                        ref[key] = _direct_L(s, chi, prm.M, ctx)
                    diff = _abs(res.value - ref[key], ctx)
                    cases += 1
                    worst = max(worst, diff / bound)
                    if diff > bound:
                        failures.append(f"chi={index} mod {q}, t={t}, m={m}: "
                                        f"{diff:.2e} > {bound:.2e}")
    secs = time.perf_counter() - t0
    report(4, not failures and secs < 300,
           f"{cases} cases ({escalated} at raised precision), worst diff/bound {worst:.2e}, "
           f"{secs:.0f}s" + (f"; {failures[0]}" if failures else ""))


def test_criterion_5_gkr():
    res = suite_gkr(per_character=60)
    report(5, res.ok and res.cases >= 5000,
           f"{res.cases} cases, worst rel error {res.worst:.2e}, {res.seconds:.0f}s"
           + (f"; {res.first_failure}" if not res.ok else ""))


def test_criterion_6_beta():
    res = suite_beta(20)
    report(6, res.ok, f"{res.cases} checks" + (f"; {res.first_failure}" if not res.ok else ""))


def test_criterion_7_schedules():
    rng = np.random.default_rng(7)
    failures = []
    for _ in range(10 ** 4):
        u0 = int(rng.integers(1, 5000))
        v0 = u0 + int(rng.integers(0, 10 ** 5))
        M = v0 + int(math.exp(rng.uniform(0, math.log(10 ** 8))))
        sch = build_schedule(u0, v0, M)
        v, K = sch.v.astype(object), sch.K.astype(object)
        R = sch.R
        tiles = v[0] == v0 and v[-1] == M and all(v[1:] - v[:-1] == K) and all(K >= 1)
        cond = all((K - 1) * u0 <= v[:-1])
        count = R < 2 * u0 * math.log(M / v0) + 1
        if not (tiles and cond and count):
            failures.append(f"u0={u0} v0={v0} M={M}: tiling={tiles} Kr={cond} R={count}")
    report(7, not failures, "10000 schedules" + (f"; {failures[0]}" if failures else ""))


def test_criterion_8_regimes():
    res = suite_regimes(500)
    report(8, res.ok, f"{res.cases} cases, worst diff/tol {res.worst:.2e}, {res.seconds:.0f}s"
           + (f"; {res.first_failure}" if not res.ok else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))

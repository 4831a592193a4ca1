import math

import numpy as np
import pytest
from flint import acb, ctx as flint_ctx

from blockzeta.errors import DomainError, ParameterError
from blockzeta.numeric import ComplexPoint, PrecisionContext, direct_sum
from blockzeta.schedule import EvalParams, build_schedule, default_params
from blockzeta.coefficients import epsilon_m
from blockzeta.geomsum import geom_sum
from blockzeta.zeta import (block_value, calB, calB_closed_bound, em_sufficient, em_tail_bound,
                            extra_terms, zeta_direct, zeta_euler_maclaurin, zeta_hybrid,
                            zeta_theorem1)
from conftest import as_complex

# mpmath references (50 digits)
ZETA_1E4 = complex(-0.33937380263883445756747107794598938056664681019064,
                   -0.037091505973206031474344206813012023402252369443389)
ZETA_100 = complex(2.6926198856813240904760964705215905770630302273072,
                   -0.0203860296025981617707268532983215209917264719095)


def arb_zeta(s: ComplexPoint) -> complex:
    with flint_ctx.workprec(128):
        return as_complex(s.acb().zeta())


def test_zeta2_theorem1(dbl):
    s = ComplexPoint(2)
    res = zeta_theorem1(s, EvalParams(12, 24, 5000, 6), dbl)
    assert res.method == "theorem1-tail"
    assert abs(res.complex_value - math.pi ** 2 / 6) <= res.truncation_bound + res.tail_bound
    assert res.truncation_bound > 0 and res.tail_bound > 0


def test_hybrid_t1e4_m6(dbl):
    s = ComplexPoint("0.5", "1e4")
    res = zeta_hybrid(s, default_params(s, 6), 6, dbl)
    err = abs(res.complex_value - ZETA_1E4)
    assert res.method == "em-tail"
    assert err <= 3.7e-10
    assert err <= res.truncation_bound + res.tail_bound
    assert res.terms_evaluated == res.params.v0 + 7 * (res.R + 1)


def test_m_escalation_matches_direct(dbl):
    s = ComplexPoint("0.5", "300")
    p = EvalParams(120, 240, 6000, 20)
    res = zeta_theorem1(s, p, dbl)
    ref = direct_sum(s, 1, p.M, dbl) + extra_terms(s, p.M, dbl)
    assert abs(res.complex_value - ref) <= 10 * res.roundoff_estimate


def test_certification_grid(dbl):
    for t in ("100", "1000", "10000"):
        for sigma in ("0.5", "1", "2"):
            s = ComplexPoint(sigma, t)
            ref = arb_zeta(s)
            for m in (0, 2, 4, 6):
                res = zeta_hybrid(s, default_params(s, m), 6, dbl)
                err = abs(res.complex_value - ref)
                assert err <= res.truncation_bound + res.tail_bound + 10 * res.roundoff_estimate


def test_block_exactness_m40():
    ctx = PrecisionContext(128)
    s = ComplexPoint("0.5", "57.25")
    p = EvalParams(24, 60, 4000, 40)
    res = zeta_theorem1(s, p, ctx)
    head, extra = direct_sum(s, 1, p.M, ctx), extra_terms(s, p.M, ctx)
    with flint_ctx.workprec(128):
        ref = head + extra
        diff = float((res.value - ref).abs_upper())
    assert diff <= 1e3 * ctx.epsilon_mach * p.M


def test_block_value_examples(dbl):
    s = ComplexPoint("0.5", "1000")
    b0 = block_value(s, 500, 20, 0, ctx=dbl)
    assert abs(b0 - geom_sum(-s.as_complex / 500, 20, dbl)) < 1e-13
    assert abs(block_value(s, 500, 1, 6, ctx=dbl) - 1) < 1e-15
    s2 = ComplexPoint(2)
    b = block_value(s2, 100, 10, 8, ctx=dbl)
    ref = sum(n ** -2.0 for n in range(100, 110))
    blockB = 100 ** -2.0 * float(geom_sum(-0.02, 10, dbl).real)
    assert abs(100 ** -2.0 * b - ref) <= epsilon_m(s2, 10, 8) * blockB


def test_calB_t0_and_closed_bound(dbl):
    s = ComplexPoint(2)
    sched = build_schedule(12, 24, 3000)
    expected = sum(v ** -2.0 * float(geom_sum(-2.0 / v, int(k), dbl).real)
                   for v, k in zip(sched.starts, sched.K))
    assert math.isclose(calB(s, 12, 24, 3000, dbl), expected, rel_tol=1e-12)
    rng = np.random.default_rng(6)
    for _ in range(30):
        sig = rng.uniform(0.1, 3)
        u0 = int(rng.integers(12, 100))
        v0 = u0 + int(rng.integers(0, 500))
        M = v0 + int(rng.integers(0, 50_000))
        s = ComplexPoint(str(sig), str(rng.uniform(-1e6, 1e6)))
        assert calB(s, u0, v0, M, dbl) <= calB_closed_bound(sig, v0, M) * (1 + 1e-12)


def test_calB_single_block_by_hand(dbl):
    s = ComplexPoint("0.5", "1e4")
    g = (1 - math.exp(-0.05)) / (1 - math.exp(-0.005))
    csc = 1 / abs(math.sin(50.0))
    assert csc < g
    assert math.isclose(calB(s, 10, 100, 110, dbl), 0.1 * min(g, csc), rel_tol=1e-12)


def test_calB_closed_bound_examples():
    assert math.isclose(calB_closed_bound(1, 10, 100), 0.1 + math.log(10))
    assert math.isclose(calB_closed_bound(1, 10, 100), 2.4026, rel_tol=1e-4)
    assert math.isclose(calB_closed_bound(0.5, 100, 10 ** 4), 180.1)
    assert calB_closed_bound(0, 10, 100) == 91
    with pytest.raises(ParameterError):
        calB_closed_bound(-1, 1, 2)


def test_euler_maclaurin_examples(mp128, dbl):
    res = zeta_euler_maclaurin(ComplexPoint(2), 50, 10, mp128)
    with flint_ctx.workprec(128):
        err = abs(float((res.value - acb.pi() ** 2 / 6).abs_upper()))
    assert res.tail_bound < 1e-20 and err <= res.tail_bound
    r100 = zeta_euler_maclaurin(ComplexPoint("0.5", "100"), 200, 8, dbl)
    assert abs(r100.complex_value - ZETA_100) <= r100.tail_bound + 10 * r100.roundoff_estimate
    s = ComplexPoint("0.5", "100")
    th = zeta_theorem1(s, EvalParams(66, 66, 10 ** 6, 8), dbl)
    assert abs(th.complex_value - r100.complex_value) <= (th.certified_bound + r100.certified_bound
                                                          + 10 * th.roundoff_estimate)
    with pytest.raises(DomainError):
        zeta_euler_maclaurin(s, 1, 3, dbl)


def test_em_tail_bound_properties():
    s = ComplexPoint("0.5", "1000")
    b1, b2 = em_tail_bound(s, 10 ** 4, 6), em_tail_bound(s, 2 * 10 ** 4, 6)
    assert 0 < b2 < b1 < 1
    # the sufficient condition really implies the bound
    for t, N, L1, eps in [(1000, 500, 20, 1e-12), (1e5, 60000, 30, 1e-20)]:
        s = ComplexPoint("0.5", str(t))
        if em_sufficient(s, N, L1, eps):
            assert em_tail_bound(s, N, L1) < eps
    assert em_sufficient(ComplexPoint("0.5", "1000"), 500, 20, 1e-12)
    assert not em_sufficient(ComplexPoint("0.5", "1000"), 500, 10, 1e-12)


def test_direct_method(dbl):
    s = ComplexPoint(3)
    res = zeta_direct(s, 1000, dbl)
    assert res.method == "direct" and res.terms_evaluated == 1000
    assert abs(res.complex_value - 1.2020569031595942) <= res.tail_bound + 1e-14


def test_errors(dbl):
    with pytest.raises(DomainError):
        zeta_direct(ComplexPoint(1), 100, dbl)
    with pytest.raises(ParameterError, match="u0 < 2√𝔮"):
        zeta_theorem1(ComplexPoint("0.5", "100"), EvalParams(10, 100, 1000, 2), dbl)


def test_threads_are_deterministic(dbl):
    s = ComplexPoint("0.5", "1e5")
    p = default_params(s, 4)
    a = zeta_hybrid(s, p, 6, dbl, threads=1)
    b = zeta_hybrid(s, p, 6, dbl, threads=4)
    assert a.complex_value == b.complex_value


def test_monotone_bound_decay(dbl):
    for t in ("100", "1000", "10000"):
        for sigma in ("0.5", "1", "2"):
            s = ComplexPoint(sigma, t)
            p = default_params(s, 6)
            prev = None
            for m in range(0, int(s.abs / 4) + 1, 2)[:10]:
                res = zeta_theorem1(s, EvalParams(p.u0, p.v0, p.M, m), dbl)
                if prev is not None:
                    assert res.truncation_bound <= prev
                prev = res.truncation_bound


def test_large_t_bound_in_log_space():
    s = ComplexPoint("0.5", "1e10")
    p = default_params(s, 6)
    cb = calB(s, p.u0, p.v0, p.M)
    bound = epsilon_m(s, p.u0, 6) * cb
    assert math.isfinite(bound) and bound > 0
    assert 2.9e-4 <= bound <= 2.9e-2

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from blockzeta.coefficients import (bernoulli, bernoulli_over_factorial, build_beta_table,
                                    c_coeffs, epsilon_m, log_epsilon_m)
from blockzeta.errors import TableError
from blockzeta.numeric import ComplexPoint, PrecisionContext
from blockzeta.verify import BETA_CLOSED_FORMS, suite_beta
from conftest import as_complex


def test_closed_forms_j_le_8():
    table = build_beta_table(8)
    for j, form in enumerate(BETA_CLOSED_FORMS):
        got = list(table.w_poly(j))
        got += [0] * (len(form) - len(got))
        assert tuple(got[:len(form)]) == form and not any(got[len(form):])


def test_named_entries():
    table = build_beta_table(8)
    assert table.w_poly(2) == [0, 1]
    assert table.w_poly(4) == [0, 6, 3]
    assert table.w_poly(8) == [0, 5040, 7308, 2380, 105]
    assert [7 * x for x in (0, 720, 1044, 340, 15)] == table.w_poly(8)


def test_initial_row_and_bounds():
    table = build_beta_table(20)
    assert table.entry(0, 0, 0) == 1
    assert all(table.entry(0, l, e) == 0 for l in range(21) for e in range(3) if (l, e) != (0, 0))
    for j, l, eta, val in table.entries():
        assert abs(val) <= math.factorial(j + l) * 2 ** (l + 1) // math.factorial(l)
        if eta > min(j, (j + l) // 2):
            assert val == 0
    assert table.factorials[20] == math.factorial(20)


def test_beta_suite_passes():
    assert suite_beta(20).ok


def test_c_coeffs_small_orders():
    for s in [ComplexPoint("0.5", "14.1"), ComplexPoint(3, -2), ComplexPoint("0.01", "1e6")]:
        c = [as_complex(x) for x in c_coeffs(s, 3, None, PrecisionContext())]
        sc = s.as_complex
        assert c[0] == 1 and c[1] == 0
        assert abs(c[2] - sc / 2) <= 1e-15 * abs(sc)
        assert abs(c[3] + sc / 3) <= 1e-15 * abs(sc)


def test_c_coeffs_table_too_small():
    with pytest.raises(TableError):
        c_coeffs(ComplexPoint(1), 5, build_beta_table(3), PrecisionContext())


def test_c_coeff_size_bound():
    for s in [ComplexPoint("0.5", "100"), ComplexPoint("0.5", "1e4"), ComplexPoint(2, 400)]:
        a = s.abs
        c = c_coeffs(s, 20, None, PrecisionContext())
        for j in range(1, 21):
            if j <= a / 4:
                assert abs(c[j]) <= a ** (j / 2) * j ** (-j / 2) * math.exp(0.78 * j)


def test_series_matches_function():
    rng = np.random.default_rng(8)
    mpmath.mp.dps = 40
    ctx = PrecisionContext(128)
    for _ in range(100):
        a = math.exp(rng.uniform(0, math.log(1e4)))
        ang = rng.uniform(-math.pi / 2, math.pi / 2)
        s = ComplexPoint(str(a * math.cos(ang) + 1e-3), str(a * math.sin(ang)))
        r = rng.uniform(0, 1) / (2 * math.sqrt(s.abs))
        z = r * complex(math.cos(rng.uniform(0, 2 * math.pi)), math.sin(rng.uniform(0, 2 * math.pi)))
        c = [as_complex(x) for x in c_coeffs(s, 60, None, ctx)]
        approx = sum(cj * z ** j for j, cj in enumerate(c[:21]))
        tail = sum(abs(cj) * abs(z) ** j for j, cj in enumerate(c) if j > 20)
        sm, zm = mpmath.mpc(s.as_complex), mpmath.mpc(z)
        exact = complex(mpmath.exp(sm * zm - sm * mpmath.log(1 + zm)))
        err = abs(approx - exact)
        assert err <= 1.01 * tail + 1e-15 * abs(exact)
        # below |s| ~ 4 the j > 20 tail itself exceeds 1e-10 at |z| = 1/(2 sqrt|s|)
        if s.abs >= 10:
            assert err <= 1e-10 * abs(exact)


def test_epsilon_examples():
    s = ComplexPoint(2800, 9600)  # |s| = 10^4 exactly
    assert math.isclose(epsilon_m(s, 200, 0), 3.5 * math.exp(0.78) * 100 / 200, rel_tol=1e-12)
    assert math.isclose(epsilon_m(s, 200, 0), 3.81757, rel_tol=1e-5)
    s4 = ComplexPoint(4)
    for u in (12, 30):
        assert math.isclose(epsilon_m(s4, u, 2), 4 * math.exp(0.776) / u ** 2, rel_tol=1e-12)
        # m = 1 = |s|/4 still takes the first branch
        first = 3.5 * math.exp(0.78 * 2) * 4 / (2 * u ** 2)
        assert math.isclose(epsilon_m(s4, u, 1), first, rel_tol=1e-12)


def test_epsilon_log_space():
    s = ComplexPoint("0.5", "1e10")
    assert math.isfinite(log_epsilon_m(s, 10, 10 ** 11))
    assert epsilon_m(ComplexPoint(1, 10 ** 5), 2, 10 ** 6) == math.inf
    with pytest.raises(TableError):
        log_epsilon_m(s, 0, 1)


def test_epsilon_nonincreasing():
    for a in [10, 100, 1e4, 1e6]:
        s = ComplexPoint("0.5", str(a))
        for u in [math.ceil(2 * math.sqrt(a)), 6 * math.ceil(math.sqrt(s.conductor_q))]:
            vals = [epsilon_m(s, u, m) for m in range(int(s.abs / 4) + 1)][:200]
            assert all(b <= a_ * (1 + 1e-12) for a_, b in zip(vals, vals[1:]))


def test_bernoulli():
    assert bernoulli(0) == 1 and bernoulli(1) == Fraction(-1, 2)
    assert bernoulli(2) == Fraction(1, 6) and bernoulli(4) == Fraction(-1, 30)
    assert bernoulli(3) == 0
    assert bernoulli_over_factorial(2) == Fraction(1, 12)
    for l in range(1, 40):
        assert abs(float(bernoulli_over_factorial(2 * l))) <= 4 / (2 * math.pi) ** (2 * l)

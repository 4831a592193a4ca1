import cmath
import math

import mpmath
import numpy as np
import pytest
from flint import acb, ctx as flint_ctx

from blockzeta.errors import DomainError, ParameterError
from blockzeta.geomsum import (CLOSED, DIRECT, EM, GeomDerivRequest, choose_regimes,
                               em_geom_deriv, em_remainder_bound, geom_derivs_batch, geom_sum,
                               geom_sum_derivs, poly_exp_integral, y_laurent_derivs)
from blockzeta.numeric import PrecisionContext
from blockzeta.verify import suite_regimes
from conftest import as_complex

# mpmath references at 50 digits
Y_001 = "99.500833331944447751314484147860831130227521257607"
G3_REF = complex(-91361262.376151054742646453934114562013583535457676,
                 8805005.3754712944601908674774890677229107971826694)
EM2_REF = complex(308341535155.64056972265911992150259383880788842569,
                  23050998675.093444115981407191090514470854652318991)
PEI_REF = 1138921569915388.0258233343161733320342547213281605


def direct(z, K, j, bits=160):
    with flint_ctx.workprec(bits):
        zz = acb(z.real, z.imag)
        return as_complex(sum(((zz * k).exp() * acb(k) ** j for k in range(K)), acb(0)))


def test_geom_sum_examples(dbl):
    assert abs(geom_sum(0, 7, dbl) - 7) < 1e-15
    assert abs(geom_sum(1j * math.pi, 4, dbl)) < 1e-15
    assert abs(geom_sum(-math.log(2), 3, dbl) - 1.75) < 1e-15
    with pytest.raises(DomainError):
        geom_sum(0.1, 0, dbl)


def test_geom_sum_small_z_direct_branch(dbl):
    z = complex(-1e-10, 1e-10)
    ref = direct(z, 50, 0)
    assert abs(geom_sum(z, 50, dbl) - ref) <= 32 * dbl.epsilon_mach * 50 * abs(ref)


def test_y_laurent_examples(dbl, mp128):
    vals, bounds = y_laurent_derivs(1j * math.pi, 1, None, dbl)
    assert abs(vals[0] + 0.5) < 1e-14 and abs(vals[1] - 0.25) < 1e-14
    with flint_ctx.workprec(128):
        v, b = y_laurent_derivs(acb("0.01"), 0, 15, mp128)
        rel = abs(float(((v[0] - acb(Y_001)) / acb(Y_001)).real.mid()))
    assert rel <= 1e-20 and b[0] <= 1e-20 * 100


def test_y_laurent_domain(dbl):
    for z in (0, 7.0, 2 * math.pi):
        with pytest.raises(DomainError):
            y_laurent_derivs(z, 2, 10, dbl)


def test_laurent_tail_bound_honest():
    ctx = PrecisionContext(192)
    mpmath.mp.dps = 60
    rng = np.random.default_rng(2)
    for _ in range(25):
        z = cmath.rect(rng.uniform(0.05, 6.0), rng.uniform(0, 2 * math.pi))
        n_terms = int(rng.integers(2, 20))
        vals, bounds = y_laurent_derivs(z, 4, n_terms, ctx)
        for l in range(5):
            exact = complex(mpmath.diff(lambda w: 1 / (mpmath.exp(w) - 1), mpmath.mpc(z), l))
            assert abs(as_complex(vals[l]) - exact) <= bounds[l] * (1 + 1e-9) + 1e-40


def test_request_reduction_and_domain():
    r = GeomDerivRequest(complex(-0.1, 7.0), 10, 2)
    assert abs(r.z - complex(-0.1, 7.0 - 2 * math.pi)) < 1e-15
    with pytest.raises(DomainError):
        GeomDerivRequest(complex(-0.6, 0), 10, 1)
    with pytest.raises(DomainError):
        GeomDerivRequest(complex(0.1, 0), 10, 1)
    with pytest.raises(DomainError):
        GeomDerivRequest(-0.1, 0, 1)


def test_geom_sum_derivs_examples(dbl, mp128):
    v = geom_sum_derivs(GeomDerivRequest(-0.01, 100, 0), dbl)[0]
    assert abs(v - sum(math.exp(-0.01 * k) for k in range(100))) < 1e-12
    d = geom_sum_derivs(GeomDerivRequest(1j * math.pi, 4, 1), dbl)
    assert abs(d[1] + 2) < 1e-13
    g = as_complex(geom_sum_derivs(GeomDerivRequest(complex(-0.001, 0.5), 10 ** 4, 3), mp128)[3])
    assert abs(g - G3_REF) <= 1e-10 * abs(G3_REF)


def test_direct_sum_oracle_128():
    ctx = PrecisionContext(128)
    rng = np.random.default_rng(7)
    for _ in range(50):
        z = complex(-rng.uniform(0, 0.5), rng.uniform(-math.pi, math.pi))
        K = int(rng.integers(1, 301))
        vals = geom_sum_derivs(GeomDerivRequest(z, K, 8), ctx)
        for j in (0, 3, 8):
            ref = direct(z, K, j)
            assert abs(as_complex(vals[j]) - ref) <= 1e-11 * abs(ref)


def test_derivative_finite_difference():
    ctx = PrecisionContext(256)
    for z, K in [(complex(-0.01, 0.3), 500), (complex(-0.2, -2.0), 50), (complex(-1e-4, 1e-3), 2000)]:
        with flint_ctx.workprec(256):
            zz = acb(z.real, z.imag)
            h = acb("1e-20")
            fp = geom_sum_derivs(GeomDerivRequest(zz + h, K, 0), ctx)[0]
            fm = geom_sum_derivs(GeomDerivRequest(zz - h, K, 0), ctx)[0]
            fd = (fp - fm) / (2 * h)
            g1 = geom_sum_derivs(GeomDerivRequest(zz, K, 1), ctx)[1]
            assert abs(float(((fd - g1) / g1).abs_upper())) <= 1e-15


def test_regime_dispatch():
    codes = choose_regimes(np.array([0.5, 0.5, 1e-4]), np.array([5, 1000, 1000]), 3)
    assert list(codes) == [DIRECT, CLOSED, EM]


def test_forced_regimes_agree(mp128):
    z = mp128.asarray([complex(-0.003, 0.02)])
    out = {}
    for name in ("direct", "closed", "em"):
        G = geom_derivs_batch(z, np.array([3000]), 4, mp128, regime=name)
        out[name] = (mp128.to_complex(G.values[0]), G.bounds[0])
    for a in out:
        for b in out:
            for j in range(5):
                tol = out[a][1][j] + out[b][1][j] + 1e3 * mp128.epsilon_mach * abs(out[a][0][j])
                assert abs(out[a][0][j] - out[b][0][j]) <= tol
    with pytest.raises(ParameterError):
        geom_derivs_batch(z, np.array([30]), 1, mp128, regime="nope")


def test_regime_suite_sample():
    assert suite_regimes(n_cases=40, n_em=20, seed=5).ok


def test_em_bound_value():
    assert math.isclose(em_remainder_bound(100, 0, 5), 4 * 99 * (2 * math.pi) ** -10)
    assert math.isclose(em_remainder_bound(100, 0, 5), 4.1295e-6, rel_tol=1e-4)


def test_em_geom_deriv_examples(mp128, dbl):
    z = complex(-1e-5, 1e-5)
    v, b = em_geom_deriv(z, 10 ** 4, 2, 10, mp128)
    assert abs(as_complex(v) - EM2_REF) <= b
    z2 = complex(-2e-4, 3e-4)
    v0, _ = em_geom_deriv(z2, 1000, 0, 12, mp128)
    closed = (cmath.exp(1000 * z2) - 1) / (cmath.exp(z2) - 1)
    assert abs(as_complex(v0) - closed) <= 1e-12 * abs(closed)
    with pytest.raises(ParameterError):
        em_geom_deriv(z, 100, 0, 0, dbl)


def test_em_remainder_literal_bound():
    ctx = PrecisionContext(160)
    rng = np.random.default_rng(9)
    for _ in range(30):
        j = int(rng.integers(0, 6))
        K = int(rng.integers(math.ceil(2 * math.pi * (j + 1)), 300))
        z = cmath.rect(rng.uniform(0.05, 5.0) * (j + 1) / (K - 1), rng.uniform(math.pi / 2, math.pi))
        ref = direct(z, K, j)
        for L in (2, 5, 9):
            v, b = em_geom_deriv(z, K, j, L, ctx)
            err = abs(as_complex(v) - ref)
            assert err <= em_remainder_bound(K, j, L) and err <= b


def test_poly_exp_integral(dbl, mp128):
    for j, K in [(0, 10), (3, 100), (5, 7)]:
        v = poly_exp_integral(0, j, K, 1, dbl)
        assert abs(v - (K - 1) ** (j + 1) / (j + 1)) <= 1e-14 * (K - 1) ** (j + 1)
    z = complex(-0.03, 0.2)
    v = poly_exp_integral(z, 0, 200, 16, dbl)
    ref = (cmath.exp(z * 199) - 1) / z
    assert abs(v - ref) <= 1e-14 * abs(ref)
    w, b = poly_exp_integral(-1e-4, 3, 10 ** 4, 4, mp128, with_bound=True)
    assert abs(as_complex(w).real - PEI_REF) <= 1e-12 * PEI_REF
    assert b < 1e-20 * PEI_REF
    with pytest.raises(ParameterError):
        poly_exp_integral(z, 0, 10, 0, dbl)

"""Invariant suites: Postnikov exponent, residue decomposition, beta table, geomsum regimes."""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field

import numpy as np
from flint import acb, arb, fmpq

from . import coefficients
from .dirichlet import build_character, twisted_geom_sum
from .geomsum import EM, choose_regimes, em_remainder_bound, geom_derivs_batch
from .numeric import PrecisionContext, _prec

__all__ = [
    "SMALL_MODULI",
    "BETA_CLOSED_FORMS",
    "SuiteResult",
    "suite_postnikov",
    "suite_gkr",
    "suite_beta",
    "suite_regimes",
    "SUITES",
    "run_suites",
]

SMALL_MODULI = ((3, 2), (3, 3), (2, 4), (5, 2), (7, 2))

# w_{j,0}(s) for j <= 8, coefficients in increasing powers of s
BETA_CLOSED_FORMS = (
    (1,),
    (0,),
    (0, 1),
    (0, -2),
    (0, 6, 3),
    (0, -24, -20),
    (0, 120, 130, 15),
    (0, -720, -924, -210),
    (0, 5040, 7308, 2380, 105),
)


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: int = 0
    first_failure: str | None = None
    worst: float = 0.0
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def fail(self, msg: str) -> None:
        self.failures += 1
        if self.first_failure is None:
            self.first_failure = msg

    def summary(self) -> str:
        head = f"{self.name}: {'PASS' if self.ok else 'FAIL'} ({self.cases} cases, " \
               f"worst {self.worst:.2e}, {self.seconds:.1f}s)"
        if not self.ok:
            head += f"\n  first failure: {self.first_failure}"
        return head


def _moduli(pa):
    return SMALL_MODULI if pa is None else tuple(pa)


def suite_postnikov(pa=None, tol: float = 1e-14) -> SuiteResult:
    """chi(1 + p^b x) = exp(2 pi i L x / p^{a-b}) for every x, every character."""
    res = SuiteResult("postnikov")
    t0 = time.perf_counter()
    for p, a in _moduli(pa):
        q = p ** a
        pb = p ** ((a + 1) // 2)
        n_sub = q // pb
        for index in range(q - q // p):
            chi = build_character(p, a, index)
            L = chi.postnikov_L
            vals = chi.values
            for x in range(n_sub):
                expect = cmath.exp(2j * math.pi * L * x / n_sub)
                err = abs(vals[(1 + pb * x) % q] - expect)
                res.cases += 1
                res.worst = max(res.worst, err)
                if err > tol:
                    res.fail(f"p={p} a={a} index={index} x={x}: error {err:.2e}")
    res.seconds = time.perf_counter() - t0
    return res


def _twisted_oracle(chi, v: int, K: int, z: complex, bits: int = 128) -> complex:
    with _prec(bits):
        e = acb(z.real, z.imag).exp()
        acc = acb(0)
        w = acb(1)
        for k in range(K):
            tr = chi.turns(v + k)
            if tr is not None:
                acc += w * acb(arb(fmpq(2 * tr.numerator, tr.denominator))).exp_pi_i()
            w *= e
        return complex(float(acc.real.mid()), float(acc.imag.mid()))


def suite_gkr(pa=None, per_character: int = 20, seed: int = 0, tol: float = 1e-12,
              ctx: PrecisionContext | None = None) -> SuiteResult:
    """Residue decomposition of sum chi(v+k) e^{kz} against direct summation.

    Random v <= 1000, K <= 500 and z with -1/(2 p^b) <= Re z <= 0, so the
    inner geometric sums stay in their admissible strip.  Runs at 128 bits by
    default: the sums can cancel by a factor of 10^3 or more, which puts a
    relative 1e-12 check out of reach of any double-precision evaluation.
    """
    ctx = ctx or PrecisionContext(128)
    rng = np.random.default_rng(seed)
    res = SuiteResult("gkr")
    t0 = time.perf_counter()
    for p, a in _moduli(pa):
        q = p ** a
        pb = p ** ((a + 1) // 2)
        for index in range(q - q // p):
            chi = build_character(p, a, index)
            for _ in range(per_character):
                v = int(rng.integers(1, 1001))
                K = int(rng.integers(1, 501))
                z = complex(-rng.uniform(0, 0.5 / pb), rng.uniform(-math.pi, math.pi))
                got = complex(twisted_geom_sum(z, chi, v, K, ctx))
                ref = _twisted_oracle(chi, v, K, z)
                err = abs(got - ref) / max(abs(ref), 1e-300)
                res.cases += 1
                res.worst = max(res.worst, err)
                if err > tol:
                    res.fail(f"p={p} a={a} index={index} v={v} K={K} z={z}: rel error {err:.2e}")
    res.seconds = time.perf_counter() - t0
    return res


def suite_beta(m_max: int = 20) -> SuiteResult:
    """Closed forms for j <= 8, the recursion identity, the size bound and the degree bound."""
    res = SuiteResult("beta")
    t0 = time.perf_counter()
    table = coefficients.build_beta_table(m_max)
    for j, form in enumerate(BETA_CLOSED_FORMS[:m_max + 1]):
        got = table.w_poly(j, 0)
        width = max(len(got), len(form))
        got = list(got) + [0] * (width - len(got))
        want = list(form) + [0] * (width - len(form))
        res.cases += 1
        for eta in range(width):
            if got[eta] != want[eta]:
                res.fail(f"closed form mismatch at (j,l,eta)=({j},0,{eta}): "
                         f"{got[eta]} != {want[eta]}")
                break
    # beta[j,l,eta] = (l+1) beta[j-1,l+1,eta] - sum_a (-1)^a beta[j-1,l-a,eta-1]
    for j in range(1, m_max + 1):
        for l in range(m_max):
            for eta in range(min(j, (j + l) // 2) + 1):
                rhs = (l + 1) * table.entry(j - 1, l + 1, eta)
                if eta >= 1:
                    for a_ in range(1, l + 1):
                        rhs -= (-1) ** a_ * table.entry(j - 1, l - a_, eta - 1)
                res.cases += 1
                if table.entry(j, l, eta) != rhs:
                    res.fail(f"recursion fails at (j,l,eta)=({j},{l},{eta}): "
                             f"{table.entry(j, l, eta)} != {rhs}")
    if table.entry(0, 0, 0) != 1 or any(v for j_, l, e, v in table.entries()
                                        if j_ == 0 and (l, e) != (0, 0)):
        res.fail("initial row (j,l,eta)=(0,*,*) is not the unit")
    for j, l, eta, val in table.entries():
        res.cases += 1
        lim = math.factorial(j + l) * 2 ** (l + 1) // math.factorial(l)
        if abs(val) > lim:
            res.fail(f"size bound fails at (j,l,eta)=({j},{l},{eta}): |{val}| > {lim}")
        if val and eta > min(j, (j + l) // 2):
            res.fail(f"degree bound fails at (j,l,eta)=({j},{l},{eta})")
    res.seconds = time.perf_counter() - t0
    return res


def _regime_sample(rng, em_domain: bool):
    while True:
        j_max = int(rng.integers(0, 9))
        if em_domain:
            K = int(rng.integers(math.ceil(2 * math.pi * (j_max + 1)), 400))
            r = rng.uniform(0.05, 10.0) * (j_max + 1) / (K - 1)
        else:
            K = int(rng.integers(2, 400))
            r = math.exp(rng.uniform(math.log(1e-4), math.log(3.0)))
        ang = rng.uniform(math.pi / 2, math.pi)
        z = r * cmath.exp(1j * ang)
        if -0.5 <= z.real and r <= math.pi:
            return z, K, j_max


def suite_regimes(n_cases: int = 500, n_em: int = 100, seed: int = 1, bits: int = 128,
                  em_L=(2, 4, 8)) -> SuiteResult:
    """Direct, closed-form and Euler-Maclaurin derivatives agree within their bounds.

    A second group checks the Euler-Maclaurin remainder against
    4(K-1)^{j+1}(2 pi)^{-2L} inside the EM dispatch domain.
    """
    ctx = PrecisionContext(bits)
    rng = np.random.default_rng(seed)
    res = SuiteResult("regimes")
    t0 = time.perf_counter()
    slack = 1e3 * ctx.epsilon_mach
    for _ in range(n_cases):
        z, K, j_max = _regime_sample(rng, em_domain=False)
        zz = ctx.asarray([z])
        Ks = np.array([K])
        out = {}
        for name in ("direct", "closed", "em"):
            G = geom_derivs_batch(zz, Ks, j_max, ctx, regime=name)
            out[name] = (ctx.to_complex(G.values[0]), G.bounds[0])
        res.cases += 1
        names = list(out)
        for i in range(3):
            for k in range(i + 1, 3):
                (va, ba), (vb, bb) = out[names[i]], out[names[k]]
                for j in range(j_max + 1):
                    diff = abs(va[j] - vb[j])
                    tol = ba[j] + bb[j] + slack * max(abs(va[j]), abs(vb[j]))
                    res.worst = max(res.worst, diff / tol if tol > 0 else (math.inf if diff else 0))
                    if diff > tol:
                        res.fail(f"{names[i]} vs {names[k]} at z={z} K={K} j={j}: "
                                 f"diff {diff:.2e} > {tol:.2e}")
    for _ in range(n_em):
        z, K, j_max = _regime_sample(rng, em_domain=True)
        zz = ctx.asarray([z])
        Ks = np.array([K])
        if choose_regimes(np.array([abs(z)]), Ks, j_max)[0] != EM:
            continue
        ref = ctx.to_complex(geom_derivs_batch(zz, Ks, j_max, ctx, regime="direct").values[0])
        S = 2.0 * (K - 1)
        for L in em_L:
            G = geom_derivs_batch(zz, Ks, j_max, ctx, regime="em", L=L)
            got = ctx.to_complex(G.values[0])
            res.cases += 1
            for j in range(j_max + 1):
                err = abs(got[j] - ref[j]) * S ** j
                lit = em_remainder_bound(K, j, L)
                if err > lit:
                    res.fail(f"EM remainder {err:.2e} exceeds 4(K-1)^(j+1)(2pi)^(-2L)={lit:.2e} "
                             f"at z={z} K={K} j={j} L={L}")
    res.seconds = time.perf_counter() - t0
    return res


SUITES = {
    "postnikov": suite_postnikov,
    "gkr": suite_gkr,
    "beta": suite_beta,
    "regimes": suite_regimes,
}


def run_suites(names=None, pa=None, **kwargs) -> list[SuiteResult]:
    """Run the selected suites; ``pa`` restricts the modulus-based ones."""
    names = list(SUITES) if not names else list(names)
    out = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
        fn = SUITES[name]
        if name in ("postnikov", "gkr"):
            kw = {k: v for k, v in kwargs.items() if k in ("per_character", "seed")
                  and name == "gkr"}
            out.append(fn(pa=pa, **kw))
        else:
            out.append(fn())
    return out

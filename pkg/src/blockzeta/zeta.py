"""Riemann zeta by Taylor-weighted geometric blocks, with certified bounds.

zeta(s) = sum_{n<v0} n^-s + sum_r v_r^-s B_r(s, m) + M^-s/2 + M^{1-s}/(s-1) + T + R

where B_r(s, m) = sum_{j<=m} c_j(s) g_{K_r}^{(j)}(-s/v_r) / v_r^j replaces the
block sum over [v_r, v_r + K_r), |T| <= eps_m(s, u0) calB and R is either the
plain tail bounded by q/(sigma M^sigma) or an Euler-Maclaurin correction.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from flint import acb, arb

from .coefficients import (CoefficientTable, bernoulli_over_factorial, build_beta_table,
                           c_coeffs, epsilon_m)
from .errors import DomainError, ParameterError
from .geomsum import geom_derivs_batch
from .numeric import (ComplexPoint, PrecisionContext, direct_sum, inv_powers,
                      reduce_ratios, roundoff_estimate, _arb_q, _prec)
from .schedule import BlockSchedule, EvalParams, build_schedule, validate_params

__all__ = [
    "EvalResult",
    "block_value",
    "block_values",
    "zeta_theorem1",
    "zeta_hybrid",
    "zeta_direct",
    "zeta_euler_maclaurin",
    "calB",
    "calB_closed_bound",
    "extra_terms",
    "em_corrections",
    "em_tail_bound",
    "em_sufficient",
]

CHUNK = 2048


@dataclass
class EvalResult:
    """A value together with its certified bounds and a parameter echo."""

    value: object
    truncation_bound: float
    tail_bound: float
    roundoff_estimate: float
    method: str
    precision_bits: int
    params: EvalParams | None = None
    R: int = -1
    block_count: int = 0
    terms_evaluated: int = 0
    L1: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def complex_value(self) -> complex:
        v = self.value
        if isinstance(v, acb):
            return complex(float(v.real.mid()), float(v.imag.mid()))
        return complex(v)

    @property
    def certified_bound(self) -> float:
        return self.truncation_bound + self.tail_bound


# -- building blocks ------------------------------------------------------------

def _check_pole(s: ComplexPoint) -> None:
    if s.sigma == 1 and s.t == 0:
        raise DomainError("zeta has a pole at s = 1")


def _block_z(s: ComplexPoint, v: np.ndarray, ctx: PrecisionContext,
             mult: int = 1, offsets=None) -> np.ndarray:
    """z_r = -mult*s/v_r with Im z reduced into (-pi, pi]."""
    im = reduce_ratios(-s.t * mult, v, ctx, offsets)
    if ctx.is_double:
        re = -float(s.sigma) * mult / v.astype(np.float64)
        return re + 1j * im
    out = np.empty(len(v), dtype=object)
    sig = _arb_q(s.sigma * mult)
    for i in range(len(v)):
        out[i] = acb(-sig / int(v[i]), im[i])
    return out


def _scaled_weights(S: np.ndarray, v: np.ndarray, m: int, ctx: PrecisionContext):
    """(S_r/v_r)^j for j = 0..m, as a list of backend vectors."""
    if ctx.is_double:
        r = S.astype(np.float64) / v.astype(np.float64)
        out = [np.ones(len(v))]
        for _ in range(m):
            out.append(out[-1] * r)
        return out
    from flint import fmpq
    r = np.empty(len(v), dtype=object)
    for i in range(len(v)):
        r[i] = arb(fmpq(int(S[i]), int(v[i])))
    out = [np.full(len(v), arb(1), dtype=object)]
    for _ in range(m):
        out.append(out[-1] * r)
    return out


def block_values(s: ComplexPoint, v: np.ndarray, K: np.ndarray, m: int,
                 cvals: list, ctx: PrecisionContext) -> tuple[np.ndarray, np.ndarray]:
    """B_r(s, m) for a vector of blocks, with the per-block geomsum bound."""
    z = _block_z(s, v, ctx)
    G = geom_derivs_batch(z, K, m, ctx)
    w = _scaled_weights(2 * np.maximum(K - 1, 1), v, m, ctx)
    B = ctx.zeros(len(v))
    err = np.zeros(len(v))
    for j in range(m + 1):
        coef = cvals[j] * w[j]
        B = B + coef * G.values[:, j]
        err += ctx.absf(coef) * G.bounds[:, j] if not ctx.is_double else np.abs(coef) * G.bounds[:, j]
    return B, err


def block_value(s: ComplexPoint, v_r: int, K_r: int, m: int,
                coeffs: CoefficientTable | None = None, ctx: PrecisionContext | None = None):
    """B_r(s, m) = sum_j c_j(s) g_{K_r}^{(j)}(-s/v_r)/v_r^j for one block."""
    ctx = ctx or PrecisionContext()
    with ctx.working():
        cvals = c_coeffs(s, m, coeffs, ctx)
        B, _ = block_values(s, np.array([v_r], dtype=np.int64), np.array([K_r], dtype=np.int64),
                            m, cvals, ctx)
    return B[0]


def _blocks_sum(s: ComplexPoint, sched: BlockSchedule, m: int, ctx: PrecisionContext,
                threads: int = 1):
    """sum_r v_r^-s B_r(s, m) with a fixed, worker-independent summation order."""
    cvals = c_coeffs(s, m, None, ctx)
    pieces = list(sched.chunks(CHUNK))

    def work(piece):
        v, K = piece
        with ctx.working():
            B, err = block_values(s, v, K, m, cvals, ctx)
            pw = inv_powers(v, s, ctx)
            return ctx.total(pw * B), float(np.sum(ctx.absf(pw) * err))

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, pieces))
    else:
        parts = [work(p) for p in pieces]
    with ctx.working():
        total = 0j if ctx.is_double else acb(0)
        gerr = 0.0
        for val, e in parts:
            total = total + val
            gerr += e
    return total, gerr


def extra_terms(s: ComplexPoint, M: int, ctx: PrecisionContext):
    """M^-s/2 + M^{1-s}/(s-1)."""
    _check_pole(s)
    with ctx.working():
        pw = inv_powers(np.array([M], dtype=np.int64), s, ctx)[0]
        sv = s.scalar(ctx)
        return pw * 0.5 + pw * M / (sv - 1)


def _tail_bound_plain(s: ComplexPoint, M: int) -> float:
    sigma = float(s.sigma)
    return math.exp(math.log(s.conductor_q) - math.log(sigma) - sigma * math.log(M))


def _roundoff(s: ComplexPoint, M: int, terms: int, ctx: PrecisionContext) -> float:
    """Round-off estimate: the phase model at phase precision plus eps*sqrt(terms)."""
    phase_ctx = PrecisionContext(ctx.phase_bits)
    return (roundoff_estimate(s.t, max(M, 2), phase_ctx)
            + ctx.epsilon_mach * math.sqrt(max(terms, 1)))


# -- truncation-bound machinery ----------------------------------------------------

def _g_real(K: np.ndarray, x: np.ndarray) -> np.ndarray:
    """g_K(-x) = (1 - e^{-Kx})/(1 - e^{-x}) for x > 0, K when x = 0."""
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.expm1(-K * x) / np.expm1(-x)
    return np.where(x > 0, g, K.astype(np.float64))


def abs_sin_lower(num: Fraction, v: np.ndarray, offsets=None) -> np.ndarray:
    """Lower bound for |sin(num/v + 2 pi offsets)| in float64.

    Moderate arguments are formed in double; larger ones, or ones with an
    offset, are reduced in Arb first.  The absolute error of the argument is
    subtracted so that the reciprocal is a valid csc upper bound.
    """
    eps = 2.0 ** -52
    if offsets is None and (len(v) == 0 or abs(float(num)) / float(v.min()) <= 2.0 ** 20):
        x = float(num) / v.astype(np.float64)
        err = 4 * eps * (np.abs(x) + 1)
    else:
        x = reduce_ratios(num, v, PrecisionContext(53), offsets)
        err = np.full(len(v), 4 * eps * (math.pi + 1))
    return np.maximum(np.abs(np.sin(x)) - err, 0.0)


def _min_g_csc(g: np.ndarray, sn: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """min{g, 1/sn}; sines below 2^(-bits/2) count as singular."""
    floor = 2.0 ** (-ctx.mantissa_bits / 2)
    with np.errstate(divide="ignore"):
        csc = np.where(sn < floor, np.inf, 1.0 / np.maximum(sn, floor))
    return np.minimum(g, csc)


def calB(s: ComplexPoint, u0: int, v0: int, M: int, ctx: PrecisionContext | None = None,
         schedule: BlockSchedule | None = None) -> float:
    """sum_r v_r^-sigma min{g_{K_r}(-sigma/v_r), |csc(t/(2 v_r))|}."""
    ctx = ctx or PrecisionContext()
    sched = schedule or build_schedule(u0, v0, M)
    if sched.block_count == 0:
        return 0.0
    sigma = float(s.sigma)
    total = 0.0
    for v, K in sched.chunks(1 << 18):
        vf = v.astype(np.float64)
        g = _g_real(K, sigma / vf)
        sn = abs_sin_lower(s.t / 2, v)
        total += float(np.sum(np.power(vf, -sigma) * _min_g_csc(g, sn, ctx)))
    return total


def calB_closed_bound(sigma, v0: int, M: int) -> float:
    """v0^-sigma + (M^{1-sigma} - v0^{1-sigma})/(1-sigma), or log(M/v0) at sigma = 1."""
    sigma = float(sigma)
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    head = v0 ** -sigma
    if sigma == 1.0:
        return head + math.log(M / v0)
    return head + (M ** (1 - sigma) - v0 ** (1 - sigma)) / (1 - sigma)


# -- Euler-Maclaurin -----------------------------------------------------------

def em_corrections(s: ComplexPoint, N: int, L1: int, ctx: PrecisionContext):
    """sum_{l=1}^{L1} B_{2l}/(2l)! N^-s prod_{i=0}^{2l-2} (s+i)/N."""
    with ctx.working():
        sv = s.scalar(ctx)
        pw = inv_powers(np.array([N], dtype=np.int64), s, ctx)[0]
        prod = sv / N
        total = 0j if ctx.is_double else acb(0)
        for ell in range(1, L1 + 1):
            if ell > 1:
                prod = prod * (sv + (2 * ell - 3)) / N * (sv + (2 * ell - 2)) / N
            b = bernoulli_over_factorial(2 * ell)
            bb = float(b) if ctx.is_double else _arb_q(b)
            total = total + bb * prod
        return total * pw


def _log_zeta_even(k2: int) -> float:
    """log zeta(k2) for even k2 >= 2 via |B_k| (2 pi)^k / (2 k!)."""
    b = abs(float(bernoulli_over_factorial(k2))) if k2 < 300 else 0.0
    if b > 0:
        return math.log(b) + k2 * math.log(2 * math.pi) - math.log(2.0)
    return math.log1p(2.0 ** -k2)


def em_tail_bound(s: ComplexPoint, N: int, L1: int) -> float:
    """zeta(2L1)/(pi N^sigma) |s+2L1-1|/(sigma+2L1-2) prod_{l<=2L1-2} |s+l|/(2 pi N)."""
    sigma = float(s.sigma)
    t = float(s.t)
    if sigma + 2 * L1 - 2 <= 0:
        raise DomainError("need sigma + 2 L1 - 2 > 0")
    lg = _log_zeta_even(2 * L1) - math.log(math.pi) - sigma * math.log(N)
    lg += math.log(math.hypot(sigma + 2 * L1 - 1, t)) - math.log(sigma + 2 * L1 - 2)
    for l in range(2 * L1 - 1):
        lg += math.log(math.hypot(sigma + l, t)) - math.log(2 * math.pi * N)
    return math.exp(lg) if lg < 709 else math.inf


def em_sufficient(s: ComplexPoint, N: int, L1: int, eps: float) -> bool:
    """2 pi N >= e |s+2L1-1| and 2L1-1 > 0.5 log|s+2L1-1| - log eps."""
    a = math.hypot(float(s.sigma) + 2 * L1 - 1, float(s.t))
    return 2 * math.pi * N >= math.e * a and 2 * L1 - 1 > 0.5 * math.log(a) - math.log(eps)


def zeta_euler_maclaurin(s: ComplexPoint, N: int, L1: int,
                         ctx: PrecisionContext | None = None) -> EvalResult:
    """Euler-Maclaurin value with the explicit remainder bound."""
    ctx = ctx or PrecisionContext()
    _check_pole(s)
    if N < 2 or L1 < 1:
        raise DomainError("need N >= 2 and L1 >= 1")
    t0 = time.perf_counter()
    with ctx.working():
        head = direct_sum(s, 1, N, ctx)
        val = head + extra_terms(s, N, ctx) + em_corrections(s, N, L1, ctx)
    res = EvalResult(value=val, truncation_bound=0.0, tail_bound=em_tail_bound(s, N, L1),
                     roundoff_estimate=_roundoff(s, N, N, ctx), method="em-only",
                     precision_bits=ctx.mantissa_bits, terms_evaluated=N - 1 + L1, L1=L1)
    res.extra["N"] = N
    res.extra["timing_ms"] = 1e3 * (time.perf_counter() - t0)
    return res


# -- block evaluations ---------------------------------------------------------

def _block_eval(s: ComplexPoint, p: EvalParams, ctx: PrecisionContext, threads: int):
    _check_pole(s)
    report = validate_params(s, p)
    if not report:
        raise ParameterError(report.violation)
    sched = build_schedule(p.u0, p.v0, p.M)
    # the pool runs outside ctx.working(): workers take the precision lock themselves
    blocks, gerr = _blocks_sum(s, sched, p.m, ctx, threads)
    with ctx.working():
        head = direct_sum(s, 1, p.v0, ctx)
        value = head + blocks + extra_terms(s, p.M, ctx)
    eps = epsilon_m(s, p.u0, p.m)
    cb = calB(s, p.u0, p.v0, p.M, ctx, sched)
    trunc = eps * cb if cb > 0 else 0.0
    terms = (p.v0 - 1) + (p.m + 1) * sched.block_count + 1
    return value, sched, trunc, gerr, terms, eps, cb


def _result(value, s, p, sched, trunc, gerr, terms, eps, cb, tail, method, ctx, t0, L1=None):
    res = EvalResult(value=value, truncation_bound=trunc, tail_bound=tail,
                     roundoff_estimate=_roundoff(s, p.M, terms, ctx) + gerr,
                     method=method, precision_bits=ctx.mantissa_bits, params=p,
                     R=sched.R, block_count=sched.block_count, terms_evaluated=terms, L1=L1)
    res.extra.update({"epsilon_m": eps, "calB": cb, "geomsum_error": gerr,
                      "timing_ms": 1e3 * (time.perf_counter() - t0)})
    return res


def zeta_theorem1(s: ComplexPoint, p: EvalParams, ctx: PrecisionContext | None = None,
                  threads: int = 1) -> EvalResult:
    """Block formula with the plain tail bound q/(sigma M^sigma)."""
    ctx = ctx or PrecisionContext()
    t0 = time.perf_counter()
    value, sched, trunc, gerr, terms, eps, cb = _block_eval(s, p, ctx, threads)
    return _result(value, s, p, sched, trunc, gerr, terms, eps, cb,
                   _tail_bound_plain(s, p.M), "theorem1-tail", ctx, t0)


def zeta_hybrid(s: ComplexPoint, p: EvalParams, L1: int = 6,
                ctx: PrecisionContext | None = None, threads: int = 1) -> EvalResult:
    """Block formula with Euler-Maclaurin corrections at M replacing the tail."""
    ctx = ctx or PrecisionContext()
    t0 = time.perf_counter()
    value, sched, trunc, gerr, terms, eps, cb = _block_eval(s, p, ctx, threads)
    with ctx.working():
        value = value + em_corrections(s, p.M, L1, ctx)
    return _result(value, s, p, sched, trunc, gerr, terms, eps, cb,
                   em_tail_bound(s, p.M, L1), "em-tail", ctx, t0, L1=L1)


def zeta_direct(s: ComplexPoint, M: int, ctx: PrecisionContext | None = None) -> EvalResult:
    """sum_{n<M} n^-s + M^-s/2 + M^{1-s}/(s-1) with the plain tail bound."""
    ctx = ctx or PrecisionContext()
    _check_pole(s)
    t0 = time.perf_counter()
    with ctx.working():
        value = direct_sum(s, 1, M, ctx) + extra_terms(s, M, ctx)
    res = EvalResult(value=value, truncation_bound=0.0, tail_bound=_tail_bound_plain(s, M),
                     roundoff_estimate=_roundoff(s, M, M, ctx), method="direct",
                     precision_bits=ctx.mantissa_bits, terms_evaluated=M)
    res.extra["timing_ms"] = 1e3 * (time.perf_counter() - t0)
    return res

"""Dirichlet L-functions to prime-power modulus by twisted geometric blocks.

For chi mod p^a and b = ceil(a/2), chi(1 + p^b x) = e^{2 pi i L x / p^{a-b}}
for a fixed integer L.  Splitting a block [v, v+K) into residues d mod p^b
turns the twisted sum into p^b plain geometric sums:

    sum_{k<K} chi(v+k) e^{kz} = sum_{d<p^b} chi(v+d) e^{zd} g_{H_d}(p^b z + i w_d)

with H_d = ceil((K-d)/p^b) and w_d = 2 pi L (v+d)^{-1} / p^{a-b}.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from flint import acb, arb, fmpq

from .coefficients import c_coeffs, epsilon_m
from .errors import ConsistencyError, DomainError, ParameterError
from .geomsum import geom_derivs_batch, _binom_row
from .numeric import ComplexPoint, PrecisionContext, inv_powers, _arb_q
from .schedule import EvalParams, build_schedule, validate_params
from .zeta import CHUNK, EvalResult, _block_z, _g_real, _min_g_csc, _roundoff, abs_sin_lower

__all__ = [
    "PrimePowerCharacter",
    "build_character",
    "postnikov_L",
    "twisted_geom_sum",
    "twisted_geom_derivs",
    "block_value_chi",
    "calB_chi",
    "lfun_theorem2",
    "default_params_chi",
    "is_prime",
]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _prime_factors(n: int) -> list[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def _primitive_root(p: int, a: int) -> int:
    """Smallest generator of (Z/p^a)^* for odd p."""
    q = p ** a
    phi = q - q // p
    factors = _prime_factors(phi)
    for g in range(2, q):
        if g % p and all(pow(g, phi // f, q) != 1 for f in factors):
            return g
    raise ConsistencyError(f"no primitive root mod {q}")


@dataclass(frozen=True)
class PrimePowerCharacter:
    """A Dirichlet character mod p^a stored by exact phases.

    ``numer[n]`` is -1 when p | n, else chi(n) = exp(2 pi i numer[n]/order).
    """

    p: int
    a: int
    index: int
    numer: np.ndarray
    order: int
    generator: int | None

    @property
    def b(self) -> int:
        return (self.a + 1) // 2

    @property
    def modulus(self) -> int:
        return self.p ** self.a

    @property
    def is_principal(self) -> bool:
        return self.index == 0

    @cached_property
    def values(self) -> np.ndarray:
        vals = np.exp(2j * np.pi * self.numer / self.order)
        vals[self.numer < 0] = 0
        return vals

    def __call__(self, n: int) -> complex:
        return complex(self.values[int(n) % self.modulus])

    def turns(self, n: int) -> Fraction | None:
        """chi(n) as a fraction of a full turn, or None when chi(n) = 0."""
        k = int(self.numer[int(n) % self.modulus])
        return None if k < 0 else Fraction(k, self.order)

    def backend_values(self, ns: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
        """chi(n) for an integer array in the context backend."""
        idx = np.asarray(ns, dtype=np.int64) % self.modulus
        if ctx.is_double:
            return self.values[idx]
        out = np.empty(len(idx), dtype=object)
        cache: dict[int, acb] = {}
        for i, r in enumerate(idx):
            k = int(self.numer[r])
            if k not in cache:
                if k < 0:
                    cache[k] = acb(0)
                else:
                    sn, cs = arb.sin_cos_pi_fmpq(fmpq(2 * k, self.order))
                    cache[k] = acb(cs, sn)
            out[i] = cache[k]
        return out

    @cached_property
    def postnikov_L(self) -> int:
        return postnikov_L(self)


def build_character(p: int, a: int, index: int, ctx: PrecisionContext | None = None
                    ) -> PrimePowerCharacter:
    """Character number ``index`` mod p^a.

    Odd p: chi(g^k) = exp(2 pi i index k / phi) with g the smallest primitive
    root.  p = 2: n = (-1)^e 5^k and index = i1 2^(a-2) + i2 gives
    chi(n) = exp(2 pi i (i1 e / 2 + i2 k / 2^(a-2))).
    """
    if not is_prime(int(p)):
        raise ParameterError(f"p={p} is not prime")
    if a < 1:
        raise ParameterError("a must be >= 1")
    q = p ** a
    phi = q - q // p
    if not 0 <= index < phi:
        raise ParameterError(f"index must lie in [0, {phi})")
    numer = np.full(q, -1, dtype=np.int64)
    if p != 2:
        g = _primitive_root(p, a)
        x = 1
        for k in range(phi):
            numer[x] = (index * k) % phi
            x = x * g % q
        gen = g
    else:
        gen = None
        if a == 1:
            numer[1] = 0
        else:
            half = 1 << (a - 2)
            i1, i2 = divmod(index, half)
            for e in (0, 1):
                x = 1 if e == 0 else q - 1
                for k in range(half):
                    # phase i1 e/2 + i2 k/2^(a-2), in units of 1/phi = 1/2^(a-1)
                    numer[x] = (i1 * e * half + i2 * k * 2) % phi
                    x = x * 5 % q
    if np.any(numer[[n for n in range(q) if n % p]] < 0):
        raise ConsistencyError("discrete-log table incomplete")
    return PrimePowerCharacter(p=p, a=a, index=index, numer=numer, order=phi, generator=gen)


def postnikov_L(chi: PrimePowerCharacter) -> int:
    """L in [0, p^(a-b)) with chi(1 + p^b x) = exp(2 pi i L x / p^(a-b)).

    L is read off the argument of chi(1 + p^b), then checked exactly for
    every x < p^(a-b).
    """
    p, a, b = chi.p, chi.a, chi.b
    P = p ** (a - b)
    if P == 1:
        return 0
    w = chi(1 + p ** b)
    L = int(round(math.atan2(w.imag, w.real) / (2 * math.pi) * P)) % P
    q = chi.modulus
    for x in range(P):
        k = int(chi.numer[(1 + p ** b * x) % q])
        if k < 0 or (k * P - L * x * chi.order) % (chi.order * P):
            raise ConsistencyError(f"Postnikov relation fails at x={x} for {chi.index} mod {q}")
    return L


def default_params_chi(s: ComplexPoint, chi: PrimePowerCharacter, m: int) -> EvalParams:
    """u0 = 2 ceil(max{6, sqrt q(s), sigma}), v0 = p^b u0, M = 10 ceil(q(s, chi))."""
    u0 = 2 * math.ceil(max(6.0, math.sqrt(s.conductor_q), float(s.sigma)))
    v0 = chi.p ** chi.b * u0
    M = 10 * math.ceil(chi.modulus * s.conductor_q)
    return EvalParams(u0=u0, v0=v0, M=max(M, v0), m=m)


# -- twisted block decomposition ------------------------------------------------

@dataclass(frozen=True)
class _Split:
    """Flattened (block, residue) pairs of a batch of blocks."""

    block: np.ndarray     # index of the owning block
    d: np.ndarray         # residue offset d < p^b
    H: np.ndarray         # inner length ceil((K-d)/p^b)
    turns: list           # w_d / (2 pi) as exact fractions


def _split_blocks(chi: PrimePowerCharacter, v: np.ndarray, K: np.ndarray) -> _Split:
    p, pb = chi.p, chi.p ** chi.b
    P = p ** (chi.a - chi.b)
    q = chi.modulus
    L = chi.postnikov_L
    blk, ds, Hs, turns = [], [], [], []
    for r in range(len(v)):
        vr, Kr = int(v[r]), int(K[r])
        for d in range(min(pb, Kr)):
            n = vr + d
            if n % p == 0:
                continue
            blk.append(r)
            ds.append(d)
            Hs.append(-(-(Kr - d) // pb))
            inv = pow(n % q, -1, q)
            turns.append(Fraction((inv * L) % P, P))
    return _Split(np.array(blk, dtype=np.int64), np.array(ds, dtype=np.int64),
                  np.array(Hs, dtype=np.int64), turns)


def _inner_z(s_or_z, chi, v_pairs, split, ctx, z_given=None):
    """p^b z + i w_d for every pair, Im reduced into (-pi, pi]."""
    pb = chi.p ** chi.b
    if z_given is None:
        return _block_z(s_or_z, v_pairs, ctx, mult=pb, offsets=split.turns)
    # explicit z: shift by 2 pi i turns in the backend
    out = z_given * pb
    if ctx.is_double:
        return out + 2j * np.pi * np.array([float(t) for t in split.turns])
    res = np.empty(len(out), dtype=object)
    two_pi = 2 * arb.pi()
    for i in range(len(out)):
        res[i] = out[i] + acb(0, two_pi * _arb_q(split.turns[i]))
    return res


def _twisted_scaled(chi, z_outer, v, K, split, z_inner, J, ctx, weights_v):
    """Per-pair terms chi(v+d) e^{zd} sum_l C(j,l) (d/v')^{j-l} (p^b S/v')^l G_l.

    ``weights_v`` is the divisor v' per block (the block start for L-function
    blocks, 1 for raw derivatives).  Returns a (pairs, J) array and bounds.
    """
    pb = chi.p ** chi.b
    G = geom_derivs_batch(z_inner, split.H, J - 1, ctx)
    S = G.scale
    vv = weights_v[split.block]
    chiv = chi.backend_values(v[split.block] + split.d, ctx)
    ezd = ctx.exp(z_outer[split.block] * _int_vec(split.d, ctx))
    pref = chiv * ezd
    if ctx.is_double:
        a = split.d / vv
        bsc = pb * S / vv
    else:
        a = np.empty(len(vv), dtype=object)
        bsc = np.empty(len(vv), dtype=object)
        for i in range(len(vv)):
            a[i] = arb(fmpq(int(split.d[i]), int(vv[i])))
            bsc[i] = arb(fmpq(int(pb * S[i]), int(vv[i])))
    af = np.asarray(split.d / vv.astype(np.float64))
    bf = pb * S / vv.astype(np.float64)
    out = ctx.zeros((len(split.H), J))
    bounds = np.zeros((len(split.H), J))
    apow = [None] * J
    bpow = [None] * J
    for l in range(J):
        apow[l] = a ** l if ctx.is_double else _obj_pow(a, l)
        bpow[l] = bsc ** l if ctx.is_double else _obj_pow(bsc, l)
    for j in range(J):
        row = _binom_row(j)
        acc = ctx.zeros(len(split.H))
        accb = np.zeros(len(split.H))
        for l in range(j + 1):
            c = row[l] * apow[j - l] * bpow[l]
            acc = acc + c * G.values[:, l]
            accb += row[l] * af ** (j - l) * bf ** l * G.bounds[:, l]
        out[:, j] = pref * acc
        bounds[:, j] = accb
    return out, bounds


def _int_vec(d, ctx):
    if ctx.is_double:
        return d.astype(np.float64)
    out = np.empty(len(d), dtype=object)
    for i in range(len(d)):
        out[i] = arb(int(d[i]))
    return out


def _obj_pow(x, n):
    out = np.empty(len(x), dtype=object)
    for i in range(len(x)):
        out[i] = x[i] ** n
    return out


def _direct_twisted(z, chi, v, K, j_max, ctx):
    with ctx.working():
        z = ctx.asarray([z])[0]
        ks = np.arange(K, dtype=np.int64)
        chiv = chi.backend_values(v + ks, ctx)
        e = ctx.exp(_int_vec(ks, ctx) * z)
        out = []
        term = chiv * e
        kk = _int_vec(ks, ctx)
        for j in range(j_max + 1):
            out.append(ctx.total(term))
            term = term * kk
    return out


def twisted_geom_derivs(z, chi: PrimePowerCharacter, v: int, K: int, j_max: int,
                        ctx: PrecisionContext | None = None, strategy: str = "decomposition"):
    """d^j/dz^j of sum_{k<K} chi(v+k) e^{kz} for j = 0..j_max.

    ``strategy`` is ``"direct"`` (term by term) or ``"decomposition"``
    (residue split into p^b plain geometric sums).
    """
    ctx = ctx or PrecisionContext()
    if K < 1:
        raise DomainError("K must be positive")
    if strategy == "direct":
        return _direct_twisted(z, chi, v, K, j_max, ctx)
    if strategy != "decomposition":
        raise ParameterError(f"unknown strategy {strategy!r}")
    with ctx.working():
        zz = ctx.asarray([z])
        if float(ctx.to_complex(zz)[0].real) > 0:
            raise DomainError("need Re z <= 0")
        vv = np.array([v], dtype=np.int64)
        split = _split_blocks(chi, vv, np.array([K], dtype=np.int64))
        if len(split.H) == 0:
            return [ctx.zeros(1)[0] for _ in range(j_max + 1)]
        zin = _inner_z(None, chi, vv[split.block], split, ctx, z_given=zz[split.block])
        ones = np.ones(1, dtype=np.int64)
        terms, _ = _twisted_scaled(chi, zz, vv, None, split, zin, j_max + 1, ctx, ones)
        return [ctx.total(terms[:, j]) for j in range(j_max + 1)]


def twisted_geom_sum(z, chi: PrimePowerCharacter, v: int, K: int,
                     ctx: PrecisionContext | None = None):
    """sum_{k<K} chi(v+k) e^{kz} via the residue decomposition."""
    return twisted_geom_derivs(z, chi, v, K, 0, ctx)[0]


def _blocks_chi(s, chi, v, K, m, cvals, ctx):
    """B_r(s, chi, m) for a batch of blocks, plus a geomsum error bound."""
    split = _split_blocks(chi, v, K)
    B = ctx.zeros(len(v))
    err = np.zeros(len(v))
    if len(split.H) == 0:
        return B, err, 0
    z_outer = _block_z(s, v, ctx)
    zin = _inner_z(s, chi, v[split.block], split, ctx)
    terms, bounds = _twisted_scaled(chi, z_outer, v, K, split, zin, m + 1, ctx, v)
    pair = ctx.zeros(len(split.H))
    pb = np.zeros(len(split.H))
    for j in range(m + 1):
        pair = pair + cvals[j] * terms[:, j]
        pb += abs(complex(cvals[j]) if ctx.is_double else _c2f(cvals[j])) * bounds[:, j]
    if ctx.is_double:
        B = np.bincount(split.block, weights=pair.real, minlength=len(v)) \
            + 1j * np.bincount(split.block, weights=pair.imag, minlength=len(v))
    else:
        for i, r in enumerate(split.block):
            B[r] = B[r] + pair[i]
    err = np.bincount(split.block, weights=pb, minlength=len(v))
    return B, err, len(split.H)


def _c2f(x) -> complex:
    return complex(float(x.real.mid()), float(x.imag.mid()))


def block_value_chi(s: ComplexPoint, chi: PrimePowerCharacter, v_r: int, K_r: int, m: int,
                    ctx: PrecisionContext | None = None):
    """B_r(s, chi, m) = sum_j c_j(s) g_{K_r}^{(j)}(-s/v_r, chi, v_r)/v_r^j."""
    ctx = ctx or PrecisionContext()
    with ctx.working():
        cvals = c_coeffs(s, m, None, ctx)
        B, _, _ = _blocks_chi(s, chi, np.array([v_r], dtype=np.int64),
                              np.array([K_r], dtype=np.int64), m, cvals, ctx)
    return B[0]


def calB_chi(s: ComplexPoint, chi: PrimePowerCharacter, u0: int, v0: int, M: int,
             ctx: PrecisionContext | None = None, schedule=None) -> float:
    """sum_r sum_{d coprime} v_r^-sigma min{e^{-sigma d/v_r} g_H(-p^b sigma/v_r),
    |csc(w_{r,d}/2 - p^b t/(2 v_r))|}."""
    ctx = ctx or PrecisionContext()
    sched = schedule or build_schedule(u0, v0, M)
    if sched.block_count == 0:
        return 0.0
    sigma = float(s.sigma)
    pb = chi.p ** chi.b
    total = 0.0
    for v, K in sched.chunks(1 << 14):
        split = _split_blocks(chi, v, K)
        if len(split.H) == 0:
            continue
        vv = v[split.block].astype(np.float64)
        g = np.exp(-sigma * split.d / vv) * _g_real(split.H, pb * sigma / vv)
        sn = abs_sin_lower(-s.t * pb / 2, v[split.block], [t / 2 for t in split.turns])
        total += float(np.sum(np.power(vv, -sigma) * _min_g_csc(g, sn, ctx)))
    return total


def lfun_theorem2(s: ComplexPoint, chi: PrimePowerCharacter, p: EvalParams,
                  ctx: PrecisionContext | None = None, threads: int = 1) -> EvalResult:
    """L(s, chi) by twisted blocks with certified truncation and tail bounds."""
    ctx = ctx or PrecisionContext()
    if chi.is_principal:
        raise ParameterError("principal character")
    report = validate_params(s, p)
    if not report:
        raise ParameterError(report.violation)
    pb = chi.p ** chi.b
    if p.v0 < 2 * pb * s.sigma:
        raise ParameterError("v0 < 2 p^b σ")
    t0 = time.perf_counter()
    sched = build_schedule(p.u0, p.v0, p.M)
    with ctx.working():
        cvals = c_coeffs(s, p.m, None, ctx)
        ns = np.arange(1, p.v0, dtype=np.int64)
        head = ctx.total(inv_powers(ns, s, ctx) * chi.backend_values(ns, ctx))

    def work(piece):
        v, K = piece
        with ctx.working():
            B, err, pairs = _blocks_chi(s, chi, v, K, p.m, cvals, ctx)
            pw = inv_powers(v, s, ctx)
            return ctx.total(pw * B), float(np.sum(ctx.absf(pw) * err)), pairs

    pieces = list(sched.chunks(CHUNK))
    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, pieces))
    else:
        parts = [work(pc) for pc in pieces]
    with ctx.working():
        value = head
        gerr = 0.0
        pairs = 0
        for val, e, n in parts:
            value = value + val
            gerr += e
            pairs += n
    eps = epsilon_m(s, p.u0, p.m)
    cb = calB_chi(s, chi, p.u0, p.v0, p.M, ctx, sched)
    qchi = chi.modulus * s.conductor_q
    sigma = float(s.sigma)
    tail = math.exp(math.log(2 * qchi) - math.log(sigma) - sigma * math.log(p.M))
    terms = (p.v0 - 1) + (p.m + 1) * pairs
    res = EvalResult(value=value, truncation_bound=eps * cb, tail_bound=tail,
                     roundoff_estimate=_roundoff(s, p.M, terms, ctx) + gerr,
                     method="theorem2", precision_bits=ctx.mantissa_bits, params=p,
                     R=sched.R, block_count=sched.block_count, terms_evaluated=terms)
    res.extra.update({"epsilon_m": eps, "calB": cb, "geomsum_error": gerr,
                      "term_limit": p.v0 + (p.m + 1) * sched.block_count * pb,
                      "timing_ms": 1e3 * (time.perf_counter() - t0)})
    return res

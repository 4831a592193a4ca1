"""Geometric sums g_K(z) = sum_{k<K} e^{kz} and their z-derivatives.

Derivatives are produced by one of three strategies:

* ``direct``: sum k^j e^{kz} term by term (used when K <= 2 pi (j_max+1));
* ``closed``: product rule on (e^{Kz} - 1) * y(z), y = 1/(e^z - 1), with the
  derivatives of y from its Bernoulli-Laurent series (used when
  |z| (K-1) > 10 (j_max+1));
* ``em``: Euler-Maclaurin on h(x) = x^j e^{zx} over [0, K-1], the integral
  being done by piecewise Taylor expansion.

The batch entry point works on *scaled* derivatives
G_j = g^{(j)} / S^j with S = 2 max(K-1, 1), which are all O(1) in size.
Every strategy returns a per-entry error bound alongside the values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from flint import acb, arb, fmpq

from .coefficients import bernoulli_over_factorial
from .errors import DomainError, ParameterError
from .numeric import PrecisionContext

__all__ = [
    "GeomDerivRequest",
    "GeomDerivs",
    "geom_sum",
    "y_laurent_derivs",
    "geom_sum_derivs",
    "geom_derivs_batch",
    "em_geom_deriv",
    "em_remainder_bound",
    "poly_exp_integral",
    "choose_regimes",
]

TWO_PI = 2.0 * math.pi
LOG_TWO_PI = math.log(TWO_PI)
DIRECT, CLOSED, EM = 0, 1, 2
REGIME_NAMES = {"direct": DIRECT, "closed": CLOSED, "em": EM}
EM_L_CAP = 60


@dataclass(frozen=True)
class GeomDerivs:
    """Scaled derivatives G[i, j] = g_{K_i}^{(j)}(z_i) / S_i^j with bounds."""

    values: np.ndarray
    bounds: np.ndarray
    regimes: np.ndarray
    scale: np.ndarray


# -- small exact helpers -----------------------------------------------------

@lru_cache(maxsize=None)
def _binom_row(n: int) -> tuple:
    return tuple(math.comb(n, k) for k in range(n + 1))


def _falling(n: int, k: int) -> int:
    """n (n-1) ... (n-k+1), zero once a factor hits zero."""
    out = 1
    for i in range(k):
        out *= n - i
    return out


@lru_cache(maxsize=None)
def _bern_arb(n2: int, prec: int) -> arb:
    q = bernoulli_over_factorial(n2)
    return arb(fmpq(q.numerator, q.denominator))


def _bern(n2: int, ctx: PrecisionContext):
    """B_{n2}/n2! in the backend."""
    if ctx.is_double:
        return float(bernoulli_over_factorial(n2))
    return _bern_arb(n2, ctx.mantissa_bits)


def _rat(num: int, den: int, ctx: PrecisionContext):
    if ctx.is_double:
        return num / den
    return arb(fmpq(num, den))


def _rat_vec(nums, dens, ctx: PrecisionContext) -> np.ndarray:
    if ctx.is_double:
        return np.asarray(nums, dtype=np.float64) / np.asarray(dens, dtype=np.float64)
    out = np.empty(len(nums), dtype=object)
    for i, (a, b) in enumerate(zip(nums, dens)):
        out[i] = arb(fmpq(int(a), int(b)))
    return out


def _reduce_imag(z: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """Shift Im z into (-pi, pi] by multiples of 2 pi i."""
    zc = ctx.to_complex(z)
    k = np.round(zc.imag / TWO_PI)
    if not np.any(k):
        return z
    if ctx.is_double:
        return z - 1j * TWO_PI * k
    two_pi = 2 * arb.pi()
    out = z.copy()
    for i in np.nonzero(k)[0]:
        out[i] = z[i] - acb(0, two_pi * int(k[i]))
    return out


# -- regime (a): direct summation --------------------------------------------

def _direct(z, K, J, ctx):
    n = len(K)
    S = 2 * np.maximum(K - 1, 1)
    vals = ctx.zeros((n, J))
    mags = np.zeros((n, J))
    kmax = int(K.max()) if n else 0
    for k in range(kmax):
        idx = np.nonzero(K > k)[0]
        if k == 0:
            term = ctx.asarray([1] * len(idx)) if not ctx.is_double else np.ones(len(idx), dtype=np.complex128)
        else:
            term = ctx.exp(k * z[idx])
        tmag = ctx.absf(term)
        ratio = _rat_vec([k] * len(idx), S[idx], ctx)
        rf = k / S[idx]
        for j in range(J):
            if j and k == 0:
                break
            vals[idx, j] += term
            mags[idx, j] += tmag
            if j + 1 < J:
                term = term * ratio
                tmag = tmag * rf
    bounds = 4.0 * ctx.epsilon_mach * (K[:, None] + 2) * mags
    return vals, bounds


# -- regime (b): closed form with the Laurent series of y ---------------------

def _laurent_u(z, lmax, ctx, n_terms=None):
    """U_l = z^l y^{(l)}(z) for l = 0..lmax with tail bounds.

    y^{(l)}(z) = (-1)^l l!/z^{l+1} - [l=0]/2
                 + sum_{i>=1} (B_{2i}/(2i)!) falling(2i-1, l) z^{2i-1-l}.
    Multiplying by z^l keeps every term O(1) even when |z| is tiny.
    The tail after term n is bounded with |B_{2i}/(2i)!| <= 4/(2 pi)^{2i};
    successive bounding terms have a ratio that decreases in i, so the tail
    is at most (next term)/(1 - ratio).
    """
    n = len(z)
    zabs = ctx.absf(z)
    if np.any(zabs == 0) or np.any(zabs >= TWO_PI):
        raise DomainError("Laurent series needs 0 < |z| < 2 pi")
    U = ctx.zeros((n, lmax + 1))
    inv_z = 1 / z if ctx.is_double else _obj_inv(z)
    for l in range(lmax + 1):
        U[:, l] = ((-1) ** l * math.factorial(l)) * inv_z
    U[:, 0] = U[:, 0] - (0.5 if ctx.is_double else arb(fmpq(1, 2)))
    lead = np.array([math.factorial(l) for l in range(lmax + 1)], dtype=np.float64)[None, :] / zabs[:, None]
    target = ctx.epsilon_mach / 16.0
    log_rho = np.log(zabs / TWO_PI)
    log_z = np.log(zabs)
    z2 = z * z
    P = z
    cap = n_terms if n_terms is not None else (150 if ctx.is_double else 2000)
    tails = np.full((n, lmax + 1), np.inf)
    mags = lead + 0.5
    for i in range(1, cap + 1):
        b = _bern(2 * i, ctx)
        T = b * P
        Tf = ctx.absf(T)
        for l in range(lmax + 1):
            f = _falling(2 * i - 1, l)
            if f == 0:
                break
            U[:, l] += f * T
            mags[:, l] += f * Tf
        P = P * z2
        tails = _laurent_tail(i, lmax, log_rho, log_z)
        if n_terms is None and np.all(tails <= target * lead):
            break
    # rounding: every term and partial sum carries a relative error of a few eps
    return U, tails + 8 * ctx.epsilon_mach * mags


def _laurent_tail(i, lmax, log_rho, log_z):
    """Tail bound for sum over i' > i of 4 rho^{2i'}/|z| falling(2i'-1, l)."""
    nxt = i + 1
    out = np.empty((len(log_rho), lmax + 1))
    for l in range(lmax + 1):
        if 2 * nxt - 1 - l < 0:
            # series terms with 2i'-1 < l vanish; start at the first nonzero one
            first = (l + 2) // 2
            nxt_l = max(nxt, first)
        else:
            nxt_l = nxt
        lf = math.lgamma(2 * nxt_l) - math.lgamma(2 * nxt_l - l)
        log_term = math.log(4.0) + 2 * nxt_l * log_rho - log_z + lf
        a = 2 * nxt_l
        ratio_poly = (a + 1) * a / ((a + 1 - l) * (a - l))
        ratio = ratio_poly * np.exp(2 * log_rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, l] = np.where(ratio < 1, np.exp(log_term) / (1 - ratio), np.inf)
    return out


_obj_inv = np.frompyfunc(lambda x: 1 / x, 1, 1)


def y_laurent_derivs(z, l_max: int, n_terms: int | None, ctx: PrecisionContext):
    """y^{(l)}(z) for l = 0..l_max, y(z) = 1/(e^z - 1), with tail bounds.

    ``n_terms`` fixes the number of Bernoulli terms; ``None`` picks it
    adaptively for the context precision.  Requires 0 < |z| < 2 pi.
    """
    with ctx.working():
        za = ctx.asarray([z])
        U, tails = _laurent_u(za, l_max, ctx, n_terms)
        zabs = float(ctx.absf(za)[0])
        vals = []
        bounds = []
        zp = za[0] ** 0 if not ctx.is_double else 1.0
        for l in range(l_max + 1):
            vals.append(U[0, l] / zp)
            bounds.append(float(tails[0, l]) / zabs ** l)
            zp = zp * za[0]
    return vals, bounds


def _closed(z, K, J, ctx):
    n = len(K)
    X = K - 1
    U, Ub = _laurent_u(z, J - 1, ctx)
    zX = z * _rat_vec(X, np.ones(n, dtype=np.int64), ctx)
    inv_zX = 1 / zX if ctx.is_double else _obj_inv(zX)
    zXf = ctx.absf(zX)
    # Y_l = y^{(l)} / X^l = U_l / (z X)^l
    Y = ctx.zeros((n, J))
    Yb = np.zeros((n, J))
    pw = None
    for l in range(J):
        if l == 0:
            Y[:, 0] = U[:, 0]
        else:
            pw = inv_zX if pw is None else pw * inv_zX
            Y[:, l] = U[:, l] * pw
        Yb[:, l] = Ub[:, l] / zXf ** l + 4 * l * ctx.epsilon_mach * ctx.absf(Y[:, l])
    eKz = ctx.exp(z * _rat_vec(K, np.ones(n, dtype=np.int64), ctx))
    eKzf = ctx.absf(eKz)
    Kzf = K * ctx.absf(z)
    ratio = _rat_vec(K, X, ctx)
    ratio_f = K / X
    vals = ctx.zeros((n, J))
    bounds = np.zeros((n, J))
    for j in range(J):
        acc = ctx.zeros(n)
        accb = np.zeros(n)
        mag = np.zeros(n)
        row = _binom_row(j)
        rp = None
        for l in range(j, -1, -1):
            # (K/X)^{j-l}
            if l == j:
                term = Y[:, l]
                termf = np.ones(n)
            else:
                rp = ratio if rp is None else rp * ratio
                term = row[l] * rp * Y[:, l]
                termf = row[l] * ratio_f ** (j - l)
            acc = acc + term
            accb += termf * Yb[:, l]
            mag += termf * ctx.absf(Y[:, l])
        scale = 0.5 ** j
        vals[:, j] = (eKz * acc - Y[:, j]) * scale
        # e^{Kz} inherits a relative error of about eps*|Kz| from z itself
        e_rel = ctx.epsilon_mach * (8 + Kzf)
        bounds[:, j] = scale * (eKzf * (accb + (e_rel + 8 * ctx.epsilon_mach * (j + 1)) * mag)
                                + Yb[:, j] + 8 * ctx.epsilon_mach * ctx.absf(Y[:, j]))
    return vals, bounds


# -- regime (c): Euler-Maclaurin ----------------------------------------------

def em_remainder_bound(K: int, j: int, L: int) -> float:
    """4 (K-1)^{j+1} (2 pi)^{-2L}."""
    return math.exp(math.log(4.0) + (j + 1) * math.log(max(K - 1, 1)) - 2 * L * LOG_TWO_PI)


def _em_rigorous_log(X, zabs, j, L):
    """log of 4X (2pi)^{-2L} sum_l C(2L,l) falling(j,l) X^{-l} |z|^{2L-l} (scaled units)."""
    acc = np.zeros(len(X))
    with np.errstate(divide="ignore"):
        lz = np.log(zabs)
    lX = np.log(X)
    terms = []
    for l in range(min(2 * L, j) + 1):
        c = math.log(math.comb(2 * L, l)) + math.log(_falling(j, l)) if _falling(j, l) else -np.inf
        terms.append(c - l * lX + (2 * L - l) * lz)
    stack = np.vstack(terms)
    mx = stack.max(axis=0)
    with np.errstate(invalid="ignore"):
        acc = mx + np.log(np.sum(np.exp(stack - mx), axis=0))
    acc = np.where(np.isfinite(mx), acc, -np.inf)
    return math.log(4.0) + lX - 2 * L * LOG_TWO_PI + acc


def _em_bound_scaled(X, zabs, j, L):
    """Scaled EM remainder bound: max of the literal and rigorous forms, times 2^-j."""
    lit = math.log(4.0) + np.log(X) - 2 * L * LOG_TWO_PI
    rig = _em_rigorous_log(X, zabs, j, L)
    return np.exp(np.maximum(lit, rig) - j * math.log(2.0))


def _choose_L(X, zabs, J, ctx, L=None):
    if L is not None:
        return L
    target = ctx.epsilon_mach / 16.0
    for cand in range(1, EM_L_CAP + 1):
        ok = True
        for j in range(J):
            b = _em_bound_scaled(X, zabs, j, cand)
            size = X * 0.5 ** j / (j + 1)
            if np.any(b > target * size):
                ok = False
                break
        if ok:
            return cand
    return EM_L_CAP


def _taylor_moments(w, J, P, ctx):
    """mu_i = sum_n w^n/n! h^{n+i+1}/(n+i+1), h = 1/P, with a tail bound."""
    n = len(w)
    wf = ctx.absf(w)
    wh = float(wf.max()) / P if n else 0.0
    target = ctx.epsilon_mach / 64.0
    N = 0
    term = 1.0
    while True:
        term *= wh / (N + 1)
        N += 1
        if term <= target or N > 4000:
            break
    mu = ctx.zeros((n, J))
    c = ctx.asarray([1] * n) if not ctx.is_double else np.ones(n, dtype=np.complex128)
    for k in range(N):
        if k:
            c = c * w * _rat(1, k, ctx)
        for i in range(J):
            mu[:, i] += c * _rat(1, P ** (k + i + 1) * (k + i + 1), ctx)
    # |tail| <= sum_{k >= N} (|w|h)^k/k! * h^{i+1} <= 2 (|w|h)^N/N! h
    tail = 2.0 * term / P
    return mu, tail


def _poly_exp_J(w, J, P, ctx):
    """J_j(w) = int_0^1 xi^j e^{w xi} d xi for j < J via P Taylor pieces."""
    n = len(w)
    mu, tail = _taylor_moments(w, J, P, ctx)
    out = ctx.zeros((n, J))
    for p in range(P):
        if p == 0:
            for j in range(J):
                out[:, j] += mu[:, j]
            continue
        ea = ctx.exp(w * _rat(p, P, ctx))
        for j in range(J):
            row = _binom_row(j)
            acc = mu[:, j]
            apow = _rat(1, 1, ctx)
            for i in range(j - 1, -1, -1):
                apow = apow * _rat(p, P, ctx)
                acc = acc + (row[i] * apow) * mu[:, i]
            out[:, j] += ea * acc
    bounds = np.array([tail * 2.0 ** (j + 1) for j in range(J)])
    return out, bounds


def _em(z, K, J, ctx, L=None):
    n = len(K)
    flip = ctx.imag_sign(z) < 0
    if np.any(flip):
        z = z.copy()
        z[flip] = ctx.conj(z[flip])
    X = (K - 1).astype(np.float64)
    Xb = _rat_vec(K - 1, np.ones(n, dtype=np.int64), ctx)
    zabs = ctx.absf(z)
    L = _choose_L(X, zabs, J, ctx, L)
    w = z * Xb
    wabs = ctx.absf(w)
    P = max(1, math.ceil(2 * float(wabs.max()))) if n else 1
    Jint, Jb = _poly_exp_J(w, J, P, ctx)
    ew = ctx.exp(w)
    invX = _rat_vec(np.ones(n, dtype=np.int64), K - 1, ctx)
    # powers z^e for e < 2L and X^{-l} for l < J
    zp = [None] * (2 * L)
    zp[0] = ctx.asarray([1] * n) if not ctx.is_double else np.ones(n, dtype=np.complex128)
    for e in range(1, 2 * L):
        zp[e] = zp[e - 1] * z
    xp = [None] * J
    xp[0] = _rat_vec(np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64), ctx)
    for l in range(1, J):
        xp[l] = xp[l - 1] * invX
    vals = ctx.zeros((n, J))
    bounds = np.zeros((n, J))
    half = _rat(1, 2, ctx)
    one = _rat(1, 1, ctx)
    for j in range(J):
        sc = _rat(1, 2 ** j, ctx)
        v = Xb * Jint[:, j]
        v = v + (ew + (one if j == 0 else 0 * one)) * half
        corr = ctx.zeros(n)
        for ell in range(1, L + 1):
            b = _bern(2 * ell, ctx)
            e = 2 * ell - 1
            acc = ctx.zeros(n)
            brow = _binom_row(e)
            for l in range(min(e, j) + 1):
                coef = brow[l] * _falling(j, l)
                acc = acc + coef * (xp[l] * zp[e - l])
            acc = acc * ew
            if j <= e:
                acc = acc - (brow[j] * math.factorial(j)) * (xp[j] * zp[e - j])
            corr = corr + b * acc
        vals[:, j] = (v + corr) * sc
        rem = _em_bound_scaled(X, zabs, j, L)
        mag = X * 0.5 ** j
        bounds[:, j] = rem + X * Jb[j] * 0.5 ** j + 16 * ctx.epsilon_mach * P * (mag + 1)
    if np.any(flip):
        vals[flip] = ctx.conj(vals[flip])
    return vals, bounds


# -- dispatch ------------------------------------------------------------------

def choose_regimes(zabs: np.ndarray, K: np.ndarray, j_max: int) -> np.ndarray:
    """Regime codes: direct if K <= 2 pi (j_max+1), closed if |z|(K-1) > 10(j_max+1)."""
    K = np.asarray(K)
    direct = K <= TWO_PI * (j_max + 1)
    closed = ~direct & (zabs * (K - 1) > 10 * (j_max + 1))
    out = np.full(len(K), EM, dtype=np.int8)
    out[direct] = DIRECT
    out[closed] = CLOSED
    return out


def geom_derivs_batch(z, K, j_max: int, ctx: PrecisionContext,
                      regime: str = "auto", L: int | None = None) -> GeomDerivs:
    """Scaled derivatives G_j = g_K^{(j)}(z) / (2 max(K-1,1))^j for j <= j_max.

    ``z`` is a backend array with Re z <= 0, ``K`` an integer array.  Im z is
    shifted into (-pi, pi] first.  ``regime`` forces one strategy for every
    entry with K >= 2 (used to cross-check strategies).
    """
    K = np.asarray(K, dtype=np.int64)
    n = len(K)
    J = j_max + 1
    with ctx.working():
        z = _reduce_imag(ctx.asarray(z) if not isinstance(z, np.ndarray) else z, ctx)
        vals = ctx.zeros((n, J))
        bounds = np.zeros((n, J))
        if regime == "auto":
            codes = choose_regimes(ctx.absf(z), K, j_max)
        else:
            if regime not in REGIME_NAMES:
                raise ParameterError(f"unknown regime {regime!r}")
            codes = np.full(n, REGIME_NAMES[regime], dtype=np.int8)
        codes[K < 2] = DIRECT
        if regime == "closed" and np.any((codes == CLOSED) & (ctx.absf(z) == 0)):
            raise DomainError("closed form needs z != 0")
        for code, fn in ((DIRECT, _direct), (CLOSED, _closed), (EM, _em)):
            idx = np.nonzero(codes == code)[0]
            if len(idx) == 0:
                continue
            kw = {"L": L} if code == EM else {}
            v, b = fn(z[idx], K[idx], J, ctx, **kw)
            vals[idx] = v
            bounds[idx] = b
        zero = K == 0
        if np.any(zero):
            vals[zero] = ctx.zeros((int(zero.sum()), J))
            bounds[zero] = 0.0
    return GeomDerivs(values=vals, bounds=bounds, regimes=codes,
                      scale=2.0 * np.maximum(K - 1, 1))


# -- scalar API ----------------------------------------------------------------

@dataclass(frozen=True)
class GeomDerivRequest:
    """A single (z, K, j_max) request with Im z already shifted into (-pi, pi]."""

    z: complex
    K: int
    j_max: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise DomainError("K must be positive")
        if self.j_max < 0:
            raise DomainError("j_max must be nonnegative")
        zc = complex(self.z) if not isinstance(self.z, acb) else complex(
            float(self.z.real.mid()), float(self.z.imag.mid()))
        if not -0.5 - 1e-12 <= zc.real <= 1e-300:
            raise DomainError("need -1/2 <= Re z <= 0")
        k = round(zc.imag / TWO_PI)
        if k:
            if isinstance(self.z, acb):
                shifted = self.z - acb(0, 2 * arb.pi() * k)
            else:
                shifted = self.z - 1j * TWO_PI * k
            object.__setattr__(self, "z", shifted)


def _unscale(G: GeomDerivs, ctx: PrecisionContext) -> tuple[list, list]:
    S = int(G.scale[0])
    vals, bounds = [], []
    for j in range(G.values.shape[1]):
        f = S ** j
        vals.append(G.values[0, j] * f)
        bounds.append(float(G.bounds[0, j]) * float(f))
    return vals, bounds


def geom_sum_derivs(req: GeomDerivRequest, ctx: PrecisionContext,
                    regime: str = "auto", with_bounds: bool = False):
    """g_K^{(j)}(z) for j = 0..j_max (unscaled)."""
    with ctx.working():
        G = geom_derivs_batch(ctx.asarray([req.z]), np.array([req.K]), req.j_max, ctx, regime)
        vals, bounds = _unscale(G, ctx)
    if with_bounds:
        return vals, bounds
    return vals


def geom_sum(z, K: int, ctx: PrecisionContext):
    """g_K(z) = (e^{Kz} - 1)/(e^z - 1), or the direct sum when e^z is near 1."""
    if K < 1:
        raise DomainError("K must be positive")
    with ctx.working():
        zz = ctx.asarray([z])
        den = ctx.expm1(zz)
        if float(ctx.absf(den)[0]) > 2.0 ** (-ctx.mantissa_bits / 2):
            num = ctx.expm1(zz * _rat(K, 1, ctx))
            return (num / den)[0]
        if K <= 1 << 16:
            acc = ctx.zeros(1)[0]
            for k in range(K):
                acc = acc + ctx.exp(zz * _rat(k, 1, ctx))[0]
            return acc
        G = geom_derivs_batch(zz, np.array([K]), 0, ctx)
        return G.values[0, 0]


def em_geom_deriv(z, K: int, j: int, L: int, ctx: PrecisionContext):
    """Euler-Maclaurin value of g_K^{(j)}(z) with L correction terms.

    Returns ``(value, bound)``.  The bound is the larger of
    4(K-1)^{j+1}(2 pi)^{-2L} and a form that stays valid for larger |z|,
    plus the Taylor-integral tail.
    """
    if L < 1:
        raise ParameterError("L must be >= 1")
    if K < 2:
        raise DomainError("K must be >= 2")
    with ctx.working():
        zz = ctx.asarray([z])
        zc = complex(ctx.to_complex(zz)[0])
        if zc.real > 0:
            raise DomainError("need Re z <= 0")
        v, b = _em(_reduce_imag(zz, ctx), np.array([K], dtype=np.int64), j + 1, ctx, L=L)
        f = (2 * (K - 1)) ** j
        return v[0, j] * f, float(b[0, j]) * float(f)


def poly_exp_integral(z, j: int, K: int, n_pieces: int, ctx: PrecisionContext,
                      with_bound: bool = False):
    """int_0^{K-1} x^j e^{zx} dx by piecewise Taylor expansion."""
    if n_pieces < 1:
        raise ParameterError("n_pieces must be positive")
    X = K - 1
    with ctx.working():
        zz = ctx.asarray([z])
        w = zz * _rat(X, 1, ctx)
        Jv, Jb = _poly_exp_J(w, j + 1, int(n_pieces), ctx)
        f = _rat(X ** (j + 1), 1, ctx)
        val = Jv[0, j] * f
    if with_bound:
        return val, float(Jb[j]) * float(X) ** (j + 1)
    return val

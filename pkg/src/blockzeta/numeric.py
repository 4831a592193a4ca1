"""Precision contexts, argument reduction mod 2*pi and inverse powers.

Two backends share one array interface:

* ``mantissa_bits == 53`` runs the bulk arithmetic on numpy ``complex128``
  arrays.  Phases such as ``t*log(n)`` are still reduced in Arb at
  ``phase_bits`` before being rounded to double, since that is where double
  precision breaks down for large t.
* ``mantissa_bits > 53`` runs the same code on numpy object arrays holding
  python-flint ``acb``/``arb`` numbers at the requested precision.
"""

from __future__ import annotations

import math
import threading
import os
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np
import flint
from flint import acb, arb, fmpq, fmpz

from .errors import DomainError, ParameterError

__all__ = [
    "PrecisionContext",
    "ComplexPoint",
    "to_fraction",
    "reduce_mod_2pi",
    "complex_inv_power",
    "inv_powers",
    "roundoff_estimate",
    "required_mantissa_bits",
    "default_context",
]


def to_fraction(x) -> Fraction:
    """Convert an int, float, decimal or p/q string, or Fraction to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise DomainError(f"non-finite value {x!r}")
        return Fraction(float(x))
    if isinstance(x, Decimal):
        if not x.is_finite():
            raise DomainError(f"non-finite value {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        text = x.strip()
        if "/" in text:
            try:
                return Fraction(text)
            except ValueError as exc:
                raise ParameterError(f"cannot parse number {x!r}") from exc
        try:
            d = Decimal(text)
        except InvalidOperation as exc:
            raise ParameterError(f"cannot parse number {x!r}") from exc
        if not d.is_finite():
            raise DomainError(f"non-finite value {x!r}")
        return Fraction(d)
    raise TypeError(f"unsupported numeric type {type(x).__name__}")


def _arb_q(q: Fraction) -> arb:
    """Exact rational to arb at the current flint precision."""
    return arb(fmpq(q.numerator, q.denominator))


def _bit_length_of(q: Fraction) -> int:
    """Rough log2 of |q|, at least 0."""
    if q == 0:
        return 0
    return max(0, abs(q.numerator).bit_length() - q.denominator.bit_length() + 1)


# flint's working precision is process-global, so sections that set it are
# serialized; worker threads cannot change each other's precision mid-call
_PREC_LOCK = threading.RLock()


@contextmanager
def _prec(bits: int) -> Iterator[None]:
    with _PREC_LOCK, flint.ctx.workprec(int(bits)):
        yield


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision for one evaluation.

    Parameters
    ----------
    mantissa_bits:
        Precision of the bulk arithmetic; 53 selects the numpy double backend.
    phase_bits:
        Precision used to reduce phases ``t*log n`` and ``t/v`` mod 2*pi.
        Defaults to ``2*mantissa_bits``.
    """

    mantissa_bits: int = 53
    phase_bits: int | None = None

    def __post_init__(self) -> None:
        if int(self.mantissa_bits) != self.mantissa_bits or self.mantissa_bits < 53:
            raise ParameterError("mantissa_bits must be an integer >= 53")
        object.__setattr__(self, "mantissa_bits", int(self.mantissa_bits))
        if self.phase_bits is None:
            object.__setattr__(self, "phase_bits", 2 * self.mantissa_bits)
        elif self.phase_bits < self.mantissa_bits:
            raise ParameterError("phase_bits must be >= mantissa_bits")

    @property
    def epsilon_mach(self) -> float:
        return math.ldexp(1.0, 1 - self.mantissa_bits)

    @property
    def is_double(self) -> bool:
        return self.mantissa_bits == 53

    def working(self):
        """Context manager setting the flint precision for the arb backend."""
        return _prec(self.mantissa_bits if not self.is_double else 53)

    # -- scalar and array constructors -------------------------------------

    @property
    def pi(self):
        return math.pi if self.is_double else arb.pi()

    def real(self, x):
        """Backend real scalar from an int, Fraction or float."""
        if self.is_double:
            return float(x)
        if isinstance(x, Fraction):
            return _arb_q(x)
        if isinstance(x, arb):
            return x
        if isinstance(x, (int, np.integer)):
            return arb(int(x))
        return arb(float(x))

    def complex(self, re, im=0):
        """Backend complex scalar from two real inputs."""
        if self.is_double:
            return complex(float(re), float(im))
        return acb(self.real(re), self.real(im))

    def rvec(self, values: Iterable) -> np.ndarray:
        """Backend real vector from ints/Fractions/floats."""
        vals = list(values)
        if self.is_double:
            return np.array([float(v) for v in vals], dtype=np.float64)
        out = np.empty(len(vals), dtype=object)
        for i, v in enumerate(vals):
            out[i] = self.real(v)
        return out

    def zeros(self, shape) -> np.ndarray:
        if self.is_double:
            return np.zeros(shape, dtype=np.complex128)
        out = np.empty(shape, dtype=object)
        out.fill(acb(0))
        return out

    def asarray(self, values) -> np.ndarray:
        """Backend complex array from a sequence of complex or acb values."""
        if self.is_double:
            return np.asarray([complex(v) if not isinstance(v, acb) else _acb_to_complex(v)
                               for v in np.ravel(values)], dtype=np.complex128).reshape(np.shape(values))
        flat = [v if isinstance(v, acb) else acb(v.item() if isinstance(v, np.generic) else v)
                for v in np.ravel(np.asarray(values, dtype=object))]
        out = np.empty(len(flat), dtype=object)
        out[:] = flat
        return out.reshape(np.shape(values))

    # -- elementwise functions ----------------------------------------------

    def exp(self, a):
        if self.is_double:
            return np.exp(a)
        return _obj_exp(a)

    def expm1(self, a):
        if self.is_double:
            return _complex_expm1(np.asarray(a, dtype=np.complex128))
        return _obj_expm1(a)

    def absf(self, a) -> np.ndarray:
        """Magnitudes as float64 (upper-rounded midpoints in the arb backend)."""
        if self.is_double:
            return np.abs(a)
        return np.asarray(_obj_absf(a), dtype=np.float64)

    def to_complex(self, a) -> np.ndarray:
        if self.is_double:
            return np.asarray(a, dtype=np.complex128)
        return np.asarray(_obj_tocomplex(a), dtype=np.complex128)

    def conj(self, a):
        if self.is_double:
            return np.conj(a)
        return _obj_conj(a)

    def imag_sign(self, a) -> np.ndarray:
        """Sign of the imaginary part as a float64 array."""
        return np.sign(self.to_complex(a).imag)

    def total(self, a):
        """Sum of a 1-d backend array in a fixed order."""
        if self.is_double:
            return complex(np.sum(a))
        acc = acb(0)
        for x in a:
            acc += x
        return acc


def _acb_to_complex(x: acb) -> complex:
    return complex(float(x.real.mid()), float(x.imag.mid()))


def _arb_upper(x: arb) -> float:
    return float(x.mid()) + float(x.rad())


def _complex_expm1(z: np.ndarray) -> np.ndarray:
    """expm1 for complex128 arrays without cancellation near zero."""
    x, y = z.real, z.imag
    em = np.expm1(x)
    s = np.sin(0.5 * y)
    re = em * np.cos(y) - 2.0 * s * s
    im = np.exp(x) * np.sin(y)
    return re + 1j * im


_obj_exp = np.frompyfunc(lambda x: x.exp(), 1, 1)
_obj_expm1 = np.frompyfunc(lambda x: x.expm1(), 1, 1)
_obj_absf = np.frompyfunc(lambda x: _arb_upper(abs(x)), 1, 1)
_obj_tocomplex = np.frompyfunc(_acb_to_complex, 1, 1)
_obj_conj = np.frompyfunc(lambda x: x.conjugate(), 1, 1)


def default_context() -> PrecisionContext:
    """Context from the optional ``PRECISION_BITS`` environment variable."""
    bits = os.environ.get("PRECISION_BITS")
    if bits:
        try:
            return PrecisionContext(int(bits))
        except ValueError as exc:
            raise ParameterError(f"bad PRECISION_BITS={bits!r}") from exc
    return PrecisionContext()


@dataclass(frozen=True)
class ComplexPoint:
    """Evaluation point s = sigma + i t with sigma > 0, stored exactly."""

    sigma: Fraction
    t: Fraction

    def __init__(self, sigma, t=0) -> None:
        sig = to_fraction(sigma)
        tt = to_fraction(t)
        if sig <= 0:
            raise DomainError("sigma must be positive")
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "t", tt)

    @property
    def abs(self) -> float:
        return math.hypot(float(self.sigma), float(self.t))

    @property
    def conductor_q(self) -> float:
        return self.abs + 3.0

    @property
    def as_complex(self) -> complex:
        return complex(float(self.sigma), float(self.t))

    def acb(self) -> acb:
        """s as an acb at the current flint precision."""
        return acb(_arb_q(self.sigma), _arb_q(self.t))

    def scalar(self, ctx: PrecisionContext):
        return self.as_complex if ctx.is_double else self.acb()

    def reflect(self) -> "ComplexPoint":
        """The point sigma - i t."""
        return ComplexPoint(self.sigma, -self.t)

    def __str__(self) -> str:
        return f"{float(self.sigma):g}{'+' if self.t >= 0 else '-'}{abs(float(self.t)):g}i"


# -- argument reduction ------------------------------------------------------


def _reduce_arb(x: arb) -> arb:
    """Reduce an arb into (-pi, pi] at the current precision."""
    two_pi = 2 * arb.pi()
    q = (x / two_pi + arb(0.5)).mid().floor()
    k = q.unique_fmpz()
    r = x - two_pi * k
    if r.mid() <= -arb.pi().mid():
        r += two_pi
    return r


def _to_arb_any(x) -> arb:
    if isinstance(x, arb):
        return x
    if isinstance(x, fmpz):
        return arb(x)
    return _arb_q(to_fraction(x))


def reduce_mod_2pi(x, ctx: PrecisionContext):
    """Reduce x into (-pi, pi].

    ``x`` may be an int, float, Fraction, decimal string or arb.  The
    reduction runs at ``phase_bits`` plus the bit length of x, so the result
    is accurate to the context precision even for |x| ~ 10**15.  Returns a
    float for the double context and an arb otherwise.
    """
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        raise DomainError("reduce_mod_2pi needs a finite input")
    if isinstance(x, arb):
        if not x.is_finite():
            raise DomainError("reduce_mod_2pi needs a finite input")
        man, exp = x.mid().man_exp()
        extra = max(0, int(man).bit_length() + int(exp))
        with _prec(ctx.phase_bits + extra + 16):
            r = _reduce_arb(x)
    else:
        q = to_fraction(x)
        with _prec(ctx.phase_bits + _bit_length_of(q) + 16):
            r = _reduce_arb(_arb_q(q))
    if ctx.is_double:
        return float(r.mid())
    return r


def reduce_ratios(num: Fraction, den: np.ndarray, ctx: PrecisionContext,
                  offsets_turns: Iterable[Fraction] | None = None) -> np.ndarray:
    """Reduce ``num/den[i] + 2*pi*offsets_turns[i]`` into (-pi, pi] elementwise.

    ``num`` is exact, ``den`` an integer array and the optional offsets are
    exact rational multiples of 2*pi.  Returns float64 or an object array of
    arb.
    """
    n = len(den)
    out = np.empty(n, dtype=np.float64 if ctx.is_double else object)
    if n == 0:
        return out
    mag = _bit_length_of(num)
    offs = list(offsets_turns) if offsets_turns is not None else None
    with _prec(ctx.phase_bits + mag + 16):
        a = _arb_q(num)
        two_pi = 2 * arb.pi()
        for i in range(n):
            x = a / int(den[i])
            if offs is not None and offs[i]:
                x += two_pi * _arb_q(offs[i])
            r = _reduce_arb(x)
            out[i] = float(r.mid()) if ctx.is_double else r
    return out


# -- inverse powers ----------------------------------------------------------


def complex_inv_power(n: int, s: ComplexPoint, ctx: PrecisionContext):
    """n**(-s) with the phase t*log n reduced at phase precision."""
    if int(n) < 1:
        raise DomainError("n must be a positive integer")
    return inv_powers(np.array([int(n)], dtype=object), s, ctx)[0]


def inv_powers(ns, s: ComplexPoint, ctx: PrecisionContext) -> np.ndarray:
    """Vector of n**(-s) for positive integers n.

    Each value is computed as exp(-sigma*log n) * exp(-i*reduce(t*log n)) in
    Arb at a precision covering the bit length of t*log n, then rounded to
    the context.
    """
    ns = np.asarray(ns)
    size = ns.size
    out = np.empty(size, dtype=np.complex128 if ctx.is_double else object)
    if size == 0:
        return out
    flat = ns.ravel()
    nmax = int(max(int(v) for v in (flat.max(), flat.min())))
    if int(flat.min()) < 1:
        raise DomainError("n must be a positive integer")
    tlog = abs(float(s.t)) * math.log(max(nmax, 2)) + 2.0
    wp = ctx.phase_bits + int(math.log2(tlog)) + 16
    with _prec(wp):
        tt = _arb_q(s.t)
        two_pi = 2 * arb.pi()
        inv_two_pi = 1 / two_pi
        half = arb(fmpq(1, 2))
        if ctx.is_double:
            # |n^-s| via libm pow (sigma is exact in double in all practical
            # inputs); only the phase needs the extended precision.
            mags = np.power(flat.astype(np.float64), -float(s.sigma))
            phs = np.empty(size, dtype=np.float64)
            for i in range(size):
                n = int(flat[i])
                if n == 1:
                    phs[i] = 0.0
                    continue
                x = tt * arb(n).log()
                k = (x * inv_two_pi + half).mid().floor().unique_fmpz()
                phs[i] = float((x - two_pi * k).mid())
            out[:] = mags * np.exp(-1j * phs)
        else:
            sig = _arb_q(s.sigma)
            for i in range(size):
                n = int(flat[i])
                if n == 1:
                    out[i] = acb(1)
                    continue
                ln = arb(n).log()
                mag = (-sig * ln).exp()
                x = tt * ln
                k = (x * inv_two_pi + half).mid().floor().unique_fmpz()
                ph = x - two_pi * k
                out[i] = acb(mag * ph.cos(), -mag * ph.sin())
    if not ctx.is_double:
        with ctx.working():
            for i in range(size):
                out[i] = +out[i]
    return out.reshape(ns.shape)


def direct_sum(s: ComplexPoint, start: int, stop: int, ctx: PrecisionContext,
               weights=None, chunk: int = 1 << 16):
    """Sum of w(n)*n**(-s) over start <= n < stop, in fixed-size chunks."""
    with ctx.working():
        total = 0j if ctx.is_double else acb(0)
        for lo in range(start, stop, chunk):
            hi = min(stop, lo + chunk)
            ns = np.arange(lo, hi, dtype=np.int64)
            vals = inv_powers(ns, s, ctx)
            if weights is not None:
                vals = vals * weights(ns, ctx)
            total = total + ctx.total(vals)
    return total


# -- round-off model ---------------------------------------------------------

_EXACT_LIMIT = 10**6


@lru_cache(maxsize=None)
def _log_square_sum(M: int) -> float:
    """Sum of (log n)**2/n over 2 <= n < M, in double."""
    if M <= 2:
        return 0.0
    n = np.arange(2, M, dtype=np.float64)
    ln = np.log(n)
    return float(np.sum(ln * ln / n))


def _log_square_sum_model(M: int) -> float:
    if M <= _EXACT_LIMIT:
        return _log_square_sum(M)
    base = _log_square_sum(_EXACT_LIMIT)
    return base + (math.log(M) ** 3 - math.log(_EXACT_LIMIT) ** 3) / 3.0


def roundoff_estimate(t, M: int, ctx: PrecisionContext) -> float:
    """Typical accumulated round-off eps*|t|*sqrt(sum (log n)^2/n), n < M.

    For M above 10**6 the sum beyond 10**6 is replaced by the integral of
    (log x)^2/x, which keeps the model continuous and monotone in M.  This
    is an estimate, not a bound.
    """
    if M < 2:
        raise ParameterError("M must be >= 2")
    tf = abs(float(to_fraction(t)))
    if tf == 0.0:
        return 0.0
    return ctx.epsilon_mach * tf * math.sqrt(_log_square_sum_model(int(M)))


def required_mantissa_bits(t, M: int, target_eps: float) -> int:
    """Smallest mantissa size (>= 53) whose round-off estimate is <= target/10."""
    if not 0.0 < target_eps < 1.0:
        raise ParameterError("target_eps must lie in (0, 1)")
    if M < 2:
        raise ParameterError("M must be >= 2")
    tf = abs(float(to_fraction(t)))
    if tf == 0.0:
        return 53
    scale = tf * math.sqrt(_log_square_sum_model(int(M)))
    # eps = 2^(1-b) so the condition is 1 - b <= log2(target / (10 scale))
    bits = max(53, math.ceil(1.0 - math.log2(target_eps / (10.0 * scale))))
    while bits > 53 and roundoff_estimate(t, M, PrecisionContext(bits - 1)) <= target_eps / 10:
        bits -= 1
    while roundoff_estimate(t, M, PrecisionContext(bits)) > target_eps / 10:
        bits += 1
    return bits

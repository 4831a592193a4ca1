"""Taylor coefficients c_j(s) of f_s(z) = exp(-s (log(1+z) - z)) and eps_m.

The j-th derivative of f_s at 0 is w_{j,0}(s) = sum_eta beta[j,0,eta] s^eta,
where the integer table beta comes from differentiating
f_s^{(j)}(z) = sum_l w_{j,l}(s) q(z)^l f_s(z) with q(z) = z/(1+z), which gives

    beta[j+1,l,eta] = (l+1) beta[j,l+1,eta] - sum_{a=1..l} (-1)^a beta[j,l-a,eta-1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from flint import fmpq

from .errors import ConsistencyError, TableError
from .numeric import ComplexPoint, PrecisionContext

__all__ = [
    "CoefficientTable",
    "build_beta_table",
    "c_coeffs",
    "epsilon_m",
    "log_epsilon_m",
    "bernoulli",
    "bernoulli_over_factorial",
]


@dataclass(frozen=True)
class CoefficientTable:
    """Exact integers beta[j][l][eta] for j, l <= m_max."""

    m_max: int
    beta: tuple
    factorials: tuple

    def entry(self, j: int, l: int, eta: int) -> int:
        row = self.beta[j][l]
        return row[eta] if 0 <= eta < len(row) else 0

    def w_poly(self, j: int, l: int = 0) -> list[int]:
        """Coefficients of w_{j,l}(s) in increasing powers of s."""
        return list(self.beta[j][l])

    def entries(self):
        """Iterate (j, l, eta, beta) over all stored entries."""
        for j, rows in enumerate(self.beta):
            for l, row in enumerate(rows):
                for eta, val in enumerate(row):
                    yield j, l, eta, val


def _beta_recursion(m_max: int) -> list:
    # l runs to 2*m_max internally because beta[j+1,l] reads beta[j,l+1].
    lmax = 2 * m_max + 1
    width = lambda j, l: j + 1
    prev = [[0] * width(0, l) for l in range(lmax + 1)]
    prev[0][0] = 1
    table = [prev]
    for j in range(m_max):
        nxt = []
        for l in range(lmax + 1 - (j + 1)):
            row = [0] * width(j + 1, l)
            up = prev[l + 1] if l + 1 < len(prev) else []
            for eta in range(len(row)):
                acc = (l + 1) * (up[eta] if eta < len(up) else 0)
                if eta >= 1:
                    for a in range(1, l + 1):
                        src = prev[l - a]
                        if eta - 1 < len(src):
                            acc -= (-1) ** a * src[eta - 1]
                row[eta] = acc
            nxt.append(row)
        table.append(nxt)
        prev = nxt
    return table


@lru_cache(maxsize=None)
def build_beta_table(m_max: int) -> CoefficientTable:
    """Exact beta table for 0 <= j, l <= m_max (cached per process)."""
    if m_max < 0:
        raise TableError("m_max must be nonnegative")
    full = _beta_recursion(m_max)
    rows = []
    for j in range(m_max + 1):
        per_l = []
        for l in range(m_max + 1):
            keep = min(j, (j + l) // 2) + 1
            if any(full[j][l][keep:]):
                raise ConsistencyError(f"beta[{j},{l}] has degree above {keep - 1}")
            per_l.append(tuple(full[j][l][:keep]))
        rows.append(tuple(per_l))
    beta = tuple(rows)
    facts = tuple(math.factorial(j) for j in range(m_max + 1))
    return CoefficientTable(m_max=m_max, beta=beta, factorials=facts)


def c_coeffs(s: ComplexPoint, m: int, table: CoefficientTable | None,
             ctx: PrecisionContext) -> list:
    """c_j(s) = w_{j,0}(s)/j! for j = 0..m as backend scalars."""
    if table is None:
        table = build_beta_table(max(m, 0))
    if m > table.m_max:
        raise TableError(f"m={m} exceeds table m_max={table.m_max}")
    out = []
    with ctx.working():
        sv = s.scalar(ctx)
        for j in range(m + 1):
            acc = 0 if ctx.is_double else sv * 0
            power = 1 if ctx.is_double else sv * 0 + 1
            for coef in table.beta[j][0]:
                if coef:
                    acc = acc + coef * power
                power = power * sv
            if ctx.is_double:
                out.append(complex(acc) / table.factorials[j])
            else:
                out.append(acc / table.factorials[j])
    return out


def log_epsilon_m(s: ComplexPoint, u: int, m: int) -> float:
    """Natural log of the Taylor truncation factor eps_m(s, u)."""
    if u < 1:
        raise TableError("u must be positive")
    a = s.abs
    if m <= a / 4:
        k = m + 1
        return (math.log(3.5) + 0.78 * k + 0.5 * k * math.log(a)
                - 0.5 * k * math.log(k) - k * math.log(u))
    return m * math.log(2.0) + 0.194 * a - m * math.log(u)


def epsilon_m(s: ComplexPoint, u: int, m: int) -> float:
    """eps_m(s, u); returns inf rather than overflowing."""
    lg = log_epsilon_m(s, u, m)
    return math.exp(lg) if lg < 709.0 else math.inf


# -- Bernoulli numbers -------------------------------------------------------

@lru_cache(maxsize=None)
def bernoulli(n: int) -> Fraction:
    """Exact Bernoulli number B_n (B_1 = -1/2)."""
    q = fmpq.bernoulli(n)
    return Fraction(int(q.p), int(q.q))


@lru_cache(maxsize=None)
def bernoulli_over_factorial(n: int) -> Fraction:
    """Exact B_n/n!."""
    return bernoulli(n) / math.factorial(n)


def bernoulli_float_table(n_max: int) -> np.ndarray:
    """B_{2l}/(2l)! for l = 0..n_max as float64 (underflows past 2l ~ 390)."""
    return np.array([float(bernoulli_over_factorial(2 * l)) for l in range(n_max + 1)])

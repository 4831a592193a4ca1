"""Block schedules v_r, K_r and validation of the evaluation parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .numeric import ComplexPoint

__all__ = [
    "EvalParams",
    "BlockSchedule",
    "ValidationReport",
    "build_schedule",
    "validate_params",
    "default_params",
]

_INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class EvalParams:
    """Block-formula parameters: block scale u0, start v0, cutoff M, order m."""

    u0: int
    v0: int
    M: int
    m: int

    def __post_init__(self) -> None:
        for name in ("u0", "v0", "M", "m"):
            val = getattr(self, name)
            if int(val) != val:
                raise ParameterError(f"{name} must be an integer")
            object.__setattr__(self, name, int(val))
        if self.u0 < 1 or self.v0 < 1 or self.M < 1:
            raise ParameterError("u0, v0 and M must be positive")
        if self.m < 0:
            raise ParameterError("m must be nonnegative")

    def as_dict(self) -> dict:
        return {"u0": self.u0, "v0": self.v0, "M": self.M, "m": self.m}


@dataclass(frozen=True)
class BlockSchedule:
    """Block starts ``v`` (v_0..v_{R+1}) and lengths ``K`` (K_0..K_R)."""

    u0: int
    v: np.ndarray
    K: np.ndarray

    @property
    def R(self) -> int:
        return len(self.K) - 1

    @property
    def block_count(self) -> int:
        return len(self.K)

    @property
    def v0(self) -> int:
        return int(self.v[0])

    @property
    def M(self) -> int:
        return int(self.v[-1])

    @property
    def starts(self) -> np.ndarray:
        return self.v[:-1]

    def chunks(self, size: int):
        """Yield (starts, lengths) slices of at most ``size`` blocks."""
        for lo in range(0, self.block_count, size):
            yield self.v[lo:min(lo + size, self.block_count)], self.K[lo:lo + size]


def build_schedule(u0: int, v0: int, M: int) -> BlockSchedule:
    """Build K_r = ceil(v_r/u0), v_{r+1} = v_r + K_r, with the last block cut at M.

    Runs of equal K are emitted with ``arange`` so schedules with millions of
    blocks build quickly; all arithmetic is exact integer arithmetic.
    """
    u0, v0, M = int(u0), int(v0), int(M)
    if not 1 <= u0 <= v0 <= M:
        raise ParameterError(f"need 1 <= u0 <= v0 <= M, got u0={u0}, v0={v0}, M={M}")
    dtype = np.int64 if M < _INT64_SAFE else object
    starts: list[np.ndarray] = []
    lens: list[np.ndarray] = []
    v = v0
    while v < M:
        k = -(-v // u0)
        # blocks v, v+k, ... keep length k while their start is <= k*u0
        n_run = (k * u0 - v) // k + 1
        # block i of the run is the last one when v + i*k + k >= M
        i_last = max(0, -(-(M - v - k) // k))
        if i_last < n_run:
            if i_last:
                starts.append(_arange(v, v + i_last * k, k, dtype))
                lens.append(np.full(i_last, k, dtype=dtype))
            last = v + i_last * k
            starts.append(np.array([last], dtype=dtype))
            lens.append(np.array([M - last], dtype=dtype))
            break
        starts.append(_arange(v, v + n_run * k, k, dtype))
        lens.append(np.full(n_run, k, dtype=dtype))
        v += n_run * k
    if starts:
        vs = np.concatenate(starts + [np.array([M], dtype=dtype)])
        ks = np.concatenate(lens)
    else:
        vs = np.array([M], dtype=dtype)
        ks = np.zeros(0, dtype=dtype)
    return BlockSchedule(u0=u0, v=vs, K=ks)


def _arange(lo: int, hi: int, step: int, dtype) -> np.ndarray:
    if dtype is object:
        return np.array(list(range(lo, hi, step)), dtype=object)
    return np.arange(lo, hi, step, dtype=np.int64)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking the block-formula hypotheses."""

    ok: bool
    violation: str | None = None
    checks: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def validate_params(s: ComplexPoint, p: EvalParams) -> ValidationReport:
    """Check v0 >= u0 >= 2 max{6, sqrt(q(s)), sigma} and M >= v0.

    The first violated inequality is named in ``violation``.
    """
    sigma = float(s.sigma)
    q = s.conductor_q
    checks = {
        "u0 < 2√𝔮(s)": p.u0 >= 2.0 * math.sqrt(q),
        "u0 < 12": p.u0 >= 12,
        "u0 < 2σ": p.u0 >= 2 * s.sigma,
        "v0 < u0": p.v0 >= p.u0,
        "M < v0": p.M >= p.v0,
    }
    failed = [name for name, good in checks.items() if not good]
    return ValidationReport(ok=not failed, violation=failed[0] if failed else None,
                            checks=checks)


def default_params(s: ComplexPoint, m: int, mode: str = "em-tail",
                   eps_target: float = 1e-10) -> EvalParams:
    """Default parameters: u0 = 6 ceil(sqrt q), v0 = 10(m+1)u0.

    ``em-tail`` takes M = 10 ceil(q); ``theorem1-tail`` takes the smallest M
    with q/(sigma M^sigma) <= eps_target.
    """
    if m < 0:
        raise ParameterError("m must be nonnegative")
    q = s.conductor_q
    u0 = 6 * math.ceil(math.sqrt(q))
    v0 = 10 * (m + 1) * u0
    if mode == "em-tail":
        M = 10 * math.ceil(q)
    elif mode == "theorem1-tail":
        if not 0 < eps_target < 1:
            raise ParameterError("eps_target must lie in (0, 1)")
        sigma = float(s.sigma)
        M = math.ceil(math.exp((math.log(q / eps_target) - math.log(sigma)) / sigma))
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    return EvalParams(u0=u0, v0=v0, M=max(M, v0), m=m)

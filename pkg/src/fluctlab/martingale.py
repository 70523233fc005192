"""Exact dyadic step functions, conditional expectations onto dyadic algebras,
Rademacher partial sums and tail-sum sign statistics.

A level-``n`` step function is constant on each atom ``[j/2**n, (j+1)/2**n)``.
Values are stored as integer numerators over one shared positive denominator,
so every operation here is exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DomainError

MAX_ATOM_LEVEL = 25  # 2**25 atoms, 32 MiB of int8 values
MAX_ENUM_N = 20
MAX_DP_N = 1000
_INT64_SAFE = 1 << 62

_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int8)


def popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint64)
    out = np.zeros(a.shape, dtype=np.int8)
    for shift in range(0, 64, 8):
        out += _POP8[((a >> np.uint64(shift)) & np.uint64(0xFF)).astype(np.intp)]
    return out


def _maxabs(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    return max(abs(int(a.max())), abs(int(a.min())))


@dataclass(frozen=True, eq=False)
class DyadicStepFn:
    """Values ``num[j] / den`` on the ``2**level`` atoms at ``level``."""

    level: int
    num: np.ndarray
    den: int = 1

    def __post_init__(self):
        if self.level < 0:
            raise DomainError("level must be >= 0")
        num = np.asarray(self.num)
        if num.dtype.kind not in "iO":
            raise DomainError("numerators must be integers")
        if num.shape != (1 << self.level,):
            raise DomainError(f"level {self.level} needs {1 << self.level} values, got {num.shape}")
        if int(self.den) < 1:
            raise DomainError("denominator must be positive")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", int(self.den))

    @classmethod
    def from_values(cls, values: Sequence, level: int | None = None) -> "DyadicStepFn":
        qs = [Fraction(v) for v in values]
        if level is None:
            level = max(len(qs).bit_length() - 1, 0)
        den = math.lcm(*(q.denominator for q in qs)) if qs else 1
        ints = [int(q * den) for q in qs]
        big = any(abs(v) >= _INT64_SAFE for v in ints)
        return cls(level, np.array(ints, dtype=object if big else np.int64), den)

    def values(self) -> list[Fraction]:
        return [Fraction(int(v), self.den) for v in self.num]

    def integral(self) -> Fraction:
        return Fraction(int(self.num.sum()), self.den << self.level)

    def max_abs(self) -> Fraction:
        return Fraction(_maxabs(self.num), self.den)

    def __call__(self, x) -> Fraction:
        q = Fraction(x)
        if not 0 <= q < 1:
            raise DomainError(f"{x} outside [0, 1)")
        return Fraction(int(self.num[int(q * (1 << self.level))]), self.den)

    def condexp(self, n: int) -> "DyadicStepFn":
        """Average over the level-``n`` atoms (conditional expectation onto ``D_n``).

        A function already measurable at level ``n`` comes back unchanged.
        """
        if n < 0:
            raise DomainError("level must be >= 0")
        if n >= self.level:
            return self
        k = self.level - n
        num = self.num
        if num.dtype != object and _maxabs(num) << k >= _INT64_SAFE:
            num = num.astype(object)
        return DyadicStepFn(n, num.reshape(1 << n, 1 << k).sum(axis=1), self.den << k)

    def refine(self, m: int) -> "DyadicStepFn":
        """The same function represented at the finer level ``m``."""
        if m < self.level:
            raise DomainError("refine needs a level at least the current one")
        return DyadicStepFn(m, np.repeat(self.num, 1 << (m - self.level)), self.den)

    def _aligned(self, other: "DyadicStepFn"):
        lvl = max(self.level, other.level)
        a, b = self.refine(lvl), other.refine(lvl)
        bound = max(_maxabs(a.num) * b.den, _maxabs(b.num) * a.den)
        dtype = np.int64 if bound < _INT64_SAFE else object
        return lvl, a.num.astype(dtype) * b.den, b.num.astype(dtype) * a.den, a.den * b.den

    def __add__(self, other: "DyadicStepFn") -> "DyadicStepFn":
        lvl, x, y, den = self._aligned(other)
        return DyadicStepFn(lvl, x + y, den)

    def __sub__(self, other: "DyadicStepFn") -> "DyadicStepFn":
        lvl, x, y, den = self._aligned(other)
        return DyadicStepFn(lvl, x - y, den)

    def scaled(self, c) -> "DyadicStepFn":
        c = Fraction(c)
        num = self.num
        if num.dtype != object and _maxabs(num) * abs(c.numerator) >= _INT64_SAFE:
            num = num.astype(object)
        return DyadicStepFn(self.level, num * c.numerator, self.den * c.denominator)

    def __eq__(self, other):
        if not isinstance(other, DyadicStepFn):
            return NotImplemented
        _, x, y, _ = self._aligned(other)
        return bool(np.all(x == y))

    __hash__ = None

    def __repr__(self):
        return f"DyadicStepFn(level={self.level}, den={self.den})"


def _check_atoms(level: int):
    if level > MAX_ATOM_LEVEL:
        raise CapacityError(f"level {level} needs 2**{level} atoms; the cap is 2**{MAX_ATOM_LEVEL}")


def rademacher_sum(N: int) -> DyadicStepFn:
    """``r_0 + ... + r_N`` at level ``N + 1``.

    On atom ``j`` the digits of ``x`` are the bits of ``j``; each 1-bit
    contributes ``-1``, so the value is ``(N + 1) - 2 * popcount(j)``.
    """
    if N < 0:
        raise DomainError("N must be >= 0")
    level = N + 1
    _check_atoms(level)
    j = np.arange(1 << level, dtype=np.uint64)
    return DyadicStepFn(level, (level - 2 * popcount(j)).astype(np.int64))


def rademacher_partial(n: int) -> DyadicStepFn:
    """``r_0 + ... + r_{n-1}`` at level ``n`` (the zero function for ``n = 0``)."""
    if n < 0:
        raise DomainError("n must be >= 0")
    _check_atoms(n)
    j = np.arange(1 << n, dtype=np.uint64)
    return DyadicStepFn(n, (n - 2 * popcount(j)).astype(np.int64))


def rademacher_step(k: int) -> DyadicStepFn:
    """The single Rademacher function ``r_k`` at level ``k + 1``."""
    if k < 0:
        raise DomainError("k must be >= 0")
    _check_atoms(k + 1)
    j = np.arange(1 << (k + 1), dtype=np.int64)
    return DyadicStepFn(k + 1, 1 - 2 * (j & 1))


# ---- tail-sum sign statistics -----------------------------------------------

def _tail_fraction_enum(N0: int, N: int) -> Fraction:
    m = N - N0 + 1
    pats = np.arange(1 << m, dtype=np.int64)
    tail = np.zeros(1 << m, dtype=np.int64)
    pos = np.zeros(1 << m, dtype=bool)
    neg = np.zeros(1 << m, dtype=bool)
    for i in range(m):  # add r_N, r_{N-1}, ..., r_{N0}
        tail += 1 - 2 * ((pats >> i) & 1)
        pos |= tail > 0
        neg |= tail < 0
    return Fraction(int((pos & neg).sum()), 1 << m)


def _tail_fraction_dp(N0: int, N: int) -> Fraction:
    m = N - N0 + 1
    size = 2 * m + 1
    zero = m
    # counts[(seen_pos, seen_neg)][s + m] = number of sign paths with tail sum s
    counts = {key: np.zeros(size, dtype=object) for key in ((0, 0), (1, 0), (0, 1), (1, 1))}
    counts[(0, 0)][zero] = 1
    for _ in range(m):
        new = {key: np.zeros(size, dtype=object) for key in counts}
        for (p, q), arr in counts.items():
            moved = np.zeros(size, dtype=object)
            moved[1:] += arr[:-1]
            moved[:-1] += arr[1:]
            # landing above zero marks a positive visit, below zero a negative one
            new[(1, q)][zero + 1:] += moved[zero + 1:]
            new[(p, 1)][:zero] += moved[:zero]
            new[(p, q)][zero] += moved[zero]
        counts = new
    return Fraction(int(counts[(1, 1)].sum()), 1 << m)


def tail_fluctuation_fraction(N0: int, N: int, engine: str = "auto") -> Fraction:
    """Share of sign patterns on which ``sum_{k=n..N} r_k``, ``N0 <= n <= N``,
    takes both a strictly positive and a strictly negative value.

    ``engine`` is ``"enum"`` (all atoms, ``N <= 20``), ``"dp"`` (exact walk
    distribution, ``N <= 1000``) or ``"auto"``.
    """
    if not 0 <= N0 <= N:
        raise DomainError("need 0 <= N0 <= N")
    if engine == "auto":
        engine = "enum" if N <= MAX_ENUM_N else "dp"
    if engine == "enum":
        if N > MAX_ENUM_N:
            raise CapacityError(f"atom enumeration is limited to N <= {MAX_ENUM_N}")
        return _tail_fraction_enum(N0, N)
    if engine == "dp":
        if N > MAX_DP_N:
            raise CapacityError(f"walk DP is limited to N <= {MAX_DP_N}")
        return _tail_fraction_dp(N0, N)
    raise DomainError(f"unknown engine {engine!r}")


def tail_fraction_grid(cells: Iterable[tuple[int, int]]) -> str:
    """CSV ``N0,N,fraction,fraction_exact`` for a grid of ``(N0, N)`` cells."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N0", "N", "fraction", "fraction_exact"])
    for n0, n in cells:
        q = tail_fluctuation_fraction(n0, n)
        w.writerow([n0, n, repr(float(q)), str(q)])
    return buf.getvalue()


def fluctuation_assembly(F0: DyadicStepFn, delta, N: int) -> DyadicStepFn:
    """``G = F0 + delta * (r_0 + ... + r_N)``."""
    return F0 + rademacher_sum(N).scaled(delta)


def assembly_identity_holds(F0: DyadicStepFn, delta, N: int) -> bool:
    """Check ``E(G|D_n) - G = delta (E(S_N|D_n) - S_N)`` for ``F0.level <= n <= N + 1``."""
    G = fluctuation_assembly(F0, delta, N)
    S = rademacher_sum(N)
    for n in range(F0.level, N + 2):
        if G.condexp(n) - G != (S.condexp(n) - S).scaled(delta):
            return False
    return True

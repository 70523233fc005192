"""Exact arithmetic on the circle R/Z with 64-bit dyadic coordinates.

A point is stored as an unsigned numerator ``raw`` of ``raw / 2**64``. Addition
wraps modulo ``2**64``, so rotation orbits are exact: there is no floating-point
drift however long the orbit. Rotation numbers must have an odd numerator, which
makes the quantized rotation a cyclic group of order ``2**64``; keep horizons far
below that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, ExhaustionError
from .indexseq import IndexSequence

BITS = 64
MOD = 1 << BITS
MASK = MOD - 1
_INV_MOD = 2.0 ** -BITS


@dataclass(frozen=True, order=True)
class TorusPoint:
    """The point ``raw / 2**64`` of the circle."""

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < MOD:
            raise DomainError(f"raw coordinate {self.raw} outside [0, 2**64)")

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint((self.raw + other.raw) & MASK)

    def __sub__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint((self.raw - other.raw) & MASK)

    def __neg__(self) -> "TorusPoint":
        return TorusPoint((-self.raw) & MASK)

    def __mul__(self, n: int) -> "TorusPoint":
        return TorusPoint((self.raw * int(n)) & MASK)

    __rmul__ = __mul__

    def __float__(self) -> float:
        return self.raw * _INV_MOD

    def as_fraction(self) -> Fraction:
        return Fraction(self.raw, MOD)

    def to_decimal(self) -> str:
        """Exact decimal expansion of ``raw / 2**64`` (at most 64 digits)."""
        if self.raw == 0:
            return "0"
        digits = str(self.raw * 5**BITS).rjust(BITS, "0").rstrip("0")
        return "0." + digits

    @classmethod
    def from_decimal(cls, text: str) -> "TorusPoint":
        value = Fraction(Decimal(text))
        scaled = value * MOD
        if scaled.denominator != 1:
            raise DomainError(f"{text!r} is not an exact multiple of 2**-64")
        return cls(int(scaled))

    def __repr__(self):
        return f"TorusPoint({float(self):.17g})"


ZERO = TorusPoint(0)


def to_raw(value) -> int:
    """Exact nearest raw coordinate for a point given in any supported form.

    Accepts a TorusPoint, or a real (int, Fraction, float, Decimal, decimal
    string) in ``[0, 1]``; 1 wraps to 0. No odd adjustment is applied.
    """
    if isinstance(value, TorusPoint):
        return value.raw
    if isinstance(value, (np.integer,)):
        value = int(value)
    frac = Fraction(Decimal(value)) if isinstance(value, str) else Fraction(value)
    if not 0 <= frac <= 1:
        raise DomainError(f"circle coordinate {value!r} outside [0, 1]")
    return round(frac * MOD) & MASK


def add_mod1(a: TorusPoint, b: TorusPoint) -> TorusPoint:
    return a + b


def cf_value(coefficients: Sequence[int]) -> Fraction:
    """Value of the finite continued fraction ``[0; a1, a2, ..., ak]``."""
    if not coefficients:
        return Fraction(0)
    if any(int(a) < 1 for a in coefficients):
        raise DomainError("continued-fraction coefficients must be >= 1")
    value = Fraction(0)
    for a in reversed(coefficients):
        value = 1 / (int(a) + value)
    return value


def _force_odd(raw: int) -> int:
    return raw if raw & 1 else raw + 1


def golden() -> TorusPoint:
    """The fractional golden ratio ``(sqrt(5) - 1) / 2``, quantized with odd numerator."""
    extra = 8
    root = math.isqrt(5 << (2 * (BITS - 1 + extra)))  # floor(sqrt(5) * 2**71)
    raw = (root - (1 << (BITS - 1 + extra)) + (1 << (extra - 1))) >> extra
    return TorusPoint(_force_odd(raw))


def quantize(value) -> TorusPoint:
    """Nearest point with odd numerator to a real in ``[0, 1)``.

    ``value`` may be a real number, a decimal string, the string ``"golden"``,
    or a list of continued-fraction coefficients ``[a1, a2, ...]`` read as
    ``[0; a1, a2, ...]``.
    """
    if isinstance(value, str) and value.strip().lower() == "golden":
        return golden()
    if isinstance(value, (list, tuple)):
        frac = cf_value(value)
        if frac >= 1:
            raise DomainError("continued fraction [0; 1] equals 1, outside [0, 1)")
    else:
        frac = Fraction(Decimal(value)) if isinstance(value, str) else Fraction(value)
    if not 0 <= frac < 1:
        raise DomainError(f"rotation value {value!r} outside [0, 1)")
    raw = round(frac * MOD)
    if raw >= MOD:
        raw = MOD - 1
    return TorusPoint(_force_odd(raw))


@dataclass(frozen=True)
class Rotation:
    """The rotation ``x -> x + alpha`` of the circle; ``alpha.raw`` must be odd."""

    alpha: TorusPoint

    def __post_init__(self):
        if not self.alpha.raw & 1:
            raise DomainError(
                "rotation number needs an odd numerator (maximal order 2**64); "
                "build it with quantize()"
            )

    def point(self, x0: TorusPoint, n: int) -> TorusPoint:
        return TorusPoint((x0.raw + n * self.alpha.raw) & MASK)

    def orbit(self, x0: TorusPoint, start: int, stop: int) -> np.ndarray:
        """Raw coordinates of ``x0 + n*alpha`` for ``start <= n < stop`` as uint64."""
        return orbit_raw(x0.raw, self.alpha.raw, start, stop)

    # system protocol used by the averaging operators
    def orbit_values(self, f, x0: TorusPoint, start: int, stop: int) -> np.ndarray:
        return f.evaluate_raw(self.orbit(x0, start, stop))

    def exact_value(self, f, x0: TorusPoint, n: int) -> Fraction:
        return f(self.point(x0, n))

    def mean(self, f):
        return f.exact_mean()

    def describe(self) -> dict:
        return {"system": "rotation", "alpha": self.alpha.to_decimal()}


def orbit_raw(x0_raw: int, alpha_raw: int, start: int, stop: int) -> np.ndarray:
    n = np.arange(start, stop, dtype=np.uint64)
    return n * np.uint64(alpha_raw) + np.uint64(x0_raw)


def rotation_orbit(x0: TorusPoint, rot: Rotation, n_max: int) -> Iterator[TorusPoint]:
    """Stream ``x0 + n*alpha`` for ``n = 1..n_max`` by repeated addition."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    x = x0
    for _ in range(n_max):
        x = x + rot.alpha
        yield x


def _min_multiple_in_range(a: int, m: int, lo: int, hi: int):
    """Least ``k >= 0`` with ``lo <= (a*k) % m <= hi``, or None.

    Requires ``0 <= lo <= hi < m``. Euclid-style recursion, O(log m) steps.
    """
    if lo == 0:
        return 0
    a %= m
    if a == 0:
        return None
    k = -(-lo // a)
    if a * k <= hi:
        return k
    # every multiple below m overshoots [lo, hi]; look for the first wrap count y
    # with a*k - m*y landing inside, i.e. (m*y) % a in [(-hi) % a, (-lo) % a]
    y = _min_multiple_in_range(m % a, a, (-hi) % a, (-lo) % a)
    if y is None:
        return None
    k = -(-(lo + m * y) // a)
    if a * k - m * y > hi:
        return None
    return k


def first_hit(a: int, c: int, lo: int, hi: int, m: int = MOD):
    """Least ``k >= 0`` with ``(c + a*k) % m`` in the closed range ``[lo, hi]``.

    Returns None when no such ``k`` exists. ``lo > hi`` is an empty range.
    """
    if lo > hi:
        return None
    lo_s, hi_s = (lo - c) % m, (hi - c) % m
    if hi - lo + 1 >= m:
        return 0
    if lo_s <= hi_s:
        return _min_multiple_in_range(a, m, lo_s, hi_s)
    cands = [_min_multiple_in_range(a, m, lo_s, m - 1), _min_multiple_in_range(a, m, 0, hi_s)]
    cands = [k for k in cands if k is not None]
    return min(cands) if cands else None


def first_return(rot: Rotation, x0: TorusPoint, lo, hi, n_min: int = 1):
    """Least ``n >= n_min`` with ``x0 + n*alpha`` in the half-open arc ``[lo, hi)``."""
    lo_raw, hi_raw = to_raw(lo), to_raw(hi)
    if hi_raw == 0:
        hi_raw = MOD
    if hi_raw <= lo_raw:
        raise DomainError("arc must satisfy lo < hi")
    start = rot.point(x0, n_min).raw
    k = first_hit(rot.alpha.raw, start, lo_raw, hi_raw - 1)
    return None if k is None else n_min + k


def build_descending_return_indices(rot: Rotation, count: int,
                                    scan_limit: int = 1 << 62) -> IndexSequence:
    """Greedy indices ``N_1 < N_2 < ...`` with ``{(N_i + 1) alpha}`` strictly decreasing.

    Scanning ``N = 1, 2, ...``, ``N`` is accepted when ``{(N+1) alpha}`` is
    positive and strictly below the last accepted value. Each next acceptance is
    located directly with :func:`first_hit`, so the cost does not depend on how
    far apart the indices are. Raises :class:`ExhaustionError` (carrying the
    partial sequence) if an index would exceed ``scan_limit``.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    a = rot.alpha.raw
    accepted: list[int] = []
    n = 2  # n = N + 1
    best = MOD  # exclusive upper bound for the next value
    while len(accepted) < count:
        k = first_hit(a, (n * a) & MASK, 1, best - 1)
        if k is None or n + k - 1 > scan_limit:
            raise ExhaustionError(
                f"found {len(accepted)} of {count} indices before scan limit {scan_limit}",
                accepted,
            )
        n += k
        accepted.append(n - 1)
        best = (n * a) & MASK
        n += 1
    return IndexSequence(tuple(accepted), "DescendingReturns",
                         {"alpha": rot.alpha.to_decimal(), "count": count})

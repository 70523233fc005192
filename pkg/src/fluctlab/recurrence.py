"""Integer sequence generators and exact measure of unions of shifted circle arcs.

Arcs are half-open ``[a, b)`` in raw units of ``2**-64``; union measures are
exact integers in those units.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError
from .indexseq import IndexSequence
from .torus import MOD, TorusPoint, orbit_raw, to_raw

__all__ = [
    "IndexSequence", "ArcSet", "gen_sequence", "self_intersection_set", "arc_union_measure",
    "check_complete_recurrence", "RecurrenceTrajectory", "REACH_SLACK",
]

# coverage within 2**-40 of the whole circle counts as full measure
REACH_SLACK = 1 << 24


def _rational(v) -> Fraction:
    if isinstance(v, str):
        return Fraction(Decimal(v))
    return Fraction(v)


def _iroot(x: int, q: int) -> int:
    """Largest ``k`` with ``k**q <= x``."""
    if x < 0:
        raise DomainError("root of a negative number")
    if x < 2:
        return x
    k = int(math.exp(math.log(x) / q))
    while k ** q > x:
        k -= 1
    while (k + 1) ** q <= x:
        k += 1
    return k


def _primes(count: int) -> list[int]:
    if count < 6:
        bound = 15
    else:
        bound = int(count * (math.log(count) + math.log(math.log(count)))) + 10
    sieve = np.ones(bound + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(bound) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.nonzero(sieve)[0][:count].tolist()


def _floor_pow(c: Fraction, count: int) -> list[int]:
    p, q = c.numerator, c.denominator
    return [_iroot(n ** p, q) for n in range(1, count + 1)]


def _lacunary(rho: Fraction, count: int) -> list[int]:
    out, power, cap = [], rho, 64 * count + 64
    for _ in range(cap):
        v = math.floor(power)
        if not out or v > out[-1]:
            out.append(v)
            if len(out) == count:
                return out
        power *= rho
    raise DomainError(f"ratio {rho} too close to 1 to give {count} distinct terms")


def _syndetic_blocks(count: int, base: int) -> list[int]:
    out, n, block = [], 1, 1
    while len(out) < count:
        gap = 2 if block % 2 else 3
        for _ in range(base * block):
            out.append(n)
            n += gap
            if len(out) == count:
                break
        block += 1
    return out


def gen_sequence(kind: str, params: Optional[dict] = None, count: int = 0) -> IndexSequence:
    """First ``count`` terms of a named sequence.

    Kinds: ``Full``, ``Squares``, ``Primes``, ``FloorPow`` (``c``),
    ``Lacunary`` (``rho``; repeated floors are skipped), ``SyndeticBlocks``
    (``base``: block ``b`` has ``base*b`` terms, gap 2 for odd ``b`` and 3 for
    even ``b``) and ``Custom`` (``values``).
    """
    params = dict(params or {})
    if count < 0:
        raise DomainError("count must be >= 0")
    if kind == "Full":
        vals = list(range(1, count + 1))
    elif kind == "Squares":
        vals = [n * n for n in range(1, count + 1)]
    elif kind == "Primes":
        vals = _primes(count) if count else []
    elif kind == "FloorPow":
        c = _rational(params.get("c", "1.5"))
        if c <= 1 or c.denominator == 1:
            raise DomainError("FloorPow needs a non-integer exponent c > 1")
        params["c"] = str(c)
        vals = _floor_pow(c, count)
    elif kind == "Lacunary":
        rho = _rational(params.get("rho", 2))
        if rho <= 1:
            raise DomainError("Lacunary needs rho > 1")
        params["rho"] = str(rho)
        vals = _lacunary(rho, count) if count else []
    elif kind == "SyndeticBlocks":
        base = int(params.get("base", 8))
        if base < 1:
            raise DomainError("SyndeticBlocks needs base >= 1")
        params["base"] = base
        vals = _syndetic_blocks(count, base)
    elif kind == "Custom":
        vals = [int(v) for v in params.get("values", [])][:count or None]
        params = {}
    else:
        raise DomainError(f"unknown sequence kind {kind!r}")
    return IndexSequence(tuple(vals), kind, params)


# ---- arcs ---------------------------------------------------------------------

def _endpoint(v, upper: bool) -> int:
    """Raw endpoint; on the upper side a real 1 means the end of the circle."""
    if isinstance(v, TorusPoint):
        return v.raw
    if upper and not isinstance(v, (int, np.integer)) and _rational(v) == 1:
        return MOD
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v > 1:
        return int(v)
    return to_raw(_rational(v) if isinstance(v, str) else v)


class ArcSet:
    """A finite union of half-open arcs, kept as sorted disjoint raw intervals
    ``[a, b)`` with ``0 <= a < b <= 2**64`` (an arc through 0 is split)."""

    __slots__ = ("starts", "ends")

    def __init__(self, intervals: Iterable[tuple[int, int]] = ()):
        self.starts: list[int] = []
        self.ends: list[int] = []
        for a, b in intervals:
            self._add_wrapped(int(a), int(b))

    @classmethod
    def from_arcs(cls, arcs: Iterable[tuple]) -> "ArcSet":
        """Arcs given by real or TorusPoint endpoints; ``(a, b)`` with ``a > b`` wraps."""
        out = cls()
        for lo, hi in arcs:
            a, b = _endpoint(lo, False), _endpoint(hi, True)
            if a == b:
                continue
            out._add_wrapped(a, b)
        return out

    @classmethod
    def full(cls) -> "ArcSet":
        return cls([(0, MOD)])

    def _add_wrapped(self, a: int, b: int) -> int:
        a %= MOD
        if b != MOD:
            b %= MOD
        if a < b:
            return self._insert(a, b)
        if b == 0:
            return self._insert(a, MOD)
        return self._insert(a, MOD) + self._insert(0, b)

    def _insert(self, a: int, b: int) -> int:
        """Add ``[a, b)``; returns the raw measure newly covered."""
        if a >= b:
            return 0
        i = bisect.bisect_left(self.ends, a)
        j = bisect.bisect_right(self.starts, b)
        removed = 0
        if i < j:
            a = min(a, self.starts[i])
            b = max(b, self.ends[j - 1])
            removed = sum(e - s for s, e in zip(self.starts[i:j], self.ends[i:j]))
        self.starts[i:j] = [a]
        self.ends[i:j] = [b]
        return (b - a) - removed

    def add_arc(self, a: int, b: int) -> int:
        """Add the raw arc from ``a`` to ``b`` (wrapping if ``a > b``)."""
        return self._add_wrapped(a, b)

    def intervals(self) -> list[tuple[int, int]]:
        return list(zip(self.starts, self.ends))

    def raw_measure(self) -> int:
        return sum(e - s for s, e in zip(self.starts, self.ends))

    def measure(self) -> Fraction:
        return Fraction(self.raw_measure(), MOD)

    def shifted_back(self, s: int) -> "ArcSet":
        """``E - s`` on the circle."""
        out = ArcSet()
        for a, b in self.intervals():
            out._add_wrapped(a - s, (b - s) % MOD if b - s != MOD else MOD)
        return out

    def contains(self, x) -> bool:
        raw = x.raw if isinstance(x, TorusPoint) else to_raw(x)
        i = bisect.bisect_right(self.starts, raw) - 1
        return i >= 0 and raw < self.ends[i]

    def copy(self) -> "ArcSet":
        out = ArcSet()
        out.starts, out.ends = list(self.starts), list(self.ends)
        return out

    def __eq__(self, other):
        return isinstance(other, ArcSet) and self.intervals() == other.intervals()

    def __repr__(self):
        return f"ArcSet({len(self.starts)} arcs, measure={float(self.measure()):.6g})"

    def to_json_obj(self) -> list:
        return [[TorusPoint(a).to_decimal(), "1" if b == MOD else TorusPoint(b).to_decimal()]
                for a, b in self.intervals()]


def arc_union_measure(E: ArcSet, shifts: Sequence) -> Fraction:
    """Exact measure of the union of ``E - s`` over ``s`` in ``shifts``."""
    union = ArcSet()
    for s in shifts:
        raw = s.raw if isinstance(s, TorusPoint) else to_raw(s)
        for a, b in E.intervals():
            union.add_arc((a - raw) % MOD, (b - raw) % MOD if b - raw != MOD else MOD)
    return union.measure()


def self_intersection_set(arc_length, alpha: TorusPoint, n_max: int) -> IndexSequence:
    """All ``n <= n_max`` with ``{n alpha}`` in ``[0, l) U (1 - l, 1)``.

    These are exactly the ``n`` for which an arc ``I`` of length ``l`` meets
    ``I - n alpha``. Requires ``l < 1/4``.
    """
    lam = _rational(arc_length) if not isinstance(arc_length, TorusPoint) else arc_length.as_fraction()
    if not 0 < lam < Fraction(1, 4):
        raise DomainError("the arc length must lie in (0, 1/4)")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    lam_raw = to_raw(lam)
    members = []
    for a in range(1, n_max + 1, 1 << 20):
        b = min(n_max + 1, a + (1 << 20))
        pts = orbit_raw(0, alpha.raw, a, b)
        hit = (pts < np.uint64(lam_raw)) | (pts > np.uint64(MOD - lam_raw))
        members.append(np.nonzero(hit)[0] + a)
    vals = np.concatenate(members).tolist() if members else []
    return IndexSequence(tuple(vals), "SelfIntersection",
                         {"arc_length": str(lam), "alpha": alpha.to_decimal(), "n_max": n_max})


@dataclass
class RecurrenceTrajectory:
    """Covered measure of ``E - N_i alpha`` over ``i = L..L+k`` for each ``k``.

    ``covered`` holds exact raw measures; the list stops early once coverage
    reaches ``2**64 - REACH_SLACK`` when ``stop_when_reached`` was requested.
    """

    indices: list[int]
    covered: list[int]
    reached_at: Optional[int]

    @property
    def reached(self) -> bool:
        return self.reached_at is not None

    def measures(self) -> np.ndarray:
        return np.array(self.covered, dtype=np.float64) / float(MOD)

    def final(self) -> Fraction:
        return Fraction(self.covered[-1], MOD) if self.covered else Fraction(0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "N_i", "measure"])
        for k, (n, c) in enumerate(zip(self.indices, self.covered)):
            w.writerow([k, n, repr(c / MOD)])
        return buf.getvalue()


def check_complete_recurrence(alpha: TorusPoint, E: ArcSet, idx: IndexSequence, L: int = 1,
                              budget: int = 10_000,
                              stop_when_reached: bool = True) -> RecurrenceTrajectory:
    """Running measure of ``union_{i=L}^{L+k} (E - N_i alpha)`` for ``k = 0..budget``.

    ``L`` is 1-based, matching ``N_1, N_2, ...``.
    """
    if L < 1:
        raise DomainError("L is 1-based and must be >= 1")
    if len(idx) < L + budget:
        raise DomainError(f"sequence has {len(idx)} terms; need at least L + budget = {L + budget}")
    terms = idx.values[L - 1:L + budget]
    union = ArcSet()
    covered, reached_at, total = [], None, 0
    arcs = E.intervals()
    for k, n in enumerate(terms):
        s = (n * alpha.raw) % MOD
        for a, b in arcs:
            total += union.add_arc((a - s) % MOD, (b - s) % MOD if b - s != MOD else MOD)
        covered.append(total)
        if reached_at is None and total >= MOD - REACH_SLACK:
            reached_at = k
            if stop_when_reached:
                break
    return RecurrenceTrajectory(list(terms[:len(covered)]), covered, reached_at)

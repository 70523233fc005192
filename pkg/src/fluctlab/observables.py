"""Exact piecewise-affine functions on the circle or a bounded interval.

Every piece is half-open ``[b_i, b_{i+1})`` and carries an exact rational value
at its left end and an exact rational slope. On the circle, breakpoints are raw
64-bit coordinates and the last piece wraps around to the first breakpoint.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError
from .torus import MASK, MOD, Rotation, TorusPoint, to_raw

CIRCLE = "circle"
_INV_MOD = 2.0 ** -64


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if not self.lo < self.hi:
            raise DomainError(f"empty interval [{self.lo}, {self.hi})")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (np.integer,)):
        return Fraction(int(v))
    if isinstance(v, (np.floating,)):
        return Fraction(float(v))
    return Fraction(v)


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _float_exact(q: Fraction) -> bool:
    return Fraction(float(q)) == q


class PiecewiseFn:
    """A finitely-piecewise affine function, immutable after construction.

    ``breaks`` are raw ints (circle) or Fractions (interval), strictly
    increasing. On an interval the first break must equal ``domain.lo``.
    """

    __slots__ = ("domain", "breaks", "values", "slopes", "_fb", "_fv", "_fs", "_flat")

    def __init__(self, breaks: Sequence, values: Sequence, slopes: Optional[Sequence] = None,
                 domain=CIRCLE):
        if not breaks:
            raise DomainError("a piecewise function needs at least one piece")
        if slopes is None:
            slopes = [0] * len(breaks)
        if not len(breaks) == len(values) == len(slopes):
            raise DomainError("breaks, values and slopes must have equal length")
        if domain == CIRCLE:
            bs = tuple(to_raw(b) if not isinstance(b, int) else b for b in breaks)
            if any(not 0 <= b < MOD for b in bs):
                raise DomainError("circle breakpoints must be raw coordinates in [0, 2**64)")
        elif isinstance(domain, Interval):
            bs = tuple(_frac(b) for b in breaks)
            if bs[0] != domain.lo or bs[-1] >= domain.hi:
                raise DomainError("interval breakpoints must start at lo and stay below hi")
        else:
            raise DomainError(f"unknown domain {domain!r}")
        if any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        self.domain = domain
        self.breaks = bs
        self.values = tuple(_frac(v) for v in values)
        self.slopes = tuple(_frac(s) for s in slopes)
        self._flat = all(s == 0 for s in self.slopes)
        if domain == CIRCLE:
            self._fb = np.array(bs, dtype=np.uint64)
        else:
            self._fb = np.array([float(b) for b in bs])
        self._fv = np.array([float(v) for v in self.values])
        self._fs = np.array([float(s) for s in self.slopes])

    # ---- geometry -----------------------------------------------------------
    @property
    def is_circle(self) -> bool:
        return self.domain == CIRCLE

    def __len__(self):
        return len(self.breaks)

    def lengths(self) -> list[Fraction]:
        """Exact length of every piece."""
        if self.is_circle:
            nxt = self.breaks[1:] + (self.breaks[0] + MOD,)
            return [Fraction(e - b, MOD) for b, e in zip(self.breaks, nxt)]
        nxt = self.breaks[1:] + (self.domain.hi,)
        return [e - b for b, e in zip(self.breaks, nxt)]

    def _locate(self, x):
        """Piece index and exact offset of ``x`` from its piece start."""
        if self.is_circle:
            raw = to_raw(x)
            i = bisect.bisect_right(self.breaks, raw) - 1  # -1 wraps to the last piece
            return i, Fraction((raw - self.breaks[i]) & MASK, MOD)
        q = _frac(x)
        if not self.domain.lo <= q < self.domain.hi:
            raise DomainError(f"{x} outside [{self.domain.lo}, {self.domain.hi})")
        i = bisect.bisect_right(self.breaks, q) - 1
        return i, q - self.breaks[i]

    def __call__(self, x) -> Fraction:
        i, dx = self._locate(x)
        return self.values[i] + self.slopes[i] * dx

    def slope_at(self, x) -> Fraction:
        return self.slopes[self._locate(x)[0]]

    # ---- vectorized float evaluation ----------------------------------------
    def evaluate_raw(self, raws: np.ndarray) -> np.ndarray:
        """Float values at raw circle coordinates (uint64 array)."""
        if not self.is_circle:
            raise DomainError("evaluate_raw needs a circle function")
        raws = np.asarray(raws, dtype=np.uint64)
        idx = np.searchsorted(self._fb, raws, side="right") - 1
        idx[idx < 0] = len(self.breaks) - 1
        out = self._fv[idx]
        if not self._flat:
            dx = (raws - self._fb[idx]).astype(np.float64) * _INV_MOD
            out = out + self._fs[idx] * dx
        return out

    def evaluate(self, xs) -> np.ndarray:
        """Float values at float points; circle points are reduced mod 1."""
        xs = np.asarray(xs, dtype=np.float64)
        if self.is_circle:
            frac = np.mod(xs, 1.0)
            raws = np.minimum(np.round(frac * float(MOD)), float(MOD) - 2048).astype(np.uint64)
            return self.evaluate_raw(raws)
        if np.any((xs < float(self.domain.lo)) | (xs >= float(self.domain.hi))):
            raise DomainError("point outside interval domain")
        idx = np.searchsorted(self._fb, xs, side="right") - 1
        idx[idx < 0] = 0
        return self._fv[idx] + self._fs[idx] * (xs - self._fb[idx])

    # ---- exact statistics ---------------------------------------------------
    def exact_integral(self) -> Fraction:
        return sum((v * ln + s * ln * ln / 2 for v, s, ln in
                    zip(self.values, self.slopes, self.lengths())), Fraction(0))

    def exact_mean(self) -> Fraction:
        total = self.exact_integral()
        return total if self.is_circle else total / self.domain.length

    def piece_ranges(self) -> list[tuple[Fraction, Fraction]]:
        """Closure of the value range of each piece, as ``(low, high)``."""
        out = []
        for v, s, ln in zip(self.values, self.slopes, self.lengths()):
            end = v + s * ln
            out.append((min(v, end), max(v, end)))
        return out

    def ess_sup(self) -> Fraction:
        return max(hi for _, hi in self.piece_ranges())

    def ess_inf(self) -> Fraction:
        return min(lo for lo, _ in self.piece_ranges())

    def sup_abs(self) -> Fraction:
        return max(abs(self.ess_sup()), abs(self.ess_inf()))

    def is_constant(self) -> bool:
        return self.ess_sup() == self.ess_inf()

    @property
    def is_flat(self) -> bool:
        return self._flat

    @property
    def float_exact(self) -> bool:
        """Step function whose values are all exactly representable as floats."""
        return self._flat and all(_float_exact(v) for v in self.values)

    # ---- algebra ------------------------------------------------------------
    def shifted(self, alpha: TorusPoint) -> "PiecewiseFn":
        """The function ``x -> self(x + alpha)`` on the circle."""
        if not self.is_circle:
            raise DomainError("shift is defined for circle functions only")
        pieces = sorted(((b - alpha.raw) & MASK, v, s)
                        for b, v, s in zip(self.breaks, self.values, self.slopes))
        return PiecewiseFn([p[0] for p in pieces], [p[1] for p in pieces],
                           [p[2] for p in pieces])

    def _combine(self, other: "PiecewiseFn", op: Callable) -> "PiecewiseFn":
        if self.domain != other.domain:
            raise DomainError("cannot combine functions on different domains")
        cuts = sorted(set(self.breaks) | set(other.breaks))
        values, slopes = [], []
        for c in cuts:
            x = c if not self.is_circle else TorusPoint(c)
            values.append(op(self(x), other(x)))
            slopes.append(op(self.slope_at(x), other.slope_at(x)))
        return PiecewiseFn(cuts, values, slopes, self.domain).simplified()

    def __add__(self, other):
        if not isinstance(other, PiecewiseFn):
            c = _frac(other)
            return PiecewiseFn(self.breaks, [v + c for v in self.values], self.slopes, self.domain)
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, PiecewiseFn):
            return self + (-_frac(other))
        return self._combine(other, lambda a, b: a - b)

    def __neg__(self):
        return self.scaled(-1)

    def scaled(self, c) -> "PiecewiseFn":
        c = _frac(c)
        return PiecewiseFn(self.breaks, [c * v for v in self.values],
                           [c * s for s in self.slopes], self.domain)

    def __mul__(self, c):
        return self.scaled(c)

    __rmul__ = __mul__

    def simplified(self) -> "PiecewiseFn":
        """Merge neighbouring pieces that continue the same affine formula."""
        keep = [0]
        lengths = self.lengths()
        offset = lengths[0]  # distance from the last kept start to the current piece
        for i in range(1, len(self.breaks)):
            j = keep[-1]
            if self.slopes[i] == self.slopes[j] and self.values[i] == self.values[j] + self.slopes[j] * offset:
                offset += lengths[i]
                continue
            keep.append(i)
            offset = lengths[i]
        if len(keep) == len(self.breaks):
            return self
        return PiecewiseFn([self.breaks[i] for i in keep], [self.values[i] for i in keep],
                           [self.slopes[i] for i in keep], self.domain)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseFn):
            return NotImplemented
        a, b = self.simplified(), other.simplified()
        return (a.domain, a.breaks, a.values, a.slopes) == (b.domain, b.breaks, b.values, b.slopes)

    def __hash__(self):
        s = self.simplified()
        return hash((s.domain, s.breaks, s.values, s.slopes))

    def __repr__(self):
        return f"PiecewiseFn({len(self)} pieces, domain={self.domain!r})"

    # ---- serialization ------------------------------------------------------
    def to_json_obj(self) -> dict:
        if self.is_circle:
            dom = CIRCLE
            ats = [TorusPoint(b).to_decimal() for b in self.breaks]
        else:
            dom = {"interval": [_fmt(self.domain.lo), _fmt(self.domain.hi)]}
            ats = [_fmt(b) for b in self.breaks]
        return {"domain": dom,
                "pieces": [{"at": a, "value": _fmt(v), "slope": _fmt(s)}
                           for a, v, s in zip(ats, self.values, self.slopes)]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PiecewiseFn":
        try:
            dom = obj.get("domain", CIRCLE)
            pieces = obj["pieces"]
            if dom == CIRCLE:
                domain = CIRCLE
                breaks = [to_raw(p["at"]) for p in pieces]
            else:
                lo, hi = dom["interval"]
                domain = Interval(_frac(lo), _frac(hi))
                breaks = [_frac(p["at"]) for p in pieces]
            values = [_frac(p["value"]) for p in pieces]
            slopes = [_frac(p.get("slope", 0)) for p in pieces]
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"malformed piecewise function: {exc}") from exc
        return cls(breaks, values, slopes, domain)

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseFn":
        return cls.from_json_obj(json.loads(text))


_INT64_SAFE = 1 << 62


def exact_values_raw(f: PiecewiseFn, raws: np.ndarray):
    """Exact values at raw circle points as ``(numerators, denominator)``.

    Numerators are int64 when they provably fit, Python ints (object dtype)
    otherwise; ``value[i] == numerators[i] / denominator`` exactly.
    """
    if not f.is_circle:
        raise DomainError("exact_values_raw needs a circle function")
    raws = np.asarray(raws, dtype=np.uint64)
    den = math.lcm(*(q.denominator for q in f.values + f.slopes))
    idx = np.searchsorted(f._fb, raws, side="right") - 1
    idx[idx < 0] = len(f.breaks) - 1
    vals = [int(v * den) for v in f.values]
    if f.is_flat:
        big = max(abs(v) for v in vals) >= _INT64_SAFE
        table = np.array(vals, dtype=object if big else np.int64)
        return table[idx], den
    slopes = np.array([int(s * den) for s in f.slopes], dtype=object)
    starts = np.array([v << 64 for v in vals], dtype=object)
    offsets = (raws - f._fb[idx]).astype(object)
    return starts[idx] + slopes[idx] * offsets, den << 64


# ---- constructors -----------------------------------------------------------

def constant(c, domain=CIRCLE) -> PiecewiseFn:
    start = 0 if domain == CIRCLE else domain.lo
    return PiecewiseFn([start], [c], [0], domain)


def indicator(lo, hi, domain=CIRCLE) -> PiecewiseFn:
    """Indicator of the half-open arc ``[lo, hi)``; on the circle it may wrap."""
    if domain != CIRCLE:
        lo, hi = _frac(lo), _frac(hi)
        if not domain.lo <= lo < hi <= domain.hi:
            raise DomainError("indicator interval must lie inside the domain")
        breaks, vals = [domain.lo], [0]
        if lo == domain.lo:
            vals[0] = 1
        else:
            breaks.append(lo)
            vals.append(1)
        if hi < domain.hi:
            breaks.append(hi)
            vals.append(0)
        return PiecewiseFn(breaks, vals, None, domain)
    a, b = to_raw(lo), to_raw(hi)
    if a == b:
        # equal raw endpoints: the whole circle only for real inputs like (0, 1)
        reals = not isinstance(lo, TorusPoint) and not isinstance(hi, TorusPoint)
        return constant(1 if reals and _frac(lo) != _frac(hi) else 0)
    if a < b:
        pieces = [(0, 0), (a, 1), (b, 0)] if a else [(0, 1), (b, 0)]
    else:
        pieces = [(0, 1), (b, 0), (a, 1)] if b else [(0, 0), (a, 1)]
    return PiecewiseFn([p[0] for p in pieces], [p[1] for p in pieces]).simplified()


def sawtooth(teeth: int = 1) -> PiecewiseFn:
    """``x -> {teeth * x}``, with tooth boundaries rounded to the raw grid."""
    if teeth < 1:
        raise DomainError("teeth must be >= 1")
    breaks = [to_raw(Fraction(j, teeth)) for j in range(teeth)]
    return PiecewiseFn(breaks, [0] * teeth, [teeth] * teeth)


def tent() -> PiecewiseFn:
    """Continuous tent: rises from 0 to 1/2 on ``[0, 1/2)``, falls back on ``[1/2, 1)``."""
    return PiecewiseFn([0, 1 << 63], [0, Fraction(1, 2)], [1, -1])


def capped_identity(cap=Fraction(1, 2)) -> PiecewiseFn:
    """``x -> min(x, cap)``."""
    return PiecewiseFn([0, to_raw(cap)], [0, cap], [1, 0])


def rademacher(k: int, x) -> int:
    """``+1`` if ``{2**k x}`` lies in ``[0, 1/2)``, else ``-1``."""
    if k < 0:
        raise DomainError("rademacher index must be >= 0")
    if isinstance(x, TorusPoint):
        return 1 if k >= 64 or not (x.raw >> (63 - k)) & 1 else -1
    q = _frac(x)
    if not 0 <= q < 1:
        raise DomainError(f"{x} outside [0, 1)")
    return 1 if (q * 2**k) % 1 < Fraction(1, 2) else -1


def rademacher_fn(k: int) -> PiecewiseFn:
    """``r_k`` as a circle step function with ``2**(k+1)`` pieces."""
    if not 0 <= k <= 20:
        raise DomainError("rademacher_fn supports 0 <= k <= 20")
    n = 1 << (k + 1)
    step = MOD // n
    return PiecewiseFn([j * step for j in range(n)], [1 - 2 * (j & 1) for j in range(n)])


# ---- coboundaries and barriers ----------------------------------------------

@dataclass(frozen=True)
class Coboundary:
    """``derived = transfer - transfer o T`` for the rotation ``system``."""

    transfer: PiecewiseFn
    system: Rotation
    derived: PiecewiseFn


def make_coboundary(F: PiecewiseFn, rot: Rotation) -> Coboundary:
    if not F.is_circle:
        raise DomainError("coboundaries are built from circle functions")
    return Coboundary(F, rot, F - F.shifted(rot.alpha))


@dataclass(frozen=True)
class BarrierInfo:
    """Flat extreme levels of a transfer function.

    ``upper`` / ``lower`` hold ``(level, measure)`` of the flat pieces sitting at
    the essential supremum / infimum, or None when that extreme is not attained
    on a set of positive length.
    """

    upper: Optional[tuple[Fraction, Fraction]]
    lower: Optional[tuple[Fraction, Fraction]]

    @property
    def kind(self) -> str:
        if self.upper and self.lower:
            return "Both"
        if self.upper:
            return "Upper"
        if self.lower:
            return "Lower"
        return "None"

    @property
    def level(self) -> Optional[Fraction]:
        side = self.upper or self.lower
        return side[0] if side else None

    @property
    def attaining_measure(self) -> Fraction:
        side = self.upper or self.lower
        return side[1] if side else Fraction(0)

    def to_json_obj(self) -> dict:
        def side(s):
            return None if s is None else {"level": _fmt(s[0]), "measure": _fmt(s[1])}
        return {"kind": self.kind, "upper": side(self.upper), "lower": side(self.lower)}


def detect_barrier(F: PiecewiseFn) -> BarrierInfo:
    if not F.is_circle:
        raise DomainError("barrier detection needs a circle function")
    if F.is_constant():
        # a constant function sits at both extremes on the whole circle
        c = F.values[0]
        return BarrierInfo((c, Fraction(1)), (c, Fraction(1)))
    hi, lo = F.ess_sup(), F.ess_inf()
    up = low = Fraction(0)
    for v, s, ln in zip(F.values, F.slopes, F.lengths()):
        if s == 0 and v == hi:
            up += ln
        if s == 0 and v == lo:
            low += ln
    return BarrierInfo((hi, up) if up else None, (lo, low) if low else None)


def attaining_arcs(F: PiecewiseFn, level) -> list[tuple[int, int]]:
    """Raw half-open arcs ``[a, b)`` where ``F`` is flat at ``level``."""
    level = _frac(level)
    nxt = F.breaks[1:] + (F.breaks[0] + MOD,)
    return [(b, e & MASK if e != MOD else 0) for b, e, v, s in
            zip(F.breaks, nxt, F.values, F.slopes) if s == 0 and v == level]


def two_sided_level(f: PiecewiseFn) -> Fraction:
    """Largest ``delta`` with ``f - mean`` exceeding ``+delta`` and ``-delta`` on positive measure.

    Returned as a supremum: for sloped extremes the bound itself is not attained.
    """
    m = f.exact_mean()
    return min(f.ess_sup() - m, m - f.ess_inf())


# ---- named presets ----------------------------------------------------------

def _half_indicator():
    return indicator(0, Fraction(1, 2))


PRESETS: dict[str, Callable[..., PiecewiseFn]] = {
    "halfindicator": _half_indicator,
    "centered_halfindicator": lambda: _half_indicator() - Fraction(1, 2),
    "sawtooth": sawtooth,
    "tent": tent,
    "capped": capped_identity,
    "rademacher": rademacher_fn,
    "constant": lambda value=0: constant(value),
}


def circle_preset(name: str, **params) -> PiecewiseFn:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
    return factory(**params)

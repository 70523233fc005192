"""Box-kernel convolution of compactly supported piecewise functions on the line.

``phi_n = n * 1[-1/n, 0]``, so ``(phi_n * f)(x) = n * integral_x^{x+1/n} f``. All
evaluation goes through the exact antiderivative of ``f``.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError
from .observables import Interval, PiecewiseFn, _frac


class LineFn:
    """A piecewise-affine function on an interval, extended by zero to the line."""

    __slots__ = ("fn", "_cum")

    def __init__(self, fn: PiecewiseFn):
        if fn.is_circle:
            raise DomainError("LineFn wraps an interval-domain function")
        self.fn = fn
        cum = [Fraction(0)]
        for v, s, ln in zip(fn.values, fn.slopes, fn.lengths()):
            cum.append(cum[-1] + v * ln + s * ln * ln / 2)
        self._cum = tuple(cum)

    @classmethod
    def from_pieces(cls, lo, hi, breaks, values, slopes=None) -> "LineFn":
        return cls(PiecewiseFn(breaks, values, slopes, Interval(lo, hi)))

    @property
    def lo(self) -> Fraction:
        return self.fn.domain.lo

    @property
    def hi(self) -> Fraction:
        return self.fn.domain.hi

    @property
    def is_flat(self) -> bool:
        return self.fn.is_flat

    def __call__(self, x) -> Fraction:
        q = _frac(x)
        if q < self.lo or q >= self.hi:
            return Fraction(0)
        return self.fn(q)

    def antiderivative(self, x) -> Fraction:
        """``integral_{-inf}^x f``, exact."""
        q = _frac(x)
        if q <= self.lo:
            return Fraction(0)
        if q >= self.hi:
            return self._cum[-1]
        i = bisect.bisect_right(self.fn.breaks, q) - 1
        dx = q - self.fn.breaks[i]
        return self._cum[i] + self.fn.values[i] * dx + self.fn.slopes[i] * dx * dx / 2

    def integral(self) -> Fraction:
        return self._cum[-1]

    def sup_abs(self) -> Fraction:
        return self.fn.sup_abs()

    def l1_norm(self) -> Fraction:
        return sum((_abs_integral(v, s, ln) for v, s, ln in
                    zip(self.fn.values, self.fn.slopes, self.fn.lengths())), Fraction(0))

    def _extended(self, lo: Fraction, hi: Fraction) -> PiecewiseFn:
        """The same function on a wider interval, zero where newly covered."""
        breaks, values, slopes = [], [], []
        if lo < self.lo:
            breaks.append(lo), values.append(0), slopes.append(0)
        breaks.extend(self.fn.breaks)
        values.extend(self.fn.values)
        slopes.extend(self.fn.slopes)
        if hi > self.hi:
            breaks.append(self.hi), values.append(0), slopes.append(0)
        return PiecewiseFn(breaks, values, slopes, Interval(lo, hi))

    def _binary(self, other: "LineFn", sign: int) -> "LineFn":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        a, b = self._extended(lo, hi), other._extended(lo, hi)
        return LineFn(a + b if sign > 0 else a - b)

    def __add__(self, other: "LineFn") -> "LineFn":
        return self._binary(other, 1)

    def __sub__(self, other: "LineFn") -> "LineFn":
        return self._binary(other, -1)

    def scaled(self, c) -> "LineFn":
        return LineFn(self.fn.scaled(c))

    def to_json_obj(self) -> dict:
        return self.fn.to_json_obj()

    def __repr__(self):
        return f"LineFn([{self.lo}, {self.hi}), {len(self.fn)} pieces)"


def _abs_integral(v: Fraction, s: Fraction, length: Fraction) -> Fraction:
    """``integral_0^length |v + s t| dt``, splitting at an interior root."""
    def signed(a, b):
        return v * (b - a) + s * (b * b - a * a) / 2

    if s != 0:
        root = -v / s
        if 0 < root < length:
            return abs(signed(0, root)) + abs(signed(root, length))
    return abs(signed(0, length))


def l1_distance(f: LineFn, g: LineFn) -> Fraction:
    """``integral |f - g|`` over the line, exact."""
    return (f - g).l1_norm()


@dataclass(frozen=True)
class BoxKernel:
    """``phi_n = n * 1[-1/n, 0]``; unit mass, support width ``1/n``."""

    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise DomainError("box kernel index must be >= 1")

    @property
    def width(self) -> Fraction:
        return Fraction(1, self.n)

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return (-self.width, Fraction(0))

    @property
    def height(self) -> int:
        return self.n

    def l1_norm(self) -> Fraction:
        return self.height * self.width

    def apply(self, f: LineFn, x) -> Fraction:
        """``(phi_n * f)(x) = n (P(x + 1/n) - P(x))`` with ``P`` the antiderivative of ``f``."""
        q = _frac(x)
        return self.n * (f.antiderivative(q + self.width) - f.antiderivative(q))


def convolve_box(f: LineFn, k: BoxKernel) -> LineFn:
    """``phi_n * f`` as an exact LineFn on ``[lo - 1/n, hi)``.

    Defined for step functions, whose convolution is piecewise affine; sloped
    input would give quadratic pieces, so use :meth:`BoxKernel.apply` pointwise.
    """
    if not f.is_flat:
        raise DomainError("convolve_box needs a piecewise-constant input; "
                          "evaluate sloped inputs pointwise with BoxKernel.apply")
    w = k.width
    lo, hi = f.lo - w, f.hi
    cuts = sorted({lo} | {b for b in f.fn.breaks} | {b - w for b in f.fn.breaks if b - w > lo}
                  | ({f.hi - w} if f.hi - w > lo else set()))
    cuts = [c for c in cuts if c < hi]
    values = [k.apply(f, c) for c in cuts]
    slopes = [k.n * (f(c + w) - f(c)) for c in cuts]
    return LineFn(PiecewiseFn(cuts, values, slopes, Interval(lo, hi)).simplified())


def ratio_series(f: LineFn, kernels: Sequence[BoxKernel], eps: Sequence, x) -> list[Fraction]:
    """``((phi_n * f)(x) - f(x)) / eps_n`` for each kernel, exact."""
    if len(kernels) != len(eps):
        raise DomainError("one eps per kernel is required")
    qs = [_frac(e) for e in eps]
    if any(e <= 0 for e in qs):
        raise DomainError("eps must be strictly positive")
    fx = f(x)
    return [(k.apply(f, x) - fx) / e for k, e in zip(kernels, qs)]


def ratio_csv(rows: Sequence[tuple[int, Fraction, Fraction]]) -> str:
    """CSV ``n,x,ratio`` from ``(n, x, ratio)`` triples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "x", "ratio"])
    for n, x, r in rows:
        w.writerow([n, repr(float(x)), repr(float(r))])
    return buf.getvalue()


# ---- constructions ----------------------------------------------------------

def square_wave(period, height, lo=0, hi=1, origin=0, ramp=0) -> LineFn:
    """``+height`` on ``[origin + k p, origin + k p + p/2)``, ``-height`` on the other
    half-periods, restricted to ``[lo, hi)`` and zero outside.

    ``ramp`` in ``[0, 1/2)`` replaces every interior sign flip by a linear
    transition of width ``ramp * period`` starting at the flip.
    """
    p, h = _frac(period), _frac(height)
    lo, hi, origin, ramp = _frac(lo), _frac(hi), _frac(origin), _frac(ramp)
    if p <= 0:
        raise DomainError("period must be positive")
    if not lo < hi:
        raise DomainError("empty interval")
    if not 0 <= ramp < Fraction(1, 2):
        raise DomainError("ramp must lie in [0, 1/2)")
    half = p / 2
    k = (lo - origin) // half
    level = h if k % 2 == 0 else -h
    breaks, values, slopes = [lo], [level], [Fraction(0)]
    t = origin + (k + 1) * half
    w = ramp * p
    while t < hi:
        nxt = -level
        if w:
            breaks.append(t), values.append(level), slopes.append((nxt - level) / w)
            if t + w < hi:
                breaks.append(t + w), values.append(nxt), slopes.append(Fraction(0))
        else:
            breaks.append(t), values.append(nxt), slopes.append(Fraction(0))
        level = nxt
        t += half
    return LineFn(PiecewiseFn(breaks, values, slopes, Interval(lo, hi)))


def rademacher_line(m: int, lo=0, hi=1) -> LineFn:
    """``r_m`` rescaled to ``[lo, hi)``: a unit square wave of period ``(hi - lo) / 2**m``."""
    lo, hi = _frac(lo), _frac(hi)
    return square_wave((hi - lo) / (1 << m), 1, lo, hi, origin=lo)


@dataclass(frozen=True)
class StackSchedule:
    """Amplitudes ``a_l``, Rademacher indices ``m_l`` and kernel indices ``n_l``."""

    amplitudes: tuple = (Fraction(1, 2), Fraction(1, 4))
    digits: tuple = (4, 10)
    kernels: tuple = (16, 1024)
    threshold: Fraction = Fraction(2)
    lo: Fraction = Fraction(0)
    hi: Fraction = Fraction(1)

    def __post_init__(self):
        if not len(self.amplitudes) == len(self.digits) == len(self.kernels):
            raise DomainError("schedule lists must have equal length")
        if len(self.amplitudes) > 3:
            raise DomainError("stacking depth is limited to 3")
        if list(self.digits) != sorted(set(self.digits)):
            raise DomainError("Rademacher indices must increase")


def rademacher_stack(schedule: StackSchedule = StackSchedule()) -> LineFn:
    """``sum_l a_l r_{m_l}`` on ``[lo, hi)``."""
    total = None
    for a, m in zip(schedule.amplitudes, schedule.digits):
        term = rademacher_line(m, schedule.lo, schedule.hi).scaled(a)
        total = term if total is None else total + term
    return total


def stack_stage_set(schedule: StackSchedule, stage: int, x) -> bool:
    """Whether ``x`` belongs to the set where stage ``stage`` should blow up.

    That is: ``r_{m_stage}(x) = -1``, the kernel window ``[x, x + 1/n]`` stays in
    ``[lo, hi)`` and crosses no sign flip of a coarser layer.
    """
    q = _frac(x)
    lo, hi = schedule.lo, schedule.hi
    w = Fraction(1, schedule.kernels[stage])
    if not (lo <= q and q + w <= hi):
        return False
    span = hi - lo
    half_own = span / (1 << (schedule.digits[stage] + 1))
    if ((q - lo) // half_own) % 2 == 0:  # r_m = +1 on even half-periods
        return False
    for m in schedule.digits[:stage]:
        half = span / (1 << (m + 1))
        if (q - lo) // half != (q + w - lo) // half and (q + w - lo) % half != 0:
            return False
    return True


def sample_phase_points(period, lo, hi, count: int, rng: np.random.Generator, sign: int = -1,
                        origin=0) -> list[Fraction]:
    """``count`` exact dyadic points of ``[lo, hi)`` where a unit square wave equals ``sign``."""
    p, lo, hi, origin = _frac(period), _frac(lo), _frac(hi), _frac(origin)
    wave = square_wave(p, 1, lo, hi, origin)
    out = []
    while len(out) < count:
        x = lo + (hi - lo) * Fraction(int(rng.integers(0, 1 << 53)), 1 << 53)
        if wave(x) == sign:
            out.append(x)
    return out

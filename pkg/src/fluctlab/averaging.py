"""Averaging operators along orbits: Cesaro, subsequence, moving, binomial and
averages along an explicit point sequence.

Conventions: the Cesaro average is ``A_N = (1/N) sum_{n=1..N} f(T^n x)``. A
prefix array ``P[k] = sum_{n<k} f(T^n x)`` underlies every operator, so the
window average over ``[a, b)`` is ``(P[b] - P[a]) / (b - a)``.

When ``f`` is a step function the sums are kept as exact integers over a common
denominator and the series carries ``num`` / ``den`` arrays with
``value == num / den`` exactly. Otherwise prefix sums use compensated (TwoSum)
accumulation in float64.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Optional

import numpy as np

from .errors import DomainError, ExhaustionError
from .indexseq import IndexSequence
from .observables import Coboundary, PiecewiseFn, exact_values_raw
from .torus import MASK, MOD, Rotation, TorusPoint, orbit_raw, to_raw

_INT64_SAFE = 1 << 62
_CHUNK = 1 << 20


# ---- systems ----------------------------------------------------------------

@dataclass(frozen=True)
class SkewPoint:
    """A point ``(x, j)`` of circle x {0, 1}."""

    x: TorusPoint
    j: int = 0

    def __post_init__(self):
        if self.j not in (0, 1):
            raise DomainError("skew layer must be 0 or 1")


@dataclass(frozen=True)
class SignSkew:
    """``T(x, j) = (x + alpha, 1 - j)``; an observable ``g`` on the circle acts
    as ``f(x, j) = (-1)**j g(x)``, so constant ``g`` gives ``f o T = -f``."""

    rot: Rotation

    def orbit(self, p: SkewPoint, start: int, stop: int) -> np.ndarray:
        return self.rot.orbit(p.x, start, stop)

    def signs(self, p: SkewPoint, start: int, stop: int) -> np.ndarray:
        n = np.arange(start, stop, dtype=np.int64)
        return np.where((n + p.j) & 1, -1, 1).astype(np.int64)

    def orbit_values(self, g: PiecewiseFn, p: SkewPoint, start: int, stop: int) -> np.ndarray:
        return g.evaluate_raw(self.orbit(p, start, stop)) * self.signs(p, start, stop)

    def exact_value(self, g: PiecewiseFn, p: SkewPoint, n: int) -> Fraction:
        sign = -1 if (n + p.j) & 1 else 1
        return sign * g(self.rot.point(p.x, n))

    def mean(self, g: PiecewiseFn) -> Fraction:
        return Fraction(0)

    def describe(self) -> dict:
        return {"system": "signskew", "alpha": self.rot.alpha.to_decimal()}


def _orbit_exact(system, f: PiecewiseFn, x0, start: int, stop: int):
    num, den = exact_values_raw(f, system.orbit(x0, start, stop))
    signs = getattr(system, "signs", None)
    if signs is not None:
        s = signs(x0, start, stop)
        num = num * (s if num.dtype != object else s.astype(object))
    return num, den


def _orbit_float(system, f: PiecewiseFn, x0, start: int, stop: int) -> np.ndarray:
    return system.orbit_values(f, x0, start, stop)


def _point_json(x0) -> Any:
    if isinstance(x0, SkewPoint):
        return {"x": x0.x.to_decimal(), "j": x0.j}
    return x0.to_decimal()


# ---- summation --------------------------------------------------------------

def compensated_cumsum(values: np.ndarray, carry=(0.0, 0.0)):
    """Running sums of ``values`` with a TwoSum error term carried alongside.

    Returns ``(sums, carry)``; ``sums[i]`` approximates ``carry + values[:i+1].sum()``
    to within a couple of ulps of the result, and ``carry`` continues the
    accumulation over the next chunk.
    """
    hi0, lo0 = carry
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return v.copy(), carry
    s = np.cumsum(np.concatenate(([hi0], v)))
    prev, cur = s[:-1], s[1:]
    z = cur - prev
    err = (prev - (cur - z)) + (v - z)
    lo = lo0 + np.cumsum(err)
    return cur + lo, (float(cur[-1]), float(lo[-1]))


def prefix_sums(system, f: PiecewiseFn, x0, stop: int, exact: Optional[bool] = None):
    """``P[k] = sum_{n<k} f(T^n x0)`` for ``k = 0..stop``.

    Returns ``(P, den)``: with ``den`` an int the entries of ``P`` are exact
    integer numerators (value ``P[k] / den``); with ``den`` None they are floats.
    ``exact=None`` picks the exact path for step functions.
    """
    if stop < 0:
        raise DomainError("stop must be >= 0")
    if exact is None:
        exact = f.is_flat
    if exact:
        num, den = _orbit_exact(system, f, x0, 0, stop)
        if num.dtype != object:
            bound = int(np.abs(num).max(initial=0)) * max(stop, 1)
            if bound >= _INT64_SAFE:
                num = num.astype(object)
        out = np.empty(stop + 1, dtype=num.dtype)
        out[0] = 0
        out[1:] = np.cumsum(num)
        return out, den
    out = np.empty(stop + 1)
    out[0] = 0.0
    carry = (0.0, 0.0)
    for a in range(0, stop, _CHUNK):
        b = min(stop, a + _CHUNK)
        out[a + 1:b + 1], carry = compensated_cumsum(_orbit_float(system, f, x0, a, b), carry)
    return out, None


def _divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Correctly rounded floats of ``num / den`` for integer arrays."""
    if num.dtype != object and den.dtype != object and \
            np.abs(num).max(initial=0) < 2**53 and np.abs(den).max(initial=0) < 2**53:
        return num.astype(np.float64) / den.astype(np.float64)
    return np.array([int(a) / int(b) for a, b in zip(num, den)], dtype=np.float64)


def _int_array(values) -> np.ndarray:
    vals = [int(v) for v in values]
    big = any(abs(v) >= _INT64_SAFE for v in vals)
    return np.array(vals, dtype=object if big else np.int64)


# ---- series container -------------------------------------------------------

@dataclass
class AverageSeries:
    """Values ``A_N`` at strictly increasing ``indices`` with their limit.

    ``num`` / ``den`` (optional) give each value exactly as an integer ratio.
    """

    indices: np.ndarray
    values: np.ndarray
    limit: Fraction
    meta: dict = field(default_factory=dict)
    num: Optional[np.ndarray] = None
    den: Optional[np.ndarray] = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.limit = Fraction(self.limit)
        if self.indices.shape != self.values.shape:
            raise DomainError("indices and values differ in length")
        if self.indices.size > 1 and np.any(np.diff(self.indices) <= 0):
            raise DomainError("series indices must be strictly increasing")
        if (self.num is None) != (self.den is None):
            raise DomainError("num and den must be given together")

    @property
    def exact(self) -> bool:
        return self.num is not None

    def __len__(self):
        return int(self.indices.size)

    def exact_values(self) -> list[Fraction]:
        if not self.exact:
            raise DomainError("series carries no exact values")
        return [Fraction(int(a), int(b)) for a, b in zip(self.num, self.den)]

    def select(self, positions: np.ndarray, meta: dict) -> "AverageSeries":
        return AverageSeries(self.indices[positions], self.values[positions], self.limit, meta,
                             None if self.num is None else self.num[positions],
                             None if self.den is None else self.den[positions])

    # -- output --
    def rows(self):
        lim = float(self.limit)
        prev = None
        for n, v in zip(self.indices.tolist(), self.values.tolist()):
            yield n, v, (None if prev is None else v - prev), v - lim
            prev = v

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "value", "diff_to_prev", "value_minus_limit"])
        for n, v, d, m in self.rows():
            w.writerow([n, repr(v), "" if d is None else repr(d), repr(m)])
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {"meta": self.meta, "limit": str(self.limit), "exact": self.exact,
                "rows": [{"N": n, "value": v, "diff_to_prev": d, "value_minus_limit": m}
                         for n, v, d, m in self.rows()]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


# ---- operators --------------------------------------------------------------

def _meta(op: str, system, x0, **extra) -> dict:
    meta = {"operator": op, "x0": _point_json(x0)}
    meta.update(system.describe() if hasattr(system, "describe") else {})
    meta.update(extra)
    return meta


def cesaro_series(f: PiecewiseFn, system, x0, n_max: int,
                  exact: Optional[bool] = None) -> AverageSeries:
    """``A_N = (1/N) sum_{n=1..N} f(T^n x0)`` for ``N = 1..n_max``."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    P, pden = prefix_sums(system, f, x0, n_max + 1, exact)
    ns = np.arange(1, n_max + 1, dtype=np.int64)
    sums = P[2:] - P[1]
    meta = _meta("cesaro", system, x0, n_max=n_max)
    if pden is None:
        return AverageSeries(ns, sums / ns, system.mean(f), meta)
    den = ns * pden if sums.dtype != object and n_max * pden < _INT64_SAFE \
        else ns.astype(object) * pden
    return AverageSeries(ns, _divide(sums, den), system.mean(f), meta, sums, den)


def cesaro_at(f: PiecewiseFn, system, x0, idx: IndexSequence,
              exact: Optional[bool] = None) -> AverageSeries:
    """Cesaro averages at the indices of ``idx`` only."""
    full = cesaro_series(f, system, x0, idx[-1], exact)
    return subsequence_series(full, idx)


def coboundary_closed_form(cb: Coboundary, x0: TorusPoint, indices) -> AverageSeries:
    """``A_N = (F(x0 + alpha) - F(x0 + (N+1) alpha)) / N`` for each requested ``N``.

    Exact for any transfer function; only two evaluations per ``N``.
    """
    idx = np.asarray(indices.values if isinstance(indices, IndexSequence) else list(indices),
                     dtype=np.int64)
    if idx.size == 0 or idx[0] < 1:
        raise DomainError("indices must be positive")
    a = cb.system.alpha.raw
    first = TorusPoint((x0.raw + a) & MASK)
    pts = (idx + 1).astype(np.uint64) * np.uint64(a) + np.uint64(x0.raw)
    top, den0 = exact_values_raw(cb.transfer, np.array([first.raw], dtype=np.uint64))
    vals, _ = exact_values_raw(cb.transfer, pts)
    num = top[0] - vals
    if num.dtype == object or den0 * int(idx[-1]) >= _INT64_SAFE:
        num = num.astype(object)
        den = idx.astype(object) * den0
    else:
        den = idx * den0
    meta = _meta("coboundary_closed_form", cb.system, x0)
    return AverageSeries(idx, _divide(num, den), Fraction(0), meta, num, den)


def subsequence_series(full: AverageSeries, idx: IndexSequence) -> AverageSeries:
    want = idx.as_array()
    pos = np.searchsorted(full.indices, want)
    ok = (pos < len(full)) & (full.indices[np.minimum(pos, len(full) - 1)] == want)
    if not ok.all():
        bad = int(want[np.argmin(ok)])
        raise DomainError(f"index N={bad} is not in the full series (max {int(full.indices[-1])})")
    meta = dict(full.meta, operator="subsequence", parent=full.meta.get("operator"),
                sequence=idx.kind)
    return full.select(pos, meta)


@dataclass(frozen=True)
class MovingParams:
    """Window starts ``N_i`` and lengths ``l_i``; the default length is ``N_{i+1} - N_i``."""

    starts: IndexSequence
    lengths: tuple[int, ...]

    def __post_init__(self):
        lens = tuple(int(v) for v in self.lengths)
        object.__setattr__(self, "lengths", lens)
        if len(lens) != len(self.starts):
            raise DomainError("one length per start is required")
        if any(v < 1 for v in lens):
            raise DomainError("window lengths must be >= 1")

    @classmethod
    def consecutive(cls, starts: IndexSequence) -> "MovingParams":
        """Windows ``[N_i, N_{i+1})`` for all but the last start."""
        vals = starts.values
        return cls(IndexSequence(vals[:-1], starts.kind, starts.params),
                   tuple(b - a for a, b in zip(vals, vals[1:])))


def moving_average_series(f: PiecewiseFn, system, x0, params: MovingParams,
                          exact: Optional[bool] = None) -> AverageSeries:
    """``M_i = (1/l_i) sum_{j<l_i} f(T^(N_i + j) x0)`` from one prefix array."""
    starts = params.starts.as_array()
    lens = np.asarray(params.lengths, dtype=np.int64)
    P, pden = prefix_sums(system, f, x0, int((starts + lens).max()), exact)
    sums = P[starts + lens] - P[starts]
    meta = _meta("moving", system, x0, windows=len(starts))
    if pden is None:
        return AverageSeries(starts, sums / lens, system.mean(f), meta)
    den = lens.astype(object) * pden if sums.dtype == object else lens * pden
    return AverageSeries(starts, _divide(sums, den), system.mean(f), meta, sums, den)


def ulp_distance(a: float, b: float, scale: float) -> float:
    """``|a - b|`` in units of the last place of ``scale``."""
    unit = math.ulp(abs(scale)) if scale else math.ulp(0.0)
    return abs(a - b) / unit


def moving_identity_residuals(f: PiecewiseFn, system, x0, starts: IndexSequence) -> np.ndarray:
    """Residual, in ulps, of
    ``A[0,N_{i+1}) - A[0,N_i) = (M_i - A[0,N_i)) (N_{i+1} - N_i) / N_{i+1}``
    for consecutive windows, all evaluated in float64 from one prefix array.
    """
    N = starts.as_array()
    if N.size < 2:
        raise DomainError("need at least two window starts")
    P, _ = prefix_sums(system, f, x0, int(N[-1]), exact=False)
    cur = P[N[:-1]] / N[:-1]
    nxt = P[N[1:]] / N[1:]
    lens = N[1:] - N[:-1]
    moving = (P[N[1:]] - P[N[:-1]]) / lens
    lhs = nxt - cur
    rhs = (moving - cur) * lens / N[1:]
    scale = np.maximum(np.maximum(np.abs(nxt), np.abs(cur)), np.abs(moving))
    unit = np.spacing(scale)
    unit[scale == 0] = np.spacing(0.0)
    return np.abs(lhs - rhs) / unit


def binomial_series(f: PiecewiseFn, system, x0, n_max: int) -> AverageSeries:
    """``A^b_N = 2^-N sum_{n=0..N} C(N, n) f(T^n x0)`` for ``N = 1..n_max``.

    Exact rational values for ``n_max <= 64``; log-domain float weights up to
    ``10**4`` beyond that.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if n_max > 10_000:
        raise DomainError("binomial averages are limited to n_max <= 10**4")
    ns = np.arange(1, n_max + 1, dtype=np.int64)
    meta = _meta("binomial", system, x0, n_max=n_max)
    limit = system.mean(f)
    if n_max <= 64:
        num, den = _orbit_exact(system, f, x0, 0, n_max + 1)
        terms = [int(v) for v in num]
        nums, dens = [], []
        for N in range(1, n_max + 1):
            s = sum(math.comb(N, n) * terms[n] for n in range(N + 1))
            q = Fraction(s, den << N)
            nums.append(q.numerator)
            dens.append(q.denominator)
        num_a, den_a = _int_array(nums), _int_array(dens)
        return AverageSeries(ns, _divide(num_a, den_a), limit, meta, num_a, den_a)
    vals = _orbit_float(system, f, x0, 0, n_max + 1)
    out = np.empty(n_max)
    ln2 = math.log(2.0)
    for N in range(1, n_max + 1):
        n = np.arange(N + 1)
        logw = (math.lgamma(N + 1) - np.array([math.lgamma(k + 1) + math.lgamma(N - k + 1) for k in n])
                - N * ln2)
        out[N - 1] = float(np.dot(np.exp(logw), vals[:N + 1]))
    return AverageSeries(ns, out, limit, meta)


# ---- averages along explicit point sequences --------------------------------

def weyl_points(theta: TorusPoint, start: int = 1) -> Iterable[int]:
    """Raw coordinates of ``{n theta}``, ``n = start, start + 1, ...``."""
    n = start
    while True:
        yield (n * theta.raw) & MASK
        n += 1


def van_der_corput_points(start: int = 1) -> Iterable[int]:
    """Raw coordinates of the base-2 van der Corput sequence from index ``start``."""
    n = start
    while True:
        yield int(f"{n:064b}"[::-1], 2)
        n += 1


def _collect_raw(points, count: int) -> np.ndarray:
    if isinstance(points, np.ndarray):
        if points.size < count:
            raise ExhaustionError(f"point stream delivered {points.size} of {count} points",
                                  points.tolist())
        return points[:count].astype(np.uint64)
    out = []
    for p in points:
        out.append(_raw_of(p))
        if len(out) == count:
            break
    if len(out) < count:
        raise ExhaustionError(f"point stream delivered {len(out)} of {count} points", out)
    return np.array(out, dtype=np.uint64)


def _raw_of(p) -> int:
    if isinstance(p, TorusPoint):
        return p.raw
    if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
        p = int(p)
        if not 0 <= p < MOD:
            raise DomainError(f"raw coordinate {p} out of range")
        return p
    return to_raw(p)


def ud_series(points, f: PiecewiseFn, n_max: int, exact: Optional[bool] = None) -> AverageSeries:
    """``A_N = (1/N) sum_{n=1..N} f(x_n)`` along the first ``n_max`` points.

    Points may be TorusPoints, raw integer coordinates, or reals in ``[0, 1)``.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    raws = _collect_raw(points, n_max)
    ns = np.arange(1, n_max + 1, dtype=np.int64)
    meta = {"operator": "ud", "n_max": n_max}
    limit = f.exact_mean()
    if exact is None:
        exact = f.is_flat
    if exact:
        num, den = exact_values_raw(f, raws)
        if num.dtype != object and int(np.abs(num).max(initial=0)) * n_max >= _INT64_SAFE:
            num = num.astype(object)
        sums = np.cumsum(num)
        dens = ns * den if sums.dtype != object and den * n_max < _INT64_SAFE \
            else ns.astype(object) * den
        return AverageSeries(ns, _divide(sums, dens), limit, meta, sums, dens)
    sums, _ = compensated_cumsum(f.evaluate_raw(raws))
    return AverageSeries(ns, sums / ns, limit, meta)


def ud_coboundary_series(F: PiecewiseFn, theta: TorusPoint, n_max: int) -> AverageSeries:
    """``A_N = (F(theta) - F((N+1) theta)) / N`` for ``N = 1..n_max``, exactly."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    ns = np.arange(1, n_max + 1, dtype=np.int64)
    pts = orbit_raw(0, theta.raw, 2, n_max + 2)
    vals, den = exact_values_raw(F, pts)
    top, _ = exact_values_raw(F, np.array([theta.raw], dtype=np.uint64))
    num = top[0] - vals
    if num.dtype == object or den * n_max >= _INT64_SAFE:
        num = num.astype(object)
        dens = ns.astype(object) * den
    else:
        dens = ns * den
    meta = {"operator": "ud_coboundary", "theta": theta.to_decimal(), "n_max": n_max}
    return AverageSeries(ns, _divide(num, dens), Fraction(0), meta, num, dens)

"""Sign-change, monotone-run and gap statistics of an average series, plus
finite-horizon recovery of a transfer function from ergodic sums.

Series that carry exact integer ratios are compared exactly (tolerance 0).
Float series use the band ``tau_N = 16 * eps * N`` around each comparison.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .averaging import AverageSeries, prefix_sums
from .errors import DomainError
from .observables import PiecewiseFn
from .torus import Rotation, TorusPoint

_EPS = np.finfo(np.float64).eps
_INT64_SAFE = 1 << 62


def _maxabs(a) -> int:
    a = np.asarray(a)
    if a.size == 0:
        return 0
    return int(max(abs(int(a.max())), abs(int(a.min()))))


def _safe(*arrays, bound: int):
    """The arrays as int64 when ``bound`` fits, else as Python-int object arrays."""
    dtype = np.int64 if bound < _INT64_SAFE else object
    return [np.asarray(a).astype(dtype) for a in arrays]


def _cross(a_num, a_den, b_num, b_den):
    """``a_num * b_den - b_num * a_den`` without overflow."""
    bound = _maxabs(a_num) * _maxabs(b_den) + _maxabs(b_num) * _maxabs(a_den)
    an, ad, bn, bd = _safe(a_num, a_den, b_num, b_den, bound=bound)
    return an * bd - bn * ad


def _sign(arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype == object:
        return np.array([(v > 0) - (v < 0) for v in arr], dtype=np.int8)
    return np.sign(arr).astype(np.int8)


def default_tau(series: AverageSeries) -> np.ndarray:
    if series.exact:
        return np.zeros(len(series))
    return 16 * _EPS * series.indices.astype(np.float64)


def limit_signs(series: AverageSeries, tau=None) -> np.ndarray:
    """Sign of ``value - limit`` per entry (+1, -1, or 0 inside the band)."""
    if series.exact and tau is None:
        lim = series.limit
        return _sign(_cross(series.num, series.den,
                            np.full(len(series), lim.numerator, dtype=object),
                            np.full(len(series), lim.denominator, dtype=object)))
    t = default_tau(series) if tau is None else np.broadcast_to(np.asarray(tau, float), (len(series),))
    diff = series.values - float(series.limit)
    return np.where(diff > t, 1, np.where(diff < -t, -1, 0)).astype(np.int8)


def _exact_steps(series: AverageSeries):
    """Exact consecutive differences as ``(num, den)`` integer arrays."""
    n0, d0, n1, d1 = series.num[:-1], series.den[:-1], series.num[1:], series.den[1:]
    num = _cross(n1, d1, n0, d0)
    bound = _maxabs(d0) * _maxabs(d1)
    d0s, d1s = _safe(d0, d1, bound=bound)
    return num, d0s * d1s


def step_signs(series: AverageSeries, tau=None) -> np.ndarray:
    """Sign of ``value[i+1] - value[i]``."""
    if series.exact and tau is None:
        num, _ = _exact_steps(series)
        return _sign(num)
    t = default_tau(series)[1:] if tau is None else np.broadcast_to(np.asarray(tau, float), (len(series) - 1,))
    d = np.diff(series.values)
    return np.where(d > t, 1, np.where(d < -t, -1, 0)).astype(np.int8)


def gap_events(series: AverageSeries, d, at: str = "next") -> tuple[int, int]:
    """Counts of steps ``value[i+1] - value[i]`` above ``+d/N`` and below ``-d/N``.

    ``N`` is the later index (``at="next"``) or the earlier one (``at="prev"``).
    """
    if len(series) < 2:
        return 0, 0
    if at not in ("next", "prev"):
        raise DomainError("gap index must be 'next' or 'prev'")
    d = Fraction(d)
    Ns = series.indices[1:] if at == "next" else series.indices[:-1]
    if series.exact:
        num, den = _exact_steps(series)
        thr_den = Ns.astype(object) * d.denominator
        thr_num = np.full(len(Ns), d.numerator, dtype=object)
        up = _sign(_cross(num, den, thr_num, thr_den))
        down = _sign(_cross(num, den, -thr_num, thr_den))
        return int((up > 0).sum()), int((down < 0).sum())
    step = np.diff(series.values)
    thr = float(d) / Ns
    t = default_tau(series)[1:]
    return int((step > thr + t).sum()), int((step < -thr - t).sum())


def _longest_run(mask: np.ndarray) -> int:
    best = cur = 0
    for ok in mask.tolist():
        cur = cur + 1 if ok else 0
        best = max(best, cur)
    return best


@dataclass
class FluctuationReport:
    length: int
    above_count: int
    below_count: int
    equal_count: int
    sign_changes: int
    longest_nonincreasing_run: int
    longest_nondecreasing_run: int
    strict_up: int
    strict_down: int
    flat: int
    up_gap_events: int
    down_gap_events: int
    gap_constant: str
    eventual_sign: str
    tail_start: int
    exact: bool

    def to_json_obj(self) -> dict:
        return asdict(self)


def _eventual(signs: np.ndarray) -> str:
    if signs.size == 0:
        return "Undetermined"
    pos, neg = bool((signs > 0).any()), bool((signs < 0).any())
    if pos and neg:
        return "Mixed"
    if pos:
        return "Nonneg"
    if neg:
        return "Nonpos"
    return "Equal"


def analyze(series: AverageSeries, tau=None, d=0, tail_start: Optional[int] = None,
            gap_at: str = "next") -> FluctuationReport:
    """Counters of a series relative to its limit.

    ``eventual_sign`` looks at indices ``>= tail_start``: ``Nonneg`` when no value
    falls strictly below the limit band, ``Nonpos`` symmetrically, ``Mixed``
    when both happen and ``Equal`` when every value sits in the band.
    """
    if len(series) == 0:
        raise DomainError("cannot analyze an empty series")
    if tau is not None and np.any(np.asarray(tau) < 0):
        raise DomainError("tolerance must be >= 0")
    if tail_start is None:
        tail_start = int(series.indices[0])
    if tail_start > int(series.indices[-1]):
        raise DomainError(f"tail start {tail_start} beyond the last index")
    s = limit_signs(series, tau)
    nz = s[s != 0]
    changes = int((nz[1:] != nz[:-1]).sum()) if nz.size > 1 else 0
    steps = step_signs(series, tau) if len(series) > 1 else np.zeros(0, dtype=np.int8)
    up, down = gap_events(series, d, gap_at) if d else (0, 0)
    tail = s[series.indices >= tail_start]
    return FluctuationReport(
        length=len(series),
        above_count=int((s > 0).sum()),
        below_count=int((s < 0).sum()),
        equal_count=int((s == 0).sum()),
        sign_changes=changes,
        longest_nonincreasing_run=_longest_run(steps <= 0) + 1,
        longest_nondecreasing_run=_longest_run(steps >= 0) + 1,
        strict_up=int((steps > 0).sum()),
        strict_down=int((steps < 0).sum()),
        flat=int((steps == 0).sum()),
        up_gap_events=up,
        down_gap_events=down,
        gap_constant=str(Fraction(d)),
        eventual_sign=_eventual(tail),
        tail_start=tail_start,
        exact=series.exact and tau is None,
    )


def consecutive_moves(series: AverageSeries, tau=None) -> tuple[int, int, int]:
    """``(strict_up, strict_down, flat)`` over consecutive entries."""
    if len(series) < 2:
        raise DomainError("need at least two entries")
    s = step_signs(series, tau)
    return int((s > 0).sum()), int((s < 0).sum()), int((s == 0).sum())


def settling_position(signs: np.ndarray, direction: int) -> Optional[int]:
    """First position from which every remaining step has sign ``direction``.

    None when the last step already disagrees (never settled).
    """
    bad = np.nonzero(signs != direction)[0]
    if bad.size == 0:
        return 0
    last = int(bad[-1]) + 1
    return None if last >= signs.size else last


def recover_transfer(f: PiecewiseFn, rot: Rotation, x_grid: Sequence[TorusPoint],
                     horizon: int, exact: Optional[bool] = None):
    """``[(x, min_{1<=N<=horizon} sum_{n<N} f(T^n x))]`` for each grid point.

    For ``f = F - F o T`` the sum is ``F(x) - F(T^N x)``, so once the orbit has
    visited the flat top of ``F`` the minimum equals ``F(x) - max F``.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    out = []
    for x in x_grid:
        P, den = prefix_sums(rot, f, x, horizon, exact)
        m = P[1:].min()
        out.append((x, Fraction(int(m), den) if den is not None else float(m)))
    return out


def running_minimum_trace(f: PiecewiseFn, rot: Rotation, x: TorusPoint,
                          horizons: Sequence[int], exact: Optional[bool] = None) -> list:
    """The finite-horizon minimum of ergodic sums at each horizon in ``horizons``."""
    hs = sorted(horizons)
    P, den = prefix_sums(rot, f, x, hs[-1], exact)
    run = np.minimum.accumulate(P[1:]) if P.dtype != object else \
        np.array(list(_accumulate_min(P[1:])), dtype=object)
    vals = [run[h - 1] for h in hs]
    return [Fraction(int(v), den) if den is not None else float(v) for v in vals]


def _accumulate_min(values):
    cur = None
    for v in values:
        cur = v if cur is None or v < cur else cur
        yield cur

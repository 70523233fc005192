from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluctlab.errors import DomainError, ExhaustionError
from fluctlab.torus import (MOD, Rotation, TorusPoint, build_descending_return_indices, first_hit,
                            first_return, golden, orbit_raw, quantize, rotation_orbit, to_raw)

raws = st.integers(0, MOD - 1)


def golden_oracle_raw() -> int:
    getcontext().prec = 80
    value = (Decimal(5).sqrt() - 1) / 2
    return int((value * MOD).to_integral_value())


def test_golden_matches_high_precision_decimal():
    g = golden()
    assert g.raw & 1
    assert abs(g.raw - golden_oracle_raw()) <= 1


def test_continued_fraction_of_ones_approximates_golden():
    cf = quantize([1] * 20)
    assert abs(cf.raw - golden().raw) / MOD < 2.0 ** -26


@pytest.mark.parametrize("bad", [1, "1.5", -0.1, [1]])
def test_quantize_rejects_values_outside_unit_interval(bad):
    with pytest.raises(DomainError):
        quantize(bad)


def test_rotation_requires_odd_numerator():
    with pytest.raises(DomainError):
        Rotation(TorusPoint(MOD // 2))


@given(raws, raws, raws)
def test_addition_is_associative_and_wraps(a, b, c):
    x, y, z = TorusPoint(a), TorusPoint(b), TorusPoint(c)
    assert (x + y) + z == x + (y + z)
    assert (x + y).raw == (a + b) % MOD
    assert (x - x).raw == 0


@given(raws)
def test_decimal_round_trip_is_exact(a):
    p = TorusPoint(a)
    assert TorusPoint.from_decimal(p.to_decimal()) == p
    assert p.as_fraction() == Fraction(a, MOD)


@given(raws, raws.map(lambda r: r | 1), st.integers(0, 500))
def test_vectorized_orbit_equals_repeated_addition(x0, a, start):
    rot = Rotation(TorusPoint(a))
    seq = [p.raw for p in rotation_orbit(TorusPoint(x0), rot, start + 20)]
    vec = orbit_raw(x0, a, start + 1, start + 21).tolist()
    assert vec == seq[start:start + 20]


@given(st.integers(2, 400).flatmap(lambda m: st.tuples(
    st.just(m), st.integers(0, m - 1), st.integers(0, m - 1), st.integers(0, m - 1),
    st.integers(0, m - 1))))
def test_first_hit_matches_brute_force(args):
    m, a, c, lo, hi = args
    lo, hi = min(lo, hi), max(lo, hi)
    brute = next((k for k in range(m + 1) if lo <= (c + a * k) % m <= hi), None)
    assert first_hit(a, c, lo, hi, m) == brute


def test_first_return_into_small_arc_matches_orbit_scan():
    rot = Rotation(golden())
    n, x = 0, 0
    hi = to_raw(Fraction(1, 100))
    while True:
        n += 1
        x = (x + rot.alpha.raw) % MOD
        if x < hi:
            break
    assert first_return(rot, TorusPoint(0), 0, Fraction(1, 100)) == n == 89


def greedy_oracle(alpha_raw: int, count: int) -> list[int]:
    out, last, n = [], MOD, 0
    while len(out) < count:
        n += 1
        v = ((n + 1) * alpha_raw) % MOD
        if 0 < v < last:
            out.append(n)
            last = v
    return out


def test_descending_return_indices_first_three():
    assert build_descending_return_indices(Rotation(golden()), 3).values == (1, 4, 12)


@pytest.mark.parametrize("alpha", ["golden", "0.3183098861837907", [2, 2, 2, 2, 2, 2, 2, 2]])
def test_descending_return_indices_match_greedy_scan(alpha):
    rot = Rotation(quantize(alpha))
    got = build_descending_return_indices(rot, 12).values
    assert list(got) == greedy_oracle(rot.alpha.raw, 12)
    vals = [((n + 1) * rot.alpha.raw) % MOD for n in got]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


def test_descending_return_indices_report_partial_on_exhaustion():
    with pytest.raises(ExhaustionError) as info:
        build_descending_return_indices(Rotation(golden()), 40, scan_limit=10_000)
    partial = list(info.value.partial)
    assert partial and partial[-1] <= 10_000
    assert partial == greedy_oracle(golden().raw, len(partial))


def test_orbit_dtype_and_wrap():
    out = orbit_raw(MOD - 1, 1, 1, 3)
    assert out.dtype == np.uint64
    assert out.tolist() == [0, 1]


def test_quantize_forces_odd_numerator():
    assert quantize(0.5).raw == 2 ** 63 + 1
    assert quantize("0.25").raw == 2 ** 62 + 1


def test_quarter_rotation_orbit():
    rot = Rotation(quantize("0.25"))
    pts = [float(p) for p in rotation_orbit(TorusPoint(0), rot, 4)]
    assert pts == pytest.approx([0.25, 0.5, 0.75, 0.0], abs=1e-15)


@given(raws, raws)
def test_subtraction_undoes_addition(a, b):
    assert (TorusPoint(a) + TorusPoint(b)) - TorusPoint(b) == TorusPoint(a)

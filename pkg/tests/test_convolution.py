from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluctlab.convolution import (BoxKernel, LineFn, StackSchedule, convolve_box, l1_distance,
                                  rademacher_line, rademacher_stack, ratio_csv, ratio_series,
                                  sample_phase_points, square_wave, stack_stage_set)
from fluctlab.errors import DomainError

fr = st.fractions(min_value=-2, max_value=2, max_denominator=40)


@st.composite
def line_steps(draw):
    lo = draw(st.fractions(min_value=-1, max_value=1, max_denominator=20))
    cuts = sorted(set(draw(st.lists(st.fractions(min_value=0, max_value=3, max_denominator=30),
                                    max_size=6))) - {0})
    length = draw(st.fractions(min_value=Fraction(1, 10), max_value=4, max_denominator=10))
    cuts = [c for c in cuts if c < length]
    breaks = [lo] + [lo + c for c in cuts]
    vals = [draw(fr) for _ in breaks]
    return LineFn.from_pieces(lo, lo + length, breaks, vals)


def window_integral(f: LineFn, a: Fraction, b: Fraction) -> Fraction:
    """``integral_a^b f`` by summing piece overlaps directly."""
    ends = list(f.fn.breaks[1:]) + [f.hi]
    total = Fraction(0)
    for s, e, v in zip(f.fn.breaks, ends, f.fn.values):
        lo, hi = max(a, s), min(b, e)
        if hi > lo:
            total += v * (hi - lo)
    return total


@given(line_steps(), st.integers(1, 12), st.fractions(min_value=-3, max_value=5, max_denominator=97))
def test_box_average_matches_overlap_oracle(f, n, x):
    k = BoxKernel(n)
    assert k.apply(f, x) == n * window_integral(f, x, x + Fraction(1, n))


@given(line_steps(), st.integers(1, 8), st.lists(st.fractions(min_value=-3, max_value=5,
                                                              max_denominator=97), max_size=10))
def test_convolved_function_agrees_pointwise(f, n, xs):
    k = BoxKernel(n)
    g = convolve_box(f, k)
    for x in xs:
        assert g(x) == k.apply(f, x)
    assert g.integral() == f.integral()


def test_indicator_convolution_shape_for_n_two():
    unit = LineFn.from_pieces(0, 1, [0], [1])
    g = convolve_box(unit, BoxKernel(2))
    assert g(Fraction(-1, 2)) == 0
    assert g(Fraction(-1, 4)) == Fraction(1, 2)
    assert g(0) == 1 and g(Fraction(1, 4)) == 1 and g(Fraction(1, 2)) == 1
    assert g(Fraction(3, 4)) == Fraction(1, 2)
    assert g(1) == 0


@pytest.mark.parametrize("n", range(1, 11))
def test_l1_error_of_box_smoothing_is_one_over_n(n):
    unit = LineFn.from_pieces(0, 1, [0], [1])
    assert l1_distance(convolve_box(unit, BoxKernel(n)), unit) == Fraction(1, n)


def test_kernel_is_normalized():
    for n in (1, 7, 1024):
        k = BoxKernel(n)
        assert k.l1_norm() == 1
        assert k.support == (Fraction(-1, n), 0)


@pytest.mark.parametrize("period,n", [(Fraction(1, 100), 3), (Fraction(1, 1000), 10)])
def test_square_wave_smoothing_sup_bound(period, n):
    wave = square_wave(period, 1)
    sup = convolve_box(wave, BoxKernel(n)).sup_abs()
    assert sup <= n * period / 2


def test_square_wave_phase_and_ratio_growth():
    p = Fraction(1, 10_000)
    wave = square_wave(p, 1)
    rng = np.random.default_rng(3)
    kernels = [BoxKernel(n) for n in range(1, 11)]
    eps = [Fraction(1, n) for n in range(1, 11)]
    for x in sample_phase_points(p, 0, 1, 50, rng, -1):
        assert wave(x) == -1
        for k, r in zip(kernels, ratio_series(wave, kernels, eps, x)):
            assert r >= Fraction(k.n, 2)


def test_square_wave_with_ramp_is_continuous_at_flip():
    wave = square_wave(Fraction(1, 4), 1, ramp=Fraction(1, 4))
    t = Fraction(1, 8)
    assert wave(t) == 1
    assert wave(t + Fraction(1, 32)) == 0
    assert wave(t + Fraction(1, 16)) == -1


def test_rademacher_line_signs():
    r = rademacher_line(2, 0, 1)
    assert [r(Fraction(2 * j + 1, 16)) for j in range(8)] == [1, -1] * 4


def test_rademacher_stack_stage_sets_blow_up():
    sched = StackSchedule()
    f = rademacher_stack(sched)
    rng = np.random.default_rng(5)
    for stage, n in enumerate(sched.kernels):
        xs = [Fraction(int(rng.integers(0, 1 << 40)), 1 << 40) for _ in range(400)]
        inset = [x for x in xs if stack_stage_set(sched, stage, x)]
        assert inset
        k = BoxKernel(n)
        assert all((k.apply(f, x) - f(x)) * n > sched.threshold for x in inset)


def test_ratio_csv_layout():
    text = ratio_csv([(1, Fraction(1, 2), Fraction(3))])
    assert text.splitlines() == ["n,x,ratio", "1,0.5,3.0"]


def test_validation():
    with pytest.raises(DomainError):
        BoxKernel(0)
    with pytest.raises(DomainError):
        square_wave(0, 1)
    with pytest.raises(DomainError):
        convolve_box(LineFn.from_pieces(0, 1, [0], [0], [1]), BoxKernel(2))
    with pytest.raises(DomainError):
        ratio_series(square_wave(Fraction(1, 4), 1), [BoxKernel(1)], [0], Fraction(1, 3))
    with pytest.raises(DomainError):
        StackSchedule(digits=(10, 4))

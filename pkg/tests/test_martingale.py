import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluctlab.errors import CapacityError, DomainError
from fluctlab.martingale import (DyadicStepFn, assembly_identity_holds, fluctuation_assembly,
                                 rademacher_partial, rademacher_step, rademacher_sum,
                                 tail_fluctuation_fraction, tail_fraction_grid)
from fluctlab.observables import rademacher


@st.composite
def dyadic(draw, max_level=8):
    level = draw(st.integers(0, max_level))
    num = draw(st.lists(st.integers(-100, 100), min_size=1 << level, max_size=1 << level))
    return DyadicStepFn(level, np.array(num, dtype=np.int64), draw(st.integers(1, 12)))


def tail_oracle(N0: int, N: int) -> Fraction:
    """Enumerate every sign pattern of ``r_N0..r_N`` with plain Python."""
    hits = total = 0
    for signs in itertools.product((1, -1), repeat=N - N0 + 1):
        tails = [sum(signs[i:]) for i in range(len(signs))]
        hits += any(t > 0 for t in tails) and any(t < 0 for t in tails)
        total += 1
    return Fraction(hits, total)


def test_sum_of_two_rademachers_on_four_atoms():
    assert [int(v) for v in rademacher_sum(1).num] == [2, 0, 0, -2]
    assert rademacher_sum(1).level == 2


@pytest.mark.parametrize("k", range(6))
def test_rademacher_step_matches_pointwise_definition(k):
    r = rademacher_step(k)
    for j in range(1 << r.level):
        x = Fraction(2 * j + 1, 2 << r.level)
        assert r(x) == rademacher(k, x)


@pytest.mark.parametrize("N", range(0, 13))
def test_conditional_expectation_of_sum_is_partial_sum(N):
    S = rademacher_sum(N)
    for n in range(N + 2):
        assert S.condexp(n) == rademacher_partial(min(n, N + 1))


@given(dyadic(), st.data())
def test_tower_and_mean_preservation(G, data):
    m = data.draw(st.integers(0, G.level + 2))
    n = data.draw(st.integers(0, m))
    assert G.condexp(m).condexp(n) == G.condexp(n)
    assert G.condexp(n).integral() == G.integral()
    assert G.condexp(n).max_abs() <= G.max_abs()


@given(dyadic(max_level=6), st.integers(0, 3))
def test_measurable_functions_are_fixed(G, extra):
    assert G.condexp(G.level + extra) == G
    assert G.refine(G.level + extra) == G


@given(dyadic(max_level=6))
def test_condexp_is_atom_average(G):
    n = max(G.level - 1, 0)
    E = G.condexp(n)
    vals = G.values()
    width = 1 << (G.level - n)
    for a in range(1 << n):
        block = vals[a * width:(a + 1) * width]
        assert E.values()[a] == sum(block) / len(block)


@pytest.mark.parametrize("N0,N", [(0, 0), (0, 1), (0, 2), (1, 4), (2, 9), (0, 11), (5, 12)])
def test_tail_fraction_matches_pattern_oracle(N0, N):
    assert tail_fluctuation_fraction(N0, N) == tail_oracle(N0, N)


def test_tail_fraction_of_three_signs_is_one_quarter():
    assert tail_fluctuation_fraction(0, 2) == Fraction(1, 4)


@pytest.mark.parametrize("N0,N", [(0, 5), (3, 14), (7, 20)])
def test_enumeration_and_walk_dp_agree(N0, N):
    assert tail_fluctuation_fraction(N0, N, "enum") == tail_fluctuation_fraction(N0, N, "dp")


def test_tail_fraction_grows_with_horizon():
    seq = [tail_fluctuation_fraction(5, N) for N in range(5, 200, 13)]
    assert all(a <= b for a, b in zip(seq, seq[1:]))
    assert tail_fluctuation_fraction(5, 1000) >= Fraction(9, 10)


def test_capacity_limits():
    with pytest.raises(CapacityError):
        rademacher_sum(25)
    with pytest.raises(CapacityError):
        tail_fluctuation_fraction(0, 21, "enum")
    with pytest.raises(CapacityError):
        tail_fluctuation_fraction(0, 1001)
    with pytest.raises(DomainError):
        tail_fluctuation_fraction(3, 2)


def test_assembly_identity():
    F0 = DyadicStepFn(3, np.array([5, -2, 0, 7, 1, 1, -3, 4]), 3)
    assert assembly_identity_holds(F0, Fraction(1, 8), 10)
    G = fluctuation_assembly(F0, Fraction(1, 8), 10)
    assert G.integral() == F0.integral()


def test_grid_csv():
    text = tail_fraction_grid([(0, 2), (1, 3)])
    assert text.splitlines()[0] == "N0,N,fraction,fraction_exact"
    assert text.splitlines()[1].endswith(",1/4")


def test_step_function_validation():
    with pytest.raises(DomainError):
        DyadicStepFn(2, np.array([1, 2, 3]))
    with pytest.raises(DomainError):
        DyadicStepFn(1, np.array([0.5, 1.0]))

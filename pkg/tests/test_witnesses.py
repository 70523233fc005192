import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fluctlab.errors import ConfigError
from fluctlab.observables import circle_preset
from fluctlab.recurrence import ArcSet
from fluctlab.torus import MOD, TorusPoint, golden
from fluctlab.witnesses import (CATALOG, best_teeth, merged_config, parse_alpha,
                                parse_observable, place_in, plateau_function, run_witness,
                                sample_raws, thread_count)

SMALL = {
    "barrier_coboundary": {"samples": 8, "n_max": 2000},
    "no_barrier_fluctuation": {"samples": 8, "n_max": 2000},
    "cesaro_nonmonotone": {"samples": 8, "n_max": 2000},
    "cesaro_gap": {"samples": 8, "n_max": 5000},
    "monotone_subsequence": {"samples": 16, "indices": 14},
    "subseq_fluct_complete_recurrence": {"samples": 8, "count": 2000, "recurrence_budget": 1000},
    "moving_identity_gap": {"cells": 50, "samples": 8, "windows": 2000},
    "martingale_fluct": {"max_n": 8, "random_functions": 30,
                         "tail_targets": [{"N0": 0, "N": 2, "equals": "1/4"}]},
    "convolution_squarewave": {"samples": 30, "period": "1/1000",
                               "stack": {"amplitudes": ["1/2", "1/4"], "digits": [4, 10],
                                         "kernels": [16, 1024], "threshold": 2, "samples": 100}},
    "eigenvalue_minus_one": {"samples": 8, "grid": 8, "cesaro_n_max": 500, "binomial_n_max": 20},
    "ud_coboundary_max": {"thetas": ["golden"], "flat_n_max": 5000},
    "ud_nonmonotone": {"samples": 8, "n_max": 2000},
}


def test_catalog_is_covered():
    assert set(SMALL) == set(CATALOG)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_every_witness_passes_small_config_and_is_reproducible(name):
    a = run_witness(name, SMALL[name], seed=3)
    b = run_witness(name, SMALL[name], seed=3)
    assert a.to_json() == b.to_json()
    assert a.samples_csv() == b.samples_csv()
    assert 0 <= a.pass_fraction <= 1
    assert a.ok, a.verdict_line()
    doc = json.loads(a.to_json())
    assert doc["parameters"] == merged_config(name, SMALL[name])
    assert doc["claim"] and doc["version"]


def test_seed_changes_random_samples():
    a = run_witness("cesaro_nonmonotone", SMALL["cesaro_nonmonotone"], seed=1)
    b = run_witness("cesaro_nonmonotone", SMALL["cesaro_nonmonotone"], seed=2)
    assert [s["x0"] for s in a.samples] != [s["x0"] for s in b.samples]


def test_martingale_report_flags_wrong_target():
    cfg = dict(SMALL["martingale_fluct"], tail_targets=[{"N0": 0, "N": 2, "equals": "3/4"}])
    rep = run_witness("martingale_fluct", cfg)
    assert not rep.ok
    bad = [s for s in rep.samples if s["verdict"] != "pass"]
    assert [s["fraction"] for s in bad] == ["1/4"]


def test_unknown_names_and_keys_are_rejected():
    with pytest.raises(ConfigError):
        run_witness("nosuch")
    with pytest.raises(ConfigError):
        run_witness("cesaro_gap", {"bogus": 1})
    with pytest.raises(ConfigError):
        run_witness("barrier_coboundary", {"transfer": "preset:sawtooth", "samples": 2})


def test_parsers():
    assert parse_alpha("golden") == golden()
    assert parse_alpha("[1, 1, 1]") == parse_alpha([1, 1, 1])
    with pytest.raises(ConfigError):
        parse_alpha("1.5")
    with pytest.raises(ConfigError):
        parse_alpha("not a number")
    assert parse_observable("preset:tent") == circle_preset("tent")
    assert parse_observable({"preset": "sawtooth", "params": {"teeth": 3}}) == \
        circle_preset("sawtooth", teeth=3)
    f = circle_preset("capped")
    assert parse_observable(f.to_json_obj()) == f
    with pytest.raises(ConfigError):
        parse_observable("tent")
    with pytest.raises(ConfigError):
        parse_observable({"preset": "sawtooth", "params": {"nope": 1}})


def test_sample_raws_grid_then_random():
    pts = sample_raws(70, seed=9, grid=64)
    assert pts[:64] == [(2 * j + 1) * MOD // 128 for j in range(64)]
    assert pts == sample_raws(70, seed=9, grid=64)
    assert len(set(pts)) == 70


@given(st.integers(0, MOD - 1))
def test_place_in_lands_inside(u):
    E = ArcSet.from_arcs([("0.1", "0.2"), ("0.7", "0.75")])
    assert E.contains(TorusPoint(place_in(E, u)))


def test_thread_count_respects_environment(monkeypatch):
    monkeypatch.setenv("FLUCTLAB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("FLUCTLAB_THREADS", "x")
    with pytest.raises(ConfigError):
        thread_count()


def test_report_is_identical_across_thread_counts(monkeypatch):
    monkeypatch.setenv("FLUCTLAB_THREADS", "1")
    one = run_witness("cesaro_gap", SMALL["cesaro_gap"]).to_json()
    monkeypatch.setenv("FLUCTLAB_THREADS", "4")
    assert run_witness("cesaro_gap", SMALL["cesaro_gap"]).to_json() == one


def test_best_teeth_for_golden():
    assert best_teeth(golden(), 64) == 55
    assert best_teeth(golden(), 1) == 1


def test_plateau_function_shape():
    theta = golden()
    F = plateau_function(theta, Fraction(1, 16), Fraction(1, 8))
    assert F(theta) == 1 == F.ess_sup()
    assert F.ess_inf() == 0
    with pytest.raises(ConfigError):
        plateau_function(theta, Fraction(1, 4), Fraction(1, 4))

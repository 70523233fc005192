"""Catalog of parameterized experiments, each checking one constructive claim
about ergodic averages and returning a reproducible pass/fail report.

Samples of "almost every x" are a centred lattice of ``grid`` points followed
by seeded uniform random points. Every report is a pure function of
``(name, config, seed)``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import __version__
from .averaging import (AverageSeries, MovingParams, SignSkew, SkewPoint, binomial_series,
                        cesaro_series, coboundary_closed_form, moving_identity_residuals,
                        prefix_sums, ud_coboundary_series, ud_series)
from .convolution import (BoxKernel, LineFn, StackSchedule, convolve_box, l1_distance,
                          rademacher_stack, ratio_series, sample_phase_points, square_wave,
                          stack_stage_set)
from .errors import ConfigError, DomainError
from .fluctuation import analyze, consecutive_moves, gap_events, settling_position, step_signs
from .indexseq import IndexSequence
from .martingale import (DyadicStepFn, assembly_identity_holds, rademacher_partial,
                         rademacher_sum, tail_fluctuation_fraction)
from .observables import (PiecewiseFn, attaining_arcs, circle_preset, constant, detect_barrier,
                          indicator, make_coboundary, sawtooth, two_sided_level)
from .recurrence import ArcSet, check_complete_recurrence, gen_sequence
from .torus import MASK, MOD, Rotation, TorusPoint, build_descending_return_indices, quantize, to_raw


# ---- config parsing (shared with the CLI) ----------------------------------

def parse_alpha(value) -> TorusPoint:
    """A rotation number: real, decimal string, ``"golden"``, CF list or ``"[a1, a2, ...]"``."""
    try:
        if isinstance(value, str) and value.strip().startswith("["):
            value = json.loads(value)
        return quantize(value)
    except (DomainError, ValueError, ArithmeticError, TypeError) as exc:
        raise ConfigError(f"invalid rotation number {value!r}: {exc}") from None


def parse_point(value) -> TorusPoint:
    try:
        return TorusPoint(to_raw(value))
    except (DomainError, ValueError, ArithmeticError, TypeError) as exc:
        raise ConfigError(f"invalid circle point {value!r}: {exc}") from None


def parse_fraction(value) -> Fraction:
    try:
        if isinstance(value, float):
            return Fraction(value)
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid number {value!r}: {exc}") from None


def parse_observable(spec) -> PiecewiseFn:
    """``"preset:name"``, ``{"preset": name, "params": {...}}`` or an inline function."""
    try:
        if isinstance(spec, str):
            if not spec.startswith("preset:"):
                raise ConfigError(f"observable string must look like 'preset:NAME', got {spec!r}")
            return circle_preset(spec[len("preset:"):])
        if isinstance(spec, dict) and "preset" in spec:
            return circle_preset(spec["preset"], **spec.get("params", {}))
        if isinstance(spec, dict) and "pieces" in spec:
            return PiecewiseFn.from_json_obj(spec)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    except TypeError as exc:
        raise ConfigError(f"bad preset parameters: {exc}") from None
    raise ConfigError(f"cannot read observable {spec!r}")


def thread_count() -> int:
    raw = os.environ.get("FLUCTLAB_THREADS", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"FLUCTLAB_THREADS must be an integer, got {raw!r}") from None
    return min(4, os.cpu_count() or 1)


def parallel_map(fn: Callable, items) -> list:
    """``[fn(x) for x in items]`` on a thread pool, order preserved."""
    items = list(items)
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---- sampling ---------------------------------------------------------------

def sample_raws(count: int, seed: int, grid: int = 64) -> list[int]:
    """``min(count, grid)`` lattice points ``(2j+1)/(2 grid)``, then seeded uniform points."""
    if count < 0 or grid < 0:
        raise ConfigError("sample counts must be >= 0")
    lattice = [((2 * j + 1) * MOD) // (2 * grid) for j in range(min(count, grid))]
    rest = count - len(lattice)
    rng = np.random.default_rng(seed)
    rand = rng.integers(0, MOD, size=rest, dtype=np.uint64, endpoint=False).tolist() if rest else []
    return lattice + [int(v) for v in rand]


def place_in(arcs: ArcSet, u: int) -> int:
    """Map a uniform raw ``u`` onto the arc set, preserving uniformity."""
    total = arcs.raw_measure()
    if total == 0:
        raise DomainError("cannot sample from an empty arc set")
    t = (u * total) >> 64
    for a, b in arcs.intervals():
        if t < b - a:
            return a + t
        t -= b - a
    return arcs.intervals()[-1][1] - 1


def _num(v) -> str:
    return str(Fraction(v))


# ---- report -----------------------------------------------------------------

@dataclass
class WitnessReport:
    name: str
    claim: str
    parameters: dict
    seed: int
    samples: list
    threshold: float
    checks: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.samples)

    @property
    def passed(self) -> int:
        return sum(1 for s in self.samples if s["verdict"] == "pass")

    @property
    def pass_fraction(self) -> float:
        return self.passed / self.total if self.total else 0.0

    @property
    def checks_ok(self) -> bool:
        return all(c.get("ok", True) for c in self.checks.values() if isinstance(c, dict))

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.pass_fraction >= self.threshold and self.checks_ok

    def verdict_line(self) -> str:
        word = "pass" if self.ok else "FAIL"
        extra = ""
        failing = [k for k, c in self.checks.items() if isinstance(c, dict) and not c.get("ok", True)]
        if failing:
            extra = f"; failed checks: {', '.join(failing)}"
        hist = self.checks.get("settling_histogram")
        if isinstance(hist, dict) and "counts" in hist:
            extra += "; settling index histogram " + json.dumps(hist["counts"], sort_keys=True)
        return (f"{self.name}: {word} {self.passed}/{self.total} "
                f"(threshold {self.threshold:g}){extra}")

    def to_json_obj(self) -> dict:
        return {"name": self.name, "claim": self.claim, "parameters": self.parameters,
                "seed": self.seed, "version": __version__, "threshold": self.threshold,
                "passed": self.passed, "total": self.total, "pass_fraction": self.pass_fraction,
                "ok": self.ok, "checks": self.checks, "samples": self.samples}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=1) + "\n"

    def samples_csv(self) -> str:
        keys = sorted({k for s in self.samples for k in s})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for s in self.samples:
            w.writerow([_cell(s.get(k)) for k in keys])
        return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---- catalog ----------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    name: str
    claim: str
    defaults: dict
    runner: Callable[[dict, int], tuple]


CATALOG: dict[str, Witness] = {}


def _register(name: str, claim: str, defaults: dict):
    def wrap(fn):
        CATALOG[name] = Witness(name, claim, defaults, fn)
        return fn
    return wrap


def merged_config(name: str, config: dict | None) -> dict:
    if name not in CATALOG:
        raise ConfigError(f"unknown witness {name!r}; catalog: {', '.join(sorted(CATALOG))}")
    cfg = json.loads(json.dumps(CATALOG[name].defaults))
    for key, value in (config or {}).items():
        if key not in cfg:
            raise ConfigError(f"witness {name}: unknown parameter {key!r} "
                              f"(known: {', '.join(sorted(cfg))})")
        cfg[key] = value
    return cfg


def run_witness(name: str, config: dict | None = None, seed: int = 0) -> WitnessReport:
    cfg = merged_config(name, config)
    try:
        samples, threshold, checks = CATALOG[name].runner(cfg, int(seed))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"witness {name}: malformed parameter ({exc})") from None
    return WitnessReport(name, CATALOG[name].claim, cfg, int(seed), samples, float(threshold), checks)


def _fluct_fields(rep) -> dict:
    return {"above": rep.above_count, "below": rep.below_count, "equal": rep.equal_count,
            "sign_changes": rep.sign_changes, "strict_up": rep.strict_up,
            "strict_down": rep.strict_down, "up_gaps": rep.up_gap_events,
            "down_gaps": rep.down_gap_events, "eventual_sign": rep.eventual_sign}


# -- barrier ------------------------------------------------------------------

@_register(
    "barrier_coboundary",
    "For a coboundary whose transfer function has a flat maximum, the averages started on "
    "the preimage of that flat top never fall strictly below the limit 0.",
    {"alpha": "golden", "transfer": "preset:halfindicator", "samples": 100, "grid": 64,
     "n_max": 100000, "threshold": 1.0},
)
def _barrier(cfg, seed):
    rot = Rotation(parse_alpha(cfg["alpha"]))
    F = parse_observable(cfg["transfer"])
    info = detect_barrier(F)
    if info.upper is None:
        raise ConfigError("transfer function has no flat maximum (upper barrier)")
    top = ArcSet([(a, b if b else MOD) for a, b in attaining_arcs(F, info.upper[0])])
    target = top.shifted_back(rot.alpha.raw)
    cb = make_coboundary(F, rot)
    n_max = int(cfg["n_max"])
    xs = [TorusPoint(place_in(target, u)) for u in sample_raws(int(cfg["samples"]), seed, int(cfg["grid"]))]

    def one(x):
        series = cesaro_series(cb.derived, rot, x, n_max)
        rep = analyze(series)
        closed = coboundary_closed_form(cb, x, range(1, n_max + 1))
        agree = bool(np.all(series.num * closed.den == closed.num * series.den)) \
            if series.num.dtype != object or closed.num.dtype != object else None
        row = {"x0": x.to_decimal(), **_fluct_fields(rep), "closed_form_agrees": agree}
        row["verdict"] = "pass" if rep.below_count == 0 else "fail"
        return row

    samples = parallel_map(one, xs)
    checks = {"barrier": {"kind": info.kind, "level": _num(info.upper[0]),
                          "measure": _num(info.upper[1]), "ok": True},
              "closed_form": {"ok": all(s["closed_form_agrees"] in (True, None) for s in samples)}}
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], checks


# -- Cesaro fluctuation -------------------------------------------------------

def _circle_samples(cfg, seed):
    return [TorusPoint(u) for u in sample_raws(int(cfg["samples"]), seed, int(cfg["grid"]))]


@_register(
    "no_barrier_fluctuation",
    "A coboundary whose transfer function has no barrier has averages strictly above and "
    "strictly below 0 infinitely often.",
    {"alpha": "golden", "transfer": "preset:sawtooth", "samples": 100, "grid": 64,
     "n_max": 20000, "min_events": 10, "threshold": 0.9},
)
def _no_barrier(cfg, seed):
    rot = Rotation(parse_alpha(cfg["alpha"]))
    F = parse_observable(cfg["transfer"])
    info = detect_barrier(F)
    cb = make_coboundary(F, rot)
    n_max, k = int(cfg["n_max"]), int(cfg["min_events"])

    def one(x):
        rep = analyze(coboundary_closed_form(cb, x, range(1, n_max + 1)))
        ok = rep.above_count >= k and rep.below_count >= k
        return {"x0": x.to_decimal(), **_fluct_fields(rep), "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, _circle_samples(cfg, seed))
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {"barrier": {"kind": info.kind, "ok": info.kind == "None"}}


@_register(
    "cesaro_nonmonotone",
    "Averages of a non-constant mean-zero function both strictly increase and strictly "
    "decrease infinitely often.",
    {"alpha": "golden", "f": "preset:centered_halfindicator", "samples": 100, "grid": 0,
     "n_max": 10000, "min_moves": 10, "threshold": 1.0},
)
def _nonmonotone(cfg, seed):
    rot = Rotation(parse_alpha(cfg["alpha"]))
    f = parse_observable(cfg["f"])
    n_max, k = int(cfg["n_max"]), int(cfg["min_moves"])

    def one(x):
        up, down, flat = consecutive_moves(cesaro_series(f, rot, x, n_max))
        ok = up >= k and down >= k
        return {"x0": x.to_decimal(), "strict_up": up, "strict_down": down, "flat": flat,
                "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, _circle_samples(cfg, seed))
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {"mean": {"value": _num(f.exact_mean()), "ok": True}}


@_register(
    "cesaro_gap",
    "For a non-constant mean-zero function with two-sided level delta and d = delta/6, "
    "A_{N+1} > A_N + d/N and A_{N+1} < A_N - d/N both happen infinitely often.",
    {"alpha": "golden", "f": "preset:centered_halfindicator", "samples": 100, "grid": 0,
     "n_max": 100000, "delta": "auto", "d_factor": "1/6", "gap_at": "prev", "min_events": 1,
     "threshold": 0.99},
)
def _gap(cfg, seed):
    rot = Rotation(parse_alpha(cfg["alpha"]))
    f = parse_observable(cfg["f"])
    delta = two_sided_level(f) if cfg["delta"] == "auto" else parse_fraction(cfg["delta"])
    d = delta * parse_fraction(cfg["d_factor"])
    n_max, k = int(cfg["n_max"]), int(cfg["min_events"])

    def one(x):
        up, down = gap_events(cesaro_series(f, rot, x, n_max), d, cfg["gap_at"])
        ok = up >= k and down >= k
        return {"x0": x.to_decimal(), "up_gaps": up, "down_gaps": down,
                "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, _circle_samples(cfg, seed))
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {"gap_constant": {"delta": _num(delta), "d": _num(d),
                                                        "ok": d > 0}}


# -- monotone subsequence -----------------------------------------------------

def best_teeth(alpha: TorusPoint, max_teeth: int) -> int:
    """The ``k <= max_teeth`` maximizing ``{k alpha}``."""
    return max(range(1, max_teeth + 1), key=lambda k: ((k * alpha.raw) & MASK, -k))


@_register(
    "monotone_subsequence",
    "Along greedy indices with {(N_i+1) alpha} strictly decreasing, the averages of the "
    "coboundary of a piecewise increasing g are eventually strictly monotone for a.e. x.",
    {"alpha": "golden", "indices": 20, "teeth": "auto", "max_teeth": 64, "samples": 100,
     "grid": 64, "min_tail": 5, "scan_limit": 1 << 62, "threshold": 0.9},
)
def _monotone(cfg, seed):
    rot = Rotation(parse_alpha(cfg["alpha"]))
    idx = build_descending_return_indices(rot, int(cfg["indices"]), int(cfg["scan_limit"]))
    teeth = best_teeth(rot.alpha, int(cfg["max_teeth"])) if cfg["teeth"] == "auto" else int(cfg["teeth"])
    cb = make_coboundary(sawtooth(teeth), rot)
    min_tail = int(cfg["min_tail"])
    steps_total = len(idx) - 1

    def one(x):
        st = step_signs(coboundary_closed_form(cb, x, idx))
        up, down = settling_position(st, 1), settling_position(st, -1)
        row = {"x0": x.to_decimal(), "settle_increasing": up, "settle_decreasing": down}
        if up is not None and steps_total - up >= min_tail:
            row["verdict"], row["settling_index"] = "pass", up
        elif down is not None and steps_total - down >= min_tail:
            row["verdict"], row["settling_index"] = "opposite", down
        else:
            row["verdict"], row["settling_index"] = "undetermined", None
        return row

    samples = parallel_map(one, _circle_samples(cfg, seed))
    hist: dict[str, int] = {}
    for i, s in enumerate(samples):
        s["id"] = i
        if s["settling_index"] is not None:
            key = str(s["settling_index"])
            hist[key] = hist.get(key, 0) + 1
    either = sum(s["verdict"] in ("pass", "opposite") for s in samples) / max(len(samples), 1)
    ok_idx = all(((n + 1) * rot.alpha.raw) & MASK > ((m + 1) * rot.alpha.raw) & MASK > 0
                 for n, m in zip(idx.values, idx.values[1:]))
    checks = {"indices": {"values": list(idx.values), "decreasing_returns": ok_idx, "ok": ok_idx},
              "teeth": {"value": teeth, "fraction": repr(((teeth * rot.alpha.raw) & MASK) / MOD),
                        "ok": True},
              "settling_histogram": {"counts": hist, "monotone_either_way": either, "ok": True}}
    return samples, cfg["threshold"], checks


# -- subsequence fluctuation --------------------------------------------------

@_register(
    "subseq_fluct_complete_recurrence",
    "Along a sequence with the complete recurrence property, averages of a coboundary with "
    "a barrier-free transfer function are above and below 0 infinitely often.",
    {"alpha": "golden", "transfer": "preset:sawtooth", "sequence": {"kind": "Squares"},
     "count": 10000, "samples": 100, "grid": 64, "min_events": 10,
     "recurrence_arc": ["0", "0.1"], "recurrence_budget": 100000, "threshold": 0.9},
)
def _subseq(cfg, seed):
    rot = Rotation(parse_alpha(cfg["alpha"]))
    F = parse_observable(cfg["transfer"])
    seq_cfg = dict(cfg["sequence"])
    kind = seq_cfg.pop("kind")
    count, budget = int(cfg["count"]), int(cfg["recurrence_budget"])
    idx = gen_sequence(kind, seq_cfg, max(count, budget + 1))
    sub = IndexSequence(idx.values[:count], idx.kind, idx.params)
    cb = make_coboundary(F, rot)
    k = int(cfg["min_events"])
    E = ArcSet.from_arcs([tuple(cfg["recurrence_arc"])])
    traj = check_complete_recurrence(rot.alpha, E, idx, 1, budget)

    def one(x):
        rep = analyze(coboundary_closed_form(cb, x, sub))
        ok = rep.above_count >= k and rep.below_count >= k
        return {"x0": x.to_decimal(), **_fluct_fields(rep), "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, _circle_samples(cfg, seed))
    for i, s in enumerate(samples):
        s["id"] = i
    checks = {"complete_recurrence": {"reached_at": traj.reached_at,
                                      "final_measure": repr(float(traj.final())),
                                      "ok": traj.reached},
              "barrier": {"kind": detect_barrier(F).kind, "ok": detect_barrier(F).kind == "None"}}
    return samples, cfg["threshold"], checks


# -- moving averages ----------------------------------------------------------

def _random_cell(rng: np.random.Generator, max_n: int):
    pieces = int(rng.integers(1, 7))
    breaks = sorted({0, *rng.integers(1, MOD, size=pieces - 1, dtype=np.uint64).tolist()})
    values = [Fraction(float(v)) for v in rng.normal(size=len(breaks))]
    slopes = [Fraction(float(v)) for v in rng.normal(size=len(breaks))] \
        if rng.random() < 0.5 else None
    f = PiecewiseFn([int(b) for b in breaks], values, slopes)
    alpha = TorusPoint(int(rng.integers(0, MOD, dtype=np.uint64)) | 1)
    x0 = TorusPoint(int(rng.integers(0, MOD, dtype=np.uint64)))
    size = int(rng.integers(2, 9))
    starts = sorted(set(rng.integers(1, max_n, size=size).tolist()))
    if len(starts) < 2:
        starts = [1, max_n]
    return f, Rotation(alpha), x0, IndexSequence(tuple(int(s) for s in starts))


@_register(
    "moving_identity_gap",
    "A[0,N_{i+1}) - A[0,N_i) = (M_i - A[0,N_i)) l_i / N_{i+1} holds identically, and for an "
    "indicator with d = (1/2) min l_i min(mu(E), 1 - mu(E)) the differences exceed +d/N_{i+1} "
    "and fall below -d/N_{i+1} infinitely often.",
    {"cells": 10000, "cell_max_n": 3000, "max_ulps": 8, "alpha": "golden", "arc": ["0", "0.3"],
     "step": 3, "windows": 10000, "samples": 100, "grid": 64, "min_events": 10,
     "threshold": 0.9},
)
def _moving(cfg, seed):
    rng = np.random.default_rng([seed, 5])
    worst, bad = 0.0, []
    for c in range(int(cfg["cells"])):
        f, rot, x0, starts = _random_cell(rng, int(cfg["cell_max_n"]))
        res = float(moving_identity_residuals(f, rot, x0, starts).max())
        worst = max(worst, res)
        if res > float(cfg["max_ulps"]):
            bad.append({"cell": c, "ulps": res})
    rot = Rotation(parse_alpha(cfg["alpha"]))
    lo, hi = cfg["arc"]
    f = indicator(lo, hi)
    mu = f.exact_mean()
    step, windows = int(cfg["step"]), int(cfg["windows"])
    starts = IndexSequence(tuple(step * (i + 1) for i in range(windows + 1)))
    params = MovingParams.consecutive(starts)
    d = Fraction(1, 2) * min(params.lengths) * min(mu, 1 - mu)
    k = int(cfg["min_events"])
    N = starts.as_array()

    def one(x):
        P, den = prefix_sums(rot, f, x, int(N[-1]))
        series = AverageSeries(N, P[N] / (N * den), mu, {}, P[N], N * den)
        up, down = gap_events(series, d, "next")
        ok = up >= k and down >= k
        return {"x0": x.to_decimal(), "up_gaps": up, "down_gaps": down,
                "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, _circle_samples(cfg, seed))
    for i, s in enumerate(samples):
        s["id"] = i
    checks = {"identity": {"cells": int(cfg["cells"]), "worst_ulps": worst,
                           "over_budget": bad[:20], "ok": not bad},
              "gap_constant": {"d": _num(d), "measure": _num(mu), "ok": d > 0}}
    return samples, cfg["threshold"], checks


# -- martingale ---------------------------------------------------------------

def _random_dyadic(rng: np.random.Generator, max_level: int) -> DyadicStepFn:
    level = int(rng.integers(0, max_level + 1))
    num = rng.integers(-1000, 1001, size=1 << level).astype(np.int64)
    return DyadicStepFn(level, num, 1 << int(rng.integers(0, 8)))


def _target_ok(q: Fraction, target: dict) -> bool:
    if "equals" in target:
        return q == parse_fraction(target["equals"])
    if "at_least" in target:
        return q >= parse_fraction(target["at_least"])
    raise ConfigError("tail target needs 'equals' or 'at_least'")


@_register(
    "martingale_fluct",
    "Conditional expectations of r_0 + ... + r_N onto the dyadic algebras are the partial "
    "sums, and the tail sums fluctuate around 0 on all but a small set.",
    {"max_n": 20, "random_functions": 1000, "random_level": 10,
     "tail_targets": [{"N0": 0, "N": 2, "equals": "1/4"}, {"N0": 5, "N": 1000, "at_least": "0.9"}],
     "monotone_max_n": 14, "monotone_n0": [0, 3, 5],
     "assembly": {"level": 3, "delta": "1/8", "N": 12}, "threshold": 1.0},
)
def _martingale(cfg, seed):
    samples = []
    max_n = int(cfg["max_n"])
    for N in range(max_n + 1):
        S = rademacher_sum(N)
        ok = all(S.condexp(n) == rademacher_partial(n) for n in range(N + 1))
        samples.append({"check": "condexp_identity", "N": N, "verdict": "pass" if ok else "fail"})
    rng = np.random.default_rng([seed, 7])
    tower = mean = contraction = 0
    count = int(cfg["random_functions"])
    for _ in range(count):
        G = _random_dyadic(rng, int(cfg["random_level"]))
        m = int(rng.integers(0, G.level + 1))
        n = int(rng.integers(0, m + 1))
        tower += G.condexp(m).condexp(n) == G.condexp(n)
        mean += G.condexp(n).integral() == G.integral()
        contraction += G.condexp(n).max_abs() <= G.max_abs()
    for name, hits in (("tower", tower), ("mean_preservation", mean), ("contraction", contraction)):
        samples.append({"check": name, "N": count, "hits": hits,
                        "verdict": "pass" if hits == count else "fail"})
    for t in cfg["tail_targets"]:
        q = tail_fluctuation_fraction(int(t["N0"]), int(t["N"]))
        samples.append({"check": "tail_fraction", "N0": int(t["N0"]), "N": int(t["N"]),
                        "fraction": str(q), "fraction_float": float(q),
                        "target": {k: v for k, v in t.items() if k not in ("N0", "N")},
                        "verdict": "pass" if _target_ok(q, t) else "fail"})
    for n0 in cfg["monotone_n0"]:
        seq = [tail_fluctuation_fraction(int(n0), N) for N in range(int(n0), int(cfg["monotone_max_n"]) + 1)]
        ok = all(a <= b for a, b in zip(seq, seq[1:]))
        samples.append({"check": "tail_monotone_in_N", "N0": int(n0), "verdict": "pass" if ok else "fail"})
    asm = cfg["assembly"]
    level = int(asm["level"])
    F0 = DyadicStepFn(level, np.random.default_rng([seed, 11]).integers(-50, 51, size=1 << level), 1)
    ok = assembly_identity_holds(F0, parse_fraction(asm["delta"]), int(asm["N"]))
    samples.append({"check": "assembly_identity", "N": int(asm["N"]), "verdict": "pass" if ok else "fail"})
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {}


# -- convolution --------------------------------------------------------------

@_register(
    "convolution_squarewave",
    "For a rapidly alternating square wave, (phi_n * f - f)(x) / eps_n grows like n on the "
    "negative phase, so the ratio is unbounded; box approximations of 1[0,1] miss it by "
    "exactly 1/n in L1.",
    {"period": "1/10000", "height": 1, "interval": ["0", "1"], "kernels": list(range(1, 11)),
     "eps": "reciprocal", "samples": 1000, "phase": -1, "ratio_factor": "1/2", "mirror": True,
     "l1_kernels": list(range(1, 11)),
     "stack": {"amplitudes": ["1/2", "1/4"], "digits": [4, 10], "kernels": [16, 1024],
               "threshold": 2, "samples": 500},
     "threshold": 0.95},
)
def _convolution(cfg, seed):
    p, h = parse_fraction(cfg["period"]), parse_fraction(cfg["height"])
    lo, hi = (parse_fraction(v) for v in cfg["interval"])
    kernels = [BoxKernel(int(n)) for n in cfg["kernels"]]
    if cfg["eps"] == "reciprocal":
        eps = [Fraction(1, k.n) for k in kernels]
    else:
        eps = [parse_fraction(e) for e in cfg["eps"]]
    factor = parse_fraction(cfg["ratio_factor"])
    wave = square_wave(p, h, lo, hi)
    rng = np.random.default_rng([seed, 13])
    phase = int(cfg["phase"])

    def check(x, sign):
        ratios = ratio_series(wave, kernels, eps, x)
        worst = min(-sign * r / (factor * k.n) for r, k in zip(ratios, kernels))
        return worst >= 1, float(worst)

    xs = sample_phase_points(p, lo, hi, int(cfg["samples"]), rng, phase)
    samples = []
    for i, x in enumerate(xs):
        ok, worst = check(x, phase)
        samples.append({"id": i, "x": repr(float(x)), "phase": phase, "min_ratio_over_target": worst,
                        "verdict": "pass" if ok else "fail"})
    checks = {}
    if cfg["mirror"]:
        mx = sample_phase_points(p, lo, hi, int(cfg["samples"]), rng, -phase)
        hits = sum(check(x, -phase)[0] for x in mx)
        checks["mirror_phase"] = {"passed": hits, "total": len(mx),
                                  "ok": hits >= float(cfg["threshold"]) * len(mx)}
    unit = LineFn.from_pieces(0, 1, [0], [1])
    l1 = {str(n): str(l1_distance(convolve_box(unit, BoxKernel(int(n))), unit)) for n in cfg["l1_kernels"]}
    checks["l1_identity"] = {"values": l1,
                             "ok": all(Fraction(v) == Fraction(1, int(n)) for n, v in l1.items())}
    st = cfg["stack"]
    sched = StackSchedule(tuple(parse_fraction(a) for a in st["amplitudes"]),
                          tuple(int(m) for m in st["digits"]), tuple(int(n) for n in st["kernels"]),
                          parse_fraction(st["threshold"]), lo, hi)
    stack = rademacher_stack(sched)
    stage_rows = []
    pts = [lo + (hi - lo) * Fraction(int(rng.integers(0, 1 << 53)), 1 << 53) for _ in range(int(st["samples"]))]
    covered = 0
    for x in pts:
        hit_any = False
        for j, n in enumerate(sched.kernels):
            if stack_stage_set(sched, j, x):
                k = BoxKernel(n)
                hit_any |= (k.apply(stack, x) - stack(x)) * n > sched.threshold
        covered += hit_any
    for j, n in enumerate(sched.kernels):
        inset = [x for x in pts if stack_stage_set(sched, j, x)]
        k = BoxKernel(n)
        hits = sum((k.apply(stack, x) - stack(x)) * n > sched.threshold for x in inset)
        stage_rows.append({"stage": j, "kernel": n, "in_set": len(inset), "above_threshold": hits})
    checks["rademacher_stack"] = {"stages": stage_rows, "union_fraction": covered / max(len(pts), 1),
                                  "ok": all(r["in_set"] > 0 and r["above_threshold"] == r["in_set"]
                                            for r in stage_rows)}
    sup_n = max(k.n for k in kernels)
    sup = convolve_box(wave, BoxKernel(sup_n)).sup_abs() if (hi - lo) / p <= 10**5 else None
    checks["sup_bound"] = {"kernel": sup_n, "sup": None if sup is None else str(sup),
                           "bound": str(sup_n * p * h / 2),
                           "ok": sup is None or sup <= sup_n * p * h / 2}
    return samples, cfg["threshold"], checks


# -- eigenvalue -1 ------------------------------------------------------------

@_register(
    "eigenvalue_minus_one",
    "If f o T = -f then Cesaro averages vanish at even N and equal -f(x)/N at odd N, and "
    "binomial averages vanish for every N.",
    {"alpha": "golden", "g": "1", "samples": 64, "grid": 64, "cesaro_n_max": 10000,
     "binomial_n_max": 64, "threshold": 1.0},
)
def _eigen(cfg, seed):
    system = SignSkew(Rotation(parse_alpha(cfg["alpha"])))
    g = constant(parse_fraction(cfg["g"]))
    n_c, n_b = int(cfg["cesaro_n_max"]), int(cfg["binomial_n_max"])
    raws = sample_raws(int(cfg["samples"]), seed, int(cfg["grid"]))
    pts = [SkewPoint(TorusPoint(u), i & 1) for i, u in enumerate(raws)]

    def one(p):
        ces = cesaro_series(g, system, p, n_c, exact=True)
        f0 = system.exact_value(g, p, 0)
        Ns = ces.indices
        want_num = np.where(Ns % 2 == 0, 0, -f0.numerator).astype(object)
        want_den = (Ns.astype(object) * f0.denominator)
        ces_ok = bool(np.all(ces.num.astype(object) * want_den == want_num * ces.den.astype(object)))
        bino = binomial_series(g, system, p, n_b)
        bino_ok = all(int(v) == 0 for v in bino.num)
        ok = ces_ok and bino_ok
        return {"x0": p.x.to_decimal(), "layer": p.j, "cesaro_pattern": ces_ok,
                "binomial_zero": bino_ok, "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, pts)
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {}


# -- uniformly distributed sequences -----------------------------------------

def plateau_function(center: TorusPoint, halfwidth: Fraction, ramp: Fraction) -> PiecewiseFn:
    """1 on ``[c - w, c + w)``, linear ramps of width ``ramp`` down to 0, 0 elsewhere."""
    if 2 * halfwidth + 2 * ramp >= 1:
        raise ConfigError("plateau and ramps must leave part of the circle at level 0")
    c, w, r = center.raw, to_raw(halfwidth), to_raw(ramp)
    pieces = sorted([((c - w) & MASK, Fraction(1), Fraction(0)),
                     ((c + w) & MASK, Fraction(1), -1 / ramp),
                     ((c + w + r) & MASK, Fraction(0), Fraction(0)),
                     ((c - w - r) & MASK, Fraction(0), 1 / ramp)])
    return PiecewiseFn([q[0] for q in pieces], [q[1] for q in pieces], [q[2] for q in pieces])


@_register(
    "ud_coboundary_max",
    "Along x_n = {n theta}, averages of a coboundary are >= 0 for every N when the transfer "
    "function is maximal at theta, and take both signs when F(theta) is an interior value.",
    {"thetas": ["golden", [2] * 30, [1, 2] * 15], "halfwidth": "1/16", "ramp": "1/8",
     "flat_n_max": 100000, "interior_n_max": 10000, "interior": "preset:sawtooth",
     "threshold": 1.0},
)
def _ud_max(cfg, seed):
    w, r = parse_fraction(cfg["halfwidth"]), parse_fraction(cfg["ramp"])
    interior = parse_observable(cfg["interior"])

    def one(theta_spec):
        theta = parse_alpha(theta_spec)
        F = plateau_function(theta, w, r)
        flat = analyze(ud_coboundary_series(F, theta, int(cfg["flat_n_max"])))
        inner = analyze(ud_coboundary_series(interior, theta, int(cfg["interior_n_max"])))
        ok_interior = interior(theta) not in (interior.ess_sup(), interior.ess_inf())
        ok = flat.below_count == 0 and inner.above_count > 0 and inner.below_count > 0 and ok_interior
        return {"theta": theta.to_decimal(), "flat_below": flat.below_count,
                "flat_above": flat.above_count, "interior_above": inner.above_count,
                "interior_below": inner.below_count, "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, cfg["thetas"])
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {}


@_register(
    "ud_nonmonotone",
    "Averages of a non-constant continuous function along a uniformly distributed sequence "
    "are not eventually monotone.",
    {"theta": "golden", "f": "preset:tent", "samples": 100, "grid": 64, "n_max": 10000,
     "min_moves": 10, "threshold": 1.0},
)
def _ud_nonmono(cfg, seed):
    theta = parse_alpha(cfg["theta"])
    f = parse_observable(cfg["f"])
    n_max, k = int(cfg["n_max"]), int(cfg["min_moves"])

    def one(x):
        pts = (np.arange(1, n_max + 1, dtype=np.uint64) * np.uint64(theta.raw) + np.uint64(x.raw))
        up, down, flat = consecutive_moves(ud_series(pts, f, n_max))
        ok = up >= k and down >= k
        return {"x0": x.to_decimal(), "strict_up": up, "strict_down": down,
                "verdict": "pass" if ok else "fail"}

    samples = parallel_map(one, _circle_samples(cfg, seed))
    for i, s in enumerate(samples):
        s["id"] = i
    return samples, cfg["threshold"], {}


def catalog_listing() -> str:
    return "\n".join(f"  {name}: {w.claim}" for name, w in sorted(CATALOG.items()))

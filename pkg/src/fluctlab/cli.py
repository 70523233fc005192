"""Command-line front end: series dumps, witnesses, recurrence trajectories,
martingale tail fractions and box-kernel convolution ratios.

Every option can also come from ``--config FILE`` (a JSON object keyed by the
long option names, dashes or underscores). Command-line flags win over the
file. Exit codes: 0 pass, 1 claim failed, 2 usage or config error, 3 capacity.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from . import __version__
from .averaging import (MovingParams, SignSkew, SkewPoint, binomial_series, cesaro_at,
                        cesaro_series, moving_average_series, ud_series, van_der_corput_points,
                        weyl_points)
from .convolution import (BoxKernel, LineFn, StackSchedule, convolve_box, l1_distance,
                          rademacher_stack, ratio_csv, ratio_series, square_wave)
from .errors import CapacityError, ConfigError, FluctlabError
from .indexseq import IndexSequence
from .martingale import (rademacher_partial, rademacher_sum, tail_fluctuation_fraction,
                         tail_fraction_grid)
from .recurrence import ArcSet, check_complete_recurrence, gen_sequence, self_intersection_set
from .torus import Rotation, build_descending_return_indices
from .witnesses import (CATALOG, catalog_listing, merged_config, parse_alpha, parse_fraction,
                        parse_observable, parse_point, run_witness)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---- config merging ---------------------------------------------------------

DEFAULTS: dict[str, dict[str, Any]] = {
    "series": {"op": "cesaro", "system": "rotation", "alpha": "golden", "f": None, "N": 1000,
               "x0": "0", "layer": 0, "exact": "auto",
               "seq": "Squares", "seq_params": {}, "count": 100, "starts": None, "step": 10,
               "windows": 100, "lengths": None, "points": "weyl", "theta": "golden",
               "csv": None, "json": None},
    "recurrence": {"alpha": "golden", "seq": "Squares", "seq_params": {}, "arc": [["0", "0.1"]],
                   "L": 1, "budget": 100000, "further": 0, "arc_length": "0.1",
                   "n_max": 1200000, "expect": None, "csv": None, "json": None},
    "martingale": {"op": "tail", "N0": 0, "N": 2, "cells": None, "equals": None,
                   "at_least": None, "csv": None, "json": None},
    "convolve": {"f": "squarewave", "period": "1/10000", "height": "1", "interval": ["0", "1"],
                 "amplitudes": ["1/2", "1/4"], "digits": [4, 10], "stack_kernels": [16, 1024],
                 "kernels": "1-10", "eps": "reciprocal", "x": None, "samples": 0, "seed": 0,
                 "l1": False, "dump": None, "csv": None, "json": None},
}


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _merge(command: str, args: argparse.Namespace, doc: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    for key, value in doc.items():
        k = key.replace("-", "_")
        if k == "command":
            if value != command:
                raise ConfigError(f"config is for command {value!r}, not {command!r}")
            continue
        if k not in cfg:
            raise ConfigError(f"config field {key!r} is not an option of {command!r} "
                              f"(known: {', '.join(sorted(cfg))})")
        cfg[k] = value
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _int(cfg: dict, key: str, minimum: Optional[int] = None) -> int:
    try:
        v = int(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} must be an integer, got {cfg[key]!r}") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"field {key!r} must be >= {minimum}, got {v}")
    return v


def _int_list(value) -> list[int]:
    """``"1-10"``, ``"1,2,5"`` or a JSON list."""
    if isinstance(value, list):
        return [int(v) for v in value]
    text = str(value).strip()
    try:
        if "-" in text and "," not in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot read integer list {value!r}") from None


def _json_field(value, key: str):
    if isinstance(value, str):
        try:
            return json.loads(value)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"field {key!r}: {exc.msg} at column {exc.colno}") from None
    return value


def _emit(path: Optional[str], text: str) -> None:
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def _header(cfg: dict, command: str) -> str:
    echo = json.dumps({"command": command, "config": cfg, "version": __version__}, sort_keys=True)
    return f"# fluctlab {echo}\n"


def _document(command: str, cfg: dict, result: dict) -> str:
    return json.dumps({"command": command, "config": cfg, "version": __version__,
                       "result": result}, sort_keys=True, indent=1) + "\n"


# ---- series -----------------------------------------------------------------

def _index_sequence(cfg: dict, rot: Optional[Rotation]) -> IndexSequence:
    kind, count = cfg["seq"], _int(cfg, "count", 1)
    if kind == "DescendingReturns":
        if rot is None:
            raise ConfigError("DescendingReturns needs the rotation system")
        return build_descending_return_indices(rot, count)
    return gen_sequence(kind, _json_field(cfg["seq_params"], "seq_params"), count)


def cmd_series(cfg: dict) -> int:
    op = cfg["op"]
    if cfg["f"] is None:
        # the sign-skew identity f o T = -f needs a rotation-invariant, i.e. constant, g
        cfg["f"] = ({"preset": "constant", "params": {"value": 1}} if cfg["system"] == "signskew"
                    else "preset:halfindicator")
    f = parse_observable(cfg["f"])
    n_max = _int(cfg, "N", 1)
    exact = {"auto": None, "true": True, "false": False}.get(str(cfg["exact"]).lower())
    rot = Rotation(parse_alpha(cfg["alpha"]))
    x = parse_point(cfg["x0"])
    if cfg["system"] == "rotation":
        system, x0 = rot, x
    elif cfg["system"] == "signskew":
        system, x0 = SignSkew(rot), SkewPoint(x, _int(cfg, "layer"))
    else:
        raise ConfigError(f"unknown system {cfg['system']!r} (rotation, signskew)")
    if op == "cesaro":
        series = cesaro_series(f, system, x0, n_max, exact)
    elif op == "subseq":
        idx = _index_sequence(cfg, rot)
        series = cesaro_at(f, system, x0, idx, exact)
    elif op == "moving":
        if cfg["starts"] is not None:
            starts = IndexSequence(tuple(_int_list(cfg["starts"])))
        else:
            step = _int(cfg, "step", 1)
            starts = IndexSequence(tuple(step * (i + 1) for i in range(_int(cfg, "windows", 1) + 1)))
        if cfg["lengths"] is not None:
            params = MovingParams(starts, tuple(_int_list(cfg["lengths"])))
        else:
            params = MovingParams.consecutive(starts)
        series = moving_average_series(f, system, x0, params, exact)
    elif op == "binomial":
        series = binomial_series(f, system, x0, n_max)
    elif op == "ud":
        theta = parse_alpha(cfg["theta"])
        if cfg["points"] == "weyl":
            pts = weyl_points(theta)
        elif cfg["points"] == "vdc":
            pts = van_der_corput_points()
        else:
            raise ConfigError(f"unknown point sequence {cfg['points']!r} (weyl, vdc)")
        series = ud_series(pts, f, n_max, exact)
    else:
        raise ConfigError(f"unknown operator {op!r} (cesaro, subseq, moving, binomial, ud)")
    csv_text = _header(cfg, "series") + series.to_csv()
    if cfg["csv"] is None and cfg["json"] is None:
        sys.stdout.write(csv_text)
    _emit(cfg["csv"], csv_text)
    _emit(cfg["json"], _document("series", cfg, series.to_json_obj()))
    return EXIT_PASS


# ---- witness ----------------------------------------------------------------

def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_witness(args: argparse.Namespace, extra: list[str]) -> int:
    doc = _load_config(args.config)
    name = args.name or doc.get("witness")
    if name not in CATALOG:
        head = "no witness named" if name is None else f"unknown witness {name!r}"
        sys.stderr.write(f"{head}; catalog:\n{catalog_listing()}\n")
        return EXIT_USAGE
    unknown = set(doc) - {"witness", "seed", "parameters", "command"}
    if unknown:
        raise ConfigError(f"witness config: unknown top-level fields {sorted(unknown)} "
                          "(expected witness, seed, parameters)")
    params = dict(doc.get("parameters", {}))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        params[key] = _coerce(value)
    it = iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise UsageError(f"unexpected argument {token!r}")
        key, sep, value = token[2:].partition("=")
        if not sep:
            value = next(it, None)
            if value is None:
                raise UsageError(f"option {token} needs a value")
        params[key.replace("-", "_")] = _coerce(value)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    merged_config(name, params)
    report = run_witness(name, params, seed)
    _emit(args.report, report.to_json())
    _emit(args.samples, report.samples_csv())
    stream = sys.stderr if "-" in (args.report, args.samples) else sys.stdout
    print(report.verdict_line(), file=stream)
    return EXIT_PASS if report.ok else EXIT_FAIL


# ---- recurrence -------------------------------------------------------------

def cmd_recurrence(cfg: dict) -> int:
    alpha = parse_alpha(cfg["alpha"])
    L, budget, further = _int(cfg, "L", 1), _int(cfg, "budget", 0), _int(cfg, "further", 0)
    arcs = _json_field(cfg["arc"], "arc")
    if arcs and not isinstance(arcs[0], list):
        arcs = [arcs]
    try:
        E = ArcSet.from_arcs([tuple(a) for a in arcs])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'arc': {exc}") from None
    need = L + budget + further
    if cfg["seq"] == "SelfIntersection":
        idx = self_intersection_set(parse_fraction(cfg["arc_length"]), alpha, _int(cfg, "n_max", 1))
    elif cfg["seq"] == "DescendingReturns":
        idx = build_descending_return_indices(Rotation(alpha), need)
    else:
        idx = gen_sequence(cfg["seq"], _json_field(cfg["seq_params"], "seq_params"), need)
    if len(idx) < need:
        raise ConfigError(f"sequence has {len(idx)} terms but L + budget + further = {need}; "
                          "raise n_max or lower the budget")
    traj = check_complete_recurrence(alpha, E, idx, L, budget + further,
                                     stop_when_reached=True)
    at_budget = traj.covered[min(budget, len(traj.covered) - 1)]
    final = traj.covered[-1]
    verdict = "reaches" if traj.reached else "plateaus"
    result = {"verdict": verdict, "reached_at": traj.reached_at, "shifts": len(traj.covered),
              "measure_at_budget": repr(at_budget / 2**64), "final_measure": repr(final / 2**64),
              "final_measure_exact": str(traj.final()),
              "growth_after_budget": repr((final - at_budget) / 2**64),
              "sequence": idx.kind, "arc_measure": str(E.measure())}
    _emit(cfg["csv"], _header(cfg, "recurrence") + traj.to_csv())
    _emit(cfg["json"], _document("recurrence", cfg, result))
    stream = sys.stderr if "-" in (cfg["csv"], cfg["json"]) else sys.stdout
    print(f"recurrence: {verdict} (measure {float(traj.final()):.10g} after "
          f"{len(traj.covered)} shifts)", file=stream)
    if cfg["expect"] is not None and cfg["expect"] != verdict:
        return EXIT_FAIL
    return EXIT_PASS


# ---- martingale -------------------------------------------------------------

def cmd_martingale(cfg: dict) -> int:
    op = cfg["op"]
    if op != "grid" and cfg["csv"] is not None:
        raise ConfigError("martingale --csv is only produced by the grid op")
    out = sys.stderr if "-" in (cfg["csv"], cfg["json"]) else sys.stdout
    if op == "tail":
        q = tail_fluctuation_fraction(_int(cfg, "N0", 0), _int(cfg, "N", 0))
        result = {"N0": int(cfg["N0"]), "N": int(cfg["N"]), "fraction": str(q),
                  "fraction_float": float(q)}
        ok = True
        if cfg["equals"] is not None:
            ok &= q == parse_fraction(cfg["equals"])
        if cfg["at_least"] is not None:
            ok &= q >= parse_fraction(cfg["at_least"])
        print(f"tail fraction ({cfg['N0']}, {cfg['N']}) = {q} ~ {float(q):.6f}: "
              f"{'pass' if ok else 'FAIL'}", file=out)
    elif op == "grid":
        cells = _json_field(cfg["cells"], "cells") or []
        rows = [{"N0": int(a), "N": int(b), "fraction": str(q), "fraction_float": float(q)}
                for a, b in cells for q in [tail_fluctuation_fraction(int(a), int(b))]]
        result, ok = {"cells": rows}, True
        _emit(cfg["csv"], _header(cfg, "martingale") + tail_fraction_grid(
            (r["N0"], r["N"]) for r in rows))
        for r in rows:
            print(f"tail fraction ({r['N0']}, {r['N']}) = {r['fraction']}", file=out)
    elif op == "condexp":
        N = _int(cfg, "N", 0)
        S = rademacher_sum(N)
        ok = all(S.condexp(n) == rademacher_partial(n) for n in range(N + 1))
        result = {"N": N, "identity_holds": ok}
        print(f"conditional expectation identity up to N={N}: {'pass' if ok else 'FAIL'}",
              file=out)
    else:
        raise ConfigError(f"unknown martingale op {op!r} (tail, grid, condexp)")
    _emit(cfg["json"], _document("martingale", cfg, result))
    return EXIT_PASS if ok else EXIT_FAIL


# ---- convolution ------------------------------------------------------------

def _line_function(cfg: dict) -> LineFn:
    lo, hi = (parse_fraction(v) for v in cfg["interval"])
    kind = cfg["f"]
    if kind == "squarewave":
        return square_wave(parse_fraction(cfg["period"]), parse_fraction(cfg["height"]), lo, hi)
    if kind == "rademacherstack":
        sched = StackSchedule(tuple(parse_fraction(a) for a in cfg["amplitudes"]),
                              tuple(int(m) for m in cfg["digits"]),
                              tuple(int(n) for n in cfg["stack_kernels"]), Fraction(2), lo, hi)
        return rademacher_stack(sched)
    if kind == "indicator":
        return LineFn.from_pieces(lo, hi, [lo], [1])
    raise ConfigError(f"unknown line function {kind!r} (squarewave, rademacherstack, indicator)")


def cmd_convolve(cfg: dict) -> int:
    f = _line_function(cfg)
    kernels = [BoxKernel(n) for n in _int_list(cfg["kernels"])]
    if cfg["eps"] == "reciprocal":
        eps = [Fraction(1, k.n) for k in kernels]
    else:
        eps = [parse_fraction(e) for e in _json_field(cfg["eps"], "eps")]
    xs = [parse_fraction(v) for v in (_json_field(cfg["x"], "x") or [])]
    count = _int(cfg, "samples", 0)
    if count:
        rng = np.random.default_rng(_int(cfg, "seed", 0))
        xs += [f.lo + (f.hi - f.lo) * Fraction(int(rng.integers(0, 1 << 53)), 1 << 53)
               for _ in range(count)]
    rows = [(k.n, x, r) for x in xs for k, r in zip(kernels, ratio_series(f, kernels, eps, x))]
    result: dict[str, Any] = {"points": len(xs), "kernels": [k.n for k in kernels]}
    if cfg["l1"]:
        unit = LineFn.from_pieces(0, 1, [0], [1])
        result["l1_unit_indicator"] = {str(k.n): str(l1_distance(convolve_box(unit, k), unit))
                                       for k in kernels}
    if cfg["dump"] is not None:
        result["convolution"] = convolve_box(f, BoxKernel(int(cfg["dump"]))).to_json_obj()
    text = _header(cfg, "convolve") + ratio_csv(rows)
    if cfg["csv"] is None and cfg["json"] is None:
        sys.stdout.write(text)
    _emit(cfg["csv"], text)
    _emit(cfg["json"], _document("convolve", cfg, result))
    return EXIT_PASS


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fluctlab", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"fluctlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("series", help="dump an average series as CSV/JSON")
    s.add_argument("--op", choices=["cesaro", "subseq", "moving", "binomial", "ud"])
    s.add_argument("--system", choices=["rotation", "signskew"])
    s.add_argument("--alpha", help="decimal, 'golden' or CF list like [1,2,2]")
    s.add_argument("--f", help="'preset:NAME' or inline function JSON (default: halfindicator, "
                   "constant 1 on the sign-skew system)")
    s.add_argument("--N", type=int, help="horizon")
    s.add_argument("--x0")
    s.add_argument("--layer", type=int, help="sign-skew layer 0 or 1")
    s.add_argument("--exact", choices=["auto", "true", "false"])
    s.add_argument("--seq", help="index sequence kind for subseq")
    s.add_argument("--seq-params", dest="seq_params", help="JSON object of sequence parameters")
    s.add_argument("--count", type=int, help="number of sequence terms")
    s.add_argument("--starts", help="window starts, e.g. 1,5,9")
    s.add_argument("--step", type=int, help="arithmetic window starts step")
    s.add_argument("--windows", type=int)
    s.add_argument("--lengths", help="window lengths, e.g. 4,4,8")
    s.add_argument("--points", choices=["weyl", "vdc"])
    s.add_argument("--theta")
    s.add_argument("--csv")
    s.add_argument("--json")

    w = sub.add_parser("witness", help="run a catalogued experiment")
    w.add_argument("name", nargs="?")
    w.add_argument("--seed", type=int)
    w.add_argument("--set", action="append", metavar="KEY=VALUE")
    w.add_argument("--report", help="report JSON path")
    w.add_argument("--samples", help="per-sample CSV path")

    r = sub.add_parser("recurrence", help="union-of-shifts measure trajectory")
    r.add_argument("--alpha")
    r.add_argument("--seq", help="sequence kind, SelfIntersection or DescendingReturns")
    r.add_argument("--seq-params", dest="seq_params")
    r.add_argument("--arc", nargs=2, action="append", metavar=("LO", "HI"))
    r.add_argument("--L", type=int)
    r.add_argument("--budget", type=int)
    r.add_argument("--further", type=int, help="extra shifts after the budget")
    r.add_argument("--arc-length", dest="arc_length")
    r.add_argument("--n-max", dest="n_max", type=int)
    r.add_argument("--expect", choices=["reaches", "plateaus"])
    r.add_argument("--csv")
    r.add_argument("--json")

    m = sub.add_parser("martingale", help="Rademacher tail fractions and identities")
    m.add_argument("--op", choices=["tail", "grid", "condexp"])
    m.add_argument("--N0", type=int)
    m.add_argument("--N", type=int)
    m.add_argument("--cells", help="JSON list of [N0, N] pairs")
    m.add_argument("--equals")
    m.add_argument("--at-least", dest="at_least")
    m.add_argument("--csv", help="grid op only")
    m.add_argument("--json")

    c = sub.add_parser("convolve", help="box-kernel ratio series on the line")
    c.add_argument("--f", choices=["squarewave", "rademacherstack", "indicator"])
    c.add_argument("--period")
    c.add_argument("--height")
    c.add_argument("--kernels", help="e.g. 1-10 or 1,2,4")
    c.add_argument("--eps", help="'reciprocal' or JSON list")
    c.add_argument("--x", help="JSON list of points")
    c.add_argument("--samples", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--l1", action="store_const", const=True)
    c.add_argument("--dump", type=int, help="include phi_n * f for this n in the JSON")
    c.add_argument("--csv")
    c.add_argument("--json")

    for sp in (s, w, r, m, c):
        sp.add_argument("--config", help="JSON document with the same fields")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if args.command == "witness":
            return cmd_witness(args, extra)
        if extra:
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
        cfg = _merge(args.command, args, _load_config(args.config))
        return {"series": cmd_series, "recurrence": cmd_recurrence,
                "martingale": cmd_martingale, "convolve": cmd_convolve}[args.command](cfg)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except CapacityError as exc:
        sys.stderr.write(f"capacity: {exc}\n")
        return EXIT_CAPACITY
    except (ConfigError, FluctlabError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

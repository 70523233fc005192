"""Acceptance criteria 1-10, each driven through the CLI with a committed config.

Every run happens twice; the written outputs must be byte-identical. One
PASS/FAIL line per criterion is printed (also shown in the pytest summary).
Run directly with ``python3 tests/test_acceptance.py`` for just the lines.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs" / "acceptance"

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # direct script run
    ACCEPTANCE_LINES = []

pytestmark = pytest.mark.acceptance


def cli(args: list[str]) -> tuple[int, float, str]:
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "fluctlab.cli", *args],
                          capture_output=True, text=True, cwd=ROOT)
    return proc.returncode, time.perf_counter() - start, proc.stdout + proc.stderr


def witness(config: str, tmp: Path) -> tuple[dict, float, bool, str]:
    """Run a witness config twice; return (report, first runtime, identical, output)."""
    outs = []
    for k in range(2):
        report, samples = tmp / f"report{k}.json", tmp / f"samples{k}.csv"
        code, secs, text = cli(["witness", "--config", str(CONFIGS / config),
                                "--report", str(report), "--samples", str(samples)])
        if code not in (0, 1):
            raise AssertionError(f"CLI error {code}: {text}")
        outs.append((report.read_bytes() + samples.read_bytes(), secs, text))
    same = outs[0][0] == outs[1][0]
    return json.loads((tmp / "report0.json").read_text()), outs[0][1], same, outs[0][2]


def record(number: int, ok: bool, text: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_01_barrier_non_fluctuation(tmp_path):
    rep, secs, same, _ = witness("c01_barrier.json", tmp_path)
    below = sum(s["below"] for s in rep["samples"])
    ok = rep["passed"] == rep["total"] == 100 and below == 0 and secs < 10 and same
    record(1, ok, f"below_count = 0 on {rep['passed']}/{rep['total']} preimage samples, "
                  f"N <= 1e5, {secs:.2f} s (limit 10 s), reproducible={same}")
    assert ok


def test_criterion_02_non_monotonicity(tmp_path):
    rep, secs, same, _ = witness("c02_nonmonotone.json", tmp_path)
    worst = min(min(s["strict_up"], s["strict_down"]) for s in rep["samples"])
    ok = rep["passed"] == rep["total"] == 100 and worst >= 10 and secs < 5 and same
    record(2, ok, f"strict_up, strict_down >= 10 on {rep['passed']}/{rep['total']} samples "
                  f"(min {worst}), N <= 1e4, {secs:.2f} s (limit 5 s), reproducible={same}")
    assert ok


def test_criterion_03_gap_events(tmp_path):
    rep, secs, same, _ = witness("c03_gap.json", tmp_path)
    gap = rep["checks"]["gap_constant"]
    ok = rep["passed"] >= 99 and rep["total"] == 100 and gap["delta"] == "1/2" \
        and gap["d"] == "1/12" and same
    record(3, ok, f"up and down gap events with d = {gap['d']} on {rep['passed']}/{rep['total']} "
                  f"samples, N <= 1e5 (need 99), {secs:.2f} s, reproducible={same}")
    assert ok


def test_criterion_04_monotone_subsequence(tmp_path):
    rep, secs, same, _ = witness("c04_monotone.json", tmp_path)
    hist = rep["checks"]["settling_histogram"]["counts"]
    reported = all("settling_index" in s for s in rep["samples"])
    ok = rep["passed"] >= 90 and rep["total"] == 100 and reported and secs < 5 and same
    record(4, ok, f"eventually strictly increasing on {rep['passed']}/{rep['total']} samples "
                  f"(need 90), settling indices {json.dumps(hist, sort_keys=True)}, "
                  f"{secs:.2f} s (limit 5 s), reproducible={same}")
    assert ok


def test_criterion_05_moving_average_identity(tmp_path):
    rep, secs, same, _ = witness("c05_moving.json", tmp_path)
    ident = rep["checks"]["identity"]
    ok = ident["ok"] and ident["cells"] == 10_000 and ident["worst_ulps"] <= 8 and secs < 10 and same
    record(5, ok, f"identity residual <= 8 ulp on {ident['cells']} random cells "
                  f"(worst {ident['worst_ulps']:.3g} ulp), {secs:.2f} s (limit 10 s), "
                  f"reproducible={same}")
    assert ok


def test_criterion_06_martingale_identities(tmp_path):
    rep, secs, same, _ = witness("c06_martingale.json", tmp_path)
    by = {}
    for s in rep["samples"]:
        by.setdefault(s["check"], []).append(s)
    condexp = all(s["verdict"] == "pass" for s in by["condexp_identity"])
    tower = all(s["verdict"] == "pass" for k in ("tower", "mean_preservation") for s in by[k])
    tails = {(s["N0"], s["N"]): s for s in by["tail_fraction"]}
    t02, t560 = tails[(0, 2)], tails[(5, 60)]
    ok = condexp and tower and t02["verdict"] == "pass" and t560["verdict"] == "pass" \
        and secs < 30 and same
    record(6, ok, f"condexp identity N <= 20: {condexp}; tower/mean on 1000 functions: {tower}; "
                  f"tail(0,2) = {t02['fraction']} (required 3/4); tail(5,60) = "
                  f"{t560['fraction_float']:.4f} (required >= 0.9); {secs:.2f} s (limit 30 s), "
                  f"reproducible={same}")
    assert ok


def test_criterion_07_convolution_gadget(tmp_path):
    rep, secs, same, _ = witness("c07_convolution.json", tmp_path)
    l1 = rep["checks"]["l1_identity"]
    ok = rep["pass_fraction"] >= 0.95 and rep["total"] == 1000 and l1["ok"] and secs < 5 and same
    record(7, ok, f"ratio_n >= n/2 for n = 1..10 at {rep['passed']}/{rep['total']} points "
                  f"(need 95%); L1 error = 1/n exactly: {l1['ok']}; {secs:.2f} s (limit 5 s), "
                  f"reproducible={same}")
    assert ok


def test_criterion_08_eigenvalue_minus_one(tmp_path):
    rep, secs, same, _ = witness("c08_eigenvalue.json", tmp_path)
    ok = rep["passed"] == rep["total"] == 64 and secs < 1 and same
    record(8, ok, f"Cesaro pattern and binomial zeros exact on {rep['passed']}/{rep['total']} "
                  f"grid samples, {secs:.2f} s (limit 1 s, whole CLI process), reproducible={same}")
    assert ok


def recurrence(config: str, tmp: Path) -> tuple[int, dict, float, bool]:
    # the outputs echo their own paths, so both runs write to the same files
    outs = []
    js, csv = tmp / "rec.json", tmp / "rec.csv"
    for _ in range(2):
        code, secs, text = cli(["recurrence", "--config", str(CONFIGS / config),
                                "--json", str(js), "--csv", str(csv)])
        if code not in (0, 1):
            raise AssertionError(f"CLI error {code}: {text}")
        outs.append((code, js.read_bytes() + csv.read_bytes(), secs))
    doc = json.loads(js.read_text())
    return outs[0][0], doc["result"], outs[0][2], outs[0][1] == outs[1][1]


def test_criterion_09_complete_recurrence(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    code_a, res_a, secs_a, same_a = recurrence("c09a_squares.json", tmp_path / "a")
    code_b, res_b, secs_b, same_b = recurrence("c09b_self_intersection.json", tmp_path / "b")
    plateau = float(res_b["final_measure"])
    ok = (code_a == 0 and res_a["verdict"] == "reaches" and res_a["reached_at"] < 100_000
          and code_b == 0 and res_b["verdict"] == "plateaus" and res_b["shifts"] == 200_001
          and plateau <= 0.95 and float(res_b["measure_at_budget"]) <= 0.95
          and secs_a + secs_b < 60 and same_a and same_b)
    record(9, ok, f"squares reach full measure after {res_a['reached_at']} shifts; "
                  f"self-intersection sequence plateaus at {plateau:.7f} (<= 0.95) through "
                  f"1e5 + 1e5 shifts; {secs_a + secs_b:.2f} s (limit 60 s), "
                  f"reproducible={same_a and same_b}")
    assert ok


def test_criterion_10_ud_dichotomy(tmp_path):
    rep, secs, same, _ = witness("c10_ud_dichotomy.json", tmp_path)
    flat_ok = all(s["flat_below"] == 0 for s in rep["samples"])
    inner_ok = all(s["interior_above"] > 0 and s["interior_below"] > 0 for s in rep["samples"])
    ok = rep["passed"] == rep["total"] == 3 and flat_ok and inner_ok and same
    record(10, ok, f"flat top at theta: all A_N >= 0 for N <= 1e5 ({flat_ok}); interior value: "
                   f"both signs by N = 1e4 ({inner_ok}); {rep['passed']}/{rep['total']} thetas, "
                   f"{secs:.2f} s, reproducible={same}")
    assert ok


if __name__ == "__main__":
    import tempfile

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            with tempfile.TemporaryDirectory() as d:
                try:
                    fn(Path(d))
                except AssertionError:
                    failures += 1
    sys.exit(1 if failures else 0)

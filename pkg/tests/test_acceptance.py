"""One line per acceptance criterion, printed as ``criterion N: PASS|FAIL ...``."""

import json
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odoprime.lab.cli import main
from odoprime.lab.config import ExperimentConfig
from odoprime.lab.experiments import run_experiment
from odoprime.measures import EmpiricalMeasure, kr_distance, kr_lp, metric, product_metric


def _say(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def _failed(rep):
    return [c["name"] for c in rep.checks if not c["passed"]]


def _run(name, **params):
    t0 = time.perf_counter()
    rep = run_experiment(name, ExperimentConfig(params=params))
    return rep, time.perf_counter() - t0


def test_criterion_1_oracle_equivalence(capsys):
    rep, dt = _run("oracle")
    ok = rep.passed and dt < 120
    rows = rep.tables["comparisons"]
    compared = sum(r["compared"] for r in rows)
    bad = sum(r["mismatches"] for r in rows)
    _say(capsys, 1, ok, f"{len(rows)} comparison groups, {compared} values compared, {bad} mismatches, "
                        f"{dt:.1f}s; failed={_failed(rep)}")
    assert ok


def test_criterion_2_same_hit(capsys):
    rep, _ = _run("same_hit")
    _say(capsys, 2, rep.passed, f"{rep.summary['cases']} (preset, l, i) cases, 100 points each, "
                                f"zero tolerance; failed={_failed(rep)}")
    assert rep.passed


def test_criterion_3_return_heights(capsys):
    rep, _ = _run("growth")
    s = rep.summary
    _say(capsys, 3, rep.passed,
         f"exact recurrence everywhere; literal a_(l+1) r_l - 1 exact wherever l and l+1 are off E; "
         f"{s['literal_skipped']} positions next to E or above an absorbing hole follow the block-count "
         f"form instead; {s['runs']} growth runs within 5%; failed={_failed(rep)}")
    assert rep.passed


def test_criterion_4_friends(capsys):
    rep, _ = _run("friends")
    rows = rep.tables["witnesses"]
    kinds = sorted({r["kind"] for r in rows})
    offs = sorted({int(o) for r in rows for o in r["offsets"]})
    _say(capsys, 4, rep.passed, f"{len(rows)} witnesses x {rows[0]['samples']} samples, kinds={kinds}, "
                                f"offsets seen={offs}; failed={_failed(rep)}")
    assert rep.passed


def _rand_measure(rng, pair):
    n = int(rng.integers(1, 9))
    shape = (n, 5, 2) if pair else (n, 5)
    return EmpiricalMeasure(rng.integers(0, 3, size=shape), rng.random(n) + 0.01)


def test_criterion_5_kr(capsys):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for pair in (False, True):
        for _ in range(100):
            a, b = _rand_measure(rng, pair), _rand_measure(rng, pair)
            worst = max(worst, abs(kr_distance(a, b) - kr_lp(a, b)))
    bad = 0
    for _ in range(1000):
        x, y, z = (tuple(rng.integers(0, 3, 6)) for _ in range(3))
        p, q, r = ((x, y), (y, z), (z, x))
        bad += not (metric(x, y) == metric(y, x) and (metric(x, y) == 0) == (x == y)
                    and metric(x, z) <= metric(x, y) + metric(y, z)
                    and product_metric(p, r) <= product_metric(p, q) + product_metric(q, r))
    ok = worst < 1e-9 and bad == 0
    _say(capsys, 5, ok, f"max |tree - LP| = {worst:.2e} over 200 instances (Y and YxY); "
                        f"axiom violations {bad}/1000")
    assert ok


def test_criterion_6_tower(capsys):
    rep, _ = _run("tower")
    rows = rep.tables["towers"]
    ratios = [(r["k"], str(r["ratio"]), str(r["closed_form"])) for r in rows]
    _say(capsys, 6, rep.passed, f"towers (k, ratio, 1 - 1/width) = {ratios}; failed={_failed(rep)}")
    assert rep.passed


def test_criterion_7_reduction(capsys):
    rep, _ = _run("reduction")
    _say(capsys, 7, rep.passed, f"{len(rep.tables['instances'])} instances, 10^4 samples; "
                                f"failed={_failed(rep)}")
    assert rep.passed


def test_criterion_8_barycenter(capsys):
    rep, dt = _run("barycenter")
    ratios = [round(r["ratio"], 3) for r in rep.tables["runs"]]
    ok = rep.passed and dt < 600
    _say(capsys, 8, ok, f"final/initial per seed = {ratios} (need <= 0.5), {dt:.1f}s; failed={_failed(rep)}")
    assert ok


def test_criterion_9_weak_mixing(capsys):
    rep, _ = _run("weak_mixing")
    steps = [(d["from"], d["to"], d["integral"], round(d["ratio"], 2)) for d in rep.tables["decay"]]
    _say(capsys, 9, rep.passed, f"decay (i, i', integral, ratio) = {steps}; failed={_failed(rep)}")
    assert rep.passed


def test_criterion_10_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"run{k}.json"
        code = main(["experiment", "poulsen", "--seed", "17", "--out", str(p)])
        outs.append((code, p.read_bytes()))
    ok = outs[0][0] == outs[1][0] == 0 and outs[0][1] == outs[1][1]
    h = json.loads(outs[0][1])["config_hash"][:12]
    _say(capsys, 10, ok, f"two runs of 'experiment poulsen --seed 17' byte-identical "
                         f"({len(outs[0][1])} bytes, config {h})")
    assert ok

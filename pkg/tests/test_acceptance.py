"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

HAMRGG_ACCEPT_TRIALS sets the trials per (n, k, p) group of the threshold
experiment (default 300). Summaries are written to HAMRGG_ACCEPT_OUT
(default ./acceptance_results).
"""
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest

from hamrgg import conn, forestpack, geom, harness, kdecomp, oracle
from hamrgg.harness import ExperimentConfig

from conftest import (decomposition_violation, hamiltonian_by_permutations, packing_violation,
                      random_graph)

OUT = Path(os.environ.get("HAMRGG_ACCEPT_OUT", "acceptance_results"))


@pytest.fixture
def report(capsys):
    def emit(num, ok, text):
        with capsys.disabled():
            print(f"\nCRITERION {num}: {'PASS' if ok else 'FAIL'} {text}", flush=True)
        assert ok, text
    return emit


def test_criterion_1_decomposition(report):
    t0 = time.perf_counter()
    bad = {}
    for k in range(1, 51):
        why = decomposition_violation(kdecomp.decompose(k))
        if why:
            bad[k] = why
    dt = time.perf_counter() - t0
    ok = not bad and dt < 5.0
    report(1, ok, f"k=1..50 all invariants hold ({len(bad)} violations: {bad or 'none'}) in {dt:.2f} s (< 5 s)")


def test_criterion_2_forest_packing(report):
    per_k = 1000
    t0 = time.perf_counter()
    failures, backtracks = [], 0
    js = {}
    for k in range(1, 13):
        rng = random.Random(1000 + k)
        js[k] = set()
        for i in range(per_k):
            j = i % k + 1
            inst = forestpack.random_instance(k, j, rng)
            js[k].add(j)
            try:
                pk = forestpack.pack(inst)
            except forestpack.ForestPackDefect as exc:
                # includes a tripped 2t+1 bound
                failures.append((k, j, i, str(exc).splitlines()[0]))
                continue
            why = packing_violation(inst, pk)
            if why:
                failures.append((k, j, i, why))
            backtracks += pk.backtracks
    dt = time.perf_counter() - t0
    all_j = all(js[k] == set(range(1, k + 1)) for k in js)
    ok = not failures and all_j and dt < 60.0
    report(2, ok, f"{per_k} instances per k=1..12, all j={all_j}, {len(failures)} failures"
                  f"{' first ' + str(failures[0]) if failures else ''}, {backtracks} backtracks, {dt:.1f} s (< 60 s)")


def test_criterion_3_thresholds_at_oracle_scale(report):
    trials = int(os.environ.get("HAMRGG_ACCEPT_TRIALS", "300"))
    OUT.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(n=(8, 10, 12, 14, 16), k=(1, 2, 3, 4), p=(1, 2, "inf"), trials=trials, seed=2024,
                           csv_path=str(OUT / "criterion3_trials.csv"),
                           json_path=str(OUT / "criterion3_summary.json"))
    records, summary = harness.run_experiment(cfg)
    groups = summary["groups"]
    a = all(g["mindeg_le_conn"] and g["mindeg_le_pack"] for g in groups)
    b = all(g["sharp_failures"] == 0 for g in groups)
    cex = sum(g["counterexamples"] for g in groups)
    cex_ok = sum(g["counterexamples_verified"] for g in groups)
    c = cex == cex_ok and all(g["conn_eq_pack"]["wilson95"] is not None for g in groups)
    enough = trials >= 300
    eq = sum(g["conn_eq_pack"]["count"] for g in groups)
    of = sum(g["conn_eq_pack"]["of"] for g in groups)
    lines = [f"  n={g['n']:2d} k={g['k']} p={g['p']:>3s}: r_conn=r_pack {g['conn_eq_pack']['count']}/"
             f"{g['conn_eq_pack']['of']} CI95 [{g['conn_eq_pack']['wilson95'][0]:.3f}, "
             f"{g['conn_eq_pack']['wilson95'][1]:.3f}]" for g in groups]
    print("\n".join(lines))
    ok = a and b and c and enough
    report(3, ok, f"{len(groups)} groups x {trials} trials: (a) ordering {a}, (b) sharpness {b}, "
                  f"(c) r_conn=r_pack in {eq}/{of}, {cex_ok}/{cex} counterexamples verified; "
                  f"{summary['seconds']:.0f} s; table in {OUT / 'criterion3_summary.json'}")


def test_criterion_4_builder_end_to_end(report):
    OUT.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(n=(20000,), k=(2, 3, 4), p=(2,), trials=20, seed=7, mode="builder",
                           csv_path=str(OUT / "criterion4_trials.csv"),
                           json_path=str(OUT / "criterion4_summary.json"))
    records, summary = harness.run_experiment(cfg)
    dt = summary["seconds"]
    bad = [r.builder for r in records
           if r.builder != "success" and (r.builder in ("", "unverified") or "defect" in r.builder
                                          or "spare-edges" in r.builder)]
    rates = {f"k={g['k']}": g["builder"]["outcomes"] for g in summary["groups"]}
    ok = not bad and len(records) == 60 and dt < 1800
    report(4, ok, f"n=20000 x 20 seeds: outcomes {rates}; {len(bad)} unnamed/defect failures; {dt:.0f} s (< 1800 s)")


def test_criterion_5_cross_oracle(report):
    rng = np.random.default_rng(55)
    conn_bad = ham_bad = 0
    for _ in range(500):
        n = int(rng.integers(2, 13))
        g = random_graph(n, float(rng.uniform(0.15, 0.95)), rng)
        kappa, _ = oracle.vertex_connectivity_exact(g)
        for k in range(1, n + 1):
            conn_bad += conn.is_k_connected(g, k)[0] != (n > k and kappa >= k)
    for _ in range(500):
        n = int(rng.integers(3, 10))
        g = random_graph(n, float(rng.uniform(0.2, 0.9)), rng)
        ham_bad += oracle.is_hamiltonian(g)[0] != hamiltonian_by_permutations(g)
    ok = conn_bad == 0 and ham_bad == 0
    report(5, ok, f"is_k_connected vs exact kappa on 500 graphs (n<=12): {conn_bad} disagreements; "
                  f"is_hamiltonian vs permutations on 500 graphs (n<=9): {ham_bad} disagreements")


def test_criterion_6_performance(report):
    n, k = 100_000, 2
    # compile the kernels outside the timed region
    warm = geom.generate_points(500, 2, seed=1)
    conn.threshold_radii(geom.edge_process(warm, cutoff=0.3), k)
    ps = geom.generate_points(n, 2, seed=6)
    cutoff = 2.0 * geom.connectivity_scale(n, k, 2)
    t0 = time.perf_counter()
    ep = geom.edge_process(ps, cutoff=cutoff)
    t_ep = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep = conn.threshold_radii(ep, k)
    t_thr = time.perf_counter() - t0
    ok = t_ep < 10.0 and t_thr < 120.0 and rep.conn_index is not None
    report(6, ok, f"n=1e5: edge_process(cutoff={cutoff:.4f}, {len(ep)} edges) {t_ep:.2f} s (< 10 s); "
                  f"threshold_radii k=2 {t_thr:.2f} s (< 120 s), r_conn={rep.conn_length:.5f}")

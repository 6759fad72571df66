"""Acceptance gate. Each test prints one ``CRITERION <id>: PASS|FAIL`` line.

Tolerances are the stated ones. Long-running criteria are marked ``slow``.
"""
import math
from pathlib import Path

import numpy as np
import pytest

import conftest
from forkjoin import ck
from forkjoin.analytics import occupancy_pmf, required_memory
from forkjoin.cli import main as cli_main
from forkjoin.des import simulate_from_times
from forkjoin.experiments import (FIG_PSI_B, PSI_STEP, TABLE3, SweepSpec, curve_argmax, delta_curves,
                                  in_region, psi_grid, region_cells, REGIONS, run_sweep,
                                  validate_occupancy_law)
from forkjoin.params import NetworkParams
from forkjoin.rng import RngStream
from forkjoin.stats import chi_square_exponential, lag1_student
from oracles import dense_stationary, k_max_scan


def report(capsys, cid, ok, detail):
    line = f"CRITERION {cid}: {'PASS' if ok else 'FAIL'} | {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_c1_occupancy_analytics(capsys):
    worst_norm = worst_mean = 0.0
    for rho in (0.1, 1.0, 5.0, 20.0):
        k = np.arange(int(rho + 40 * math.sqrt(rho) + 60))
        p = occupancy_pmf(rho, k)
        worst_norm = max(worst_norm, abs(p.sum() - 1))
        worst_mean = max(worst_mean, abs(np.dot(k, p) - rho))
    km, oracle = required_memory(2.0, 0.01), k_max_scan(2.0, 0.01)
    ok = worst_norm <= 1e-12 and worst_mean <= 1e-10 and km == oracle == 6
    report(capsys, 1, ok, f"max|sum-1|={worst_norm:.1e} max|mean-rho|={worst_mean:.1e} k_max={km} oracle={oracle}")


def test_c2_ck_solver(capsys):
    pairs = np.random.default_rng(20240501).uniform(0.05, 0.9, size=(10, 2))
    dense_err = geo_err = 0.0
    q = np.arange(201)
    for pa, pb in pairs:
        p = NetworkParams.from_loads(1.0, 1, 1, pa, pb)
        g = ck.solve_stationary(p, q_max=30, boundary_budget=None)
        dense_err = max(dense_err, np.max(np.abs(g.probs - dense_stationary(p.lam, p.mu_a, p.mu_b, 30))))
        g = ck.solve_stationary(p, q_max=200, boundary_budget=None)
        for branch, psi in (("a", pa), ("b", pb)):
            geo_err = max(geo_err, np.max(np.abs(ck.marginal_distribution(g, branch) - (1 - psi) * psi ** q)))
    ok = dense_err <= 1e-8 and geo_err <= 1e-6
    report(capsys, 2, ok, f"max per-state |iter-dense|={dense_err:.1e} (<=1e-8), max |marginal-geometric|={geo_err:.1e} (<=1e-6)")


@pytest.mark.slow
def test_c3_delta_sign_argmax_refinement(capsys):
    rows = delta_curves(FIG_PSI_B, psi_grid(PSI_STEP), refine=True)
    min_delta = min(r["delta_rel"] for r in rows)
    drift = max(abs(r["delta_rel"] - r["delta_rel_refined"]) for r in rows)
    arg = curve_argmax(rows)
    off = {pb: pa for pb, pa in arg.items() if abs(pa - pb) > PSI_STEP + 1e-9}
    ok = min_delta > 0 and not off and drift < 1e-6
    report(capsys, 3, ok, f"{len(rows)} cells, min dP/P={min_delta:.3e}, argmax {arg}, "
                          f"max refinement drift={drift:.1e} (<1e-6)")


@pytest.mark.slow
def test_c4_calibration(capsys):
    trials, n = 1000, 100_000
    chi_rej = st_rej = 0
    for seed in range(trials):
        x = RngStream(seed, "calibration").exponentials(1.0, n)
        chi_rej += chi_square_exponential(x, 1.0).rejected
        st_rej += lag1_student(x).rejected
    f_chi, f_st = chi_rej / trials, st_rej / trials
    ok = 0.003 <= f_chi <= 0.025 and 0.003 <= f_st <= 0.025
    report(capsys, 4, ok, f"rejection frequency chi2={f_chi:.3f} St={f_st:.3f} (band [0.003, 0.025])")


def _table3_sweep(rows):
    spec = SweepSpec(cells=tuple(r[:5] for r in rows), jobs=100_000, seeds=tuple(range(10)))
    return run_sweep(spec).rows


@pytest.mark.slow
def test_c5a_table3_rejected_row(capsys):
    row = next(r for r in TABLE3 if r[1] == 1 and r[3] == r[4] == 0.375)
    res = [r for r in _table3_sweep([row]) if r["flow"] == "in"]
    rejected = sum(r["verdict"] == "reject" for r in res)
    report(capsys, "5a", rejected >= 8, f"N=1 psi=0.375 in-flow rejected in {rejected}/10 seeds (need >=8)")


@pytest.mark.slow
def test_c5b_table3_large_n_rows(capsys):
    rows = [r for r in TABLE3 if r[1] == r[2] == 8]
    res = _table3_sweep(rows)
    parts, ok = [], True
    for row in rows:
        for flow in ("in", "out"):
            sel = [r for r in res if (r["psi_a"], r["psi_b"], r["flow"]) == (row[3], row[4], flow)]
            acc = sum(r["verdict"] == "accept" for r in sel)
            ok &= acc >= 8
            parts.append(f"({row[3]},{row[4]}){flow}={acc}")
    report(capsys, "5b", ok, "N=8 accepts per 10 seeds: " + " ".join(parts) + " (need >=8 each)")


def _region_map(jobs, seed=0):
    band = [(0.3, 1, 1, pa, pa) for pa in psi_grid(PSI_STEP) if 0.35 - 1e-9 <= pa <= 0.65 + 1e-9]
    cells = sorted(set(region_cells("in")) | set(region_cells("out")) | set(band))
    spec = SweepSpec(cells=tuple(cells), jobs=jobs, seeds=(seed,), per_cell_seeds=True)
    rows = run_sweep(spec).rows
    box = {}
    for flow in ("in", "out"):
        for i, reg in enumerate(REGIONS[flow]):
            sel = [r for r in rows if r["flow"] == flow and reg.contains(r["n_a"], r["n_b"], r["psi_a"], r["psi_b"])]
            box[f"{flow}{i + 1}"] = sum(r["verdict"] == "accept" for r in sel) / len(sel)
    overall = {}
    for flow in ("in", "out"):
        sel = [r for r in rows if r["flow"] == flow and in_region(flow, r["n_a"], r["n_b"], r["psi_a"], r["psi_b"])]
        overall[flow] = sum(r["verdict"] == "accept" for r in sel) / len(sel)
    band_rows = [r for r in rows if r["flow"] == "in" and r["n_a"] == r["n_b"] == 1
                 and r["psi_a"] == r["psi_b"] and 0.35 - 1e-9 <= r["psi_a"] <= 0.65 + 1e-9]
    band_acc = sum(r["verdict"] == "accept" for r in band_rows) / len(band_rows)
    return box, overall, band_acc, len(band_rows)


def _c6(capsys, cid, jobs, need_in, max_band):
    box, overall, band_acc, nband = _region_map(jobs)
    ok = min(box.values()) >= need_in and band_acc <= max_band
    boxes = " ".join(f"{k}={v:.3f}" for k, v in box.items())
    report(capsys, cid, ok, f"{jobs} jobs: per-box acceptance {boxes} (need >={need_in}); overall in={overall['in']:.3f} "
                            f"out={overall['out']:.3f}; N=1 diagonal band in-accept={band_acc:.3f} over {nband} cells "
                            f"(need <={max_band})")


@pytest.mark.slow
def test_c6_smoke_region_maps(capsys):
    _c6(capsys, "6-smoke", 10_000, 0.8, 0.5)


@pytest.mark.slow
def test_c6_full_region_maps(capsys):
    _c6(capsys, "6-full", 100_000, 0.9, 0.3)


@pytest.mark.slow
def test_c7_occupancy_law(capsys):
    res = validate_occupancy_law(NetworkParams.from_loads(2.0, 8, 8, 0.5, 0.5), 100_000, range(10))
    acc = sum(r["accepted"] for r in res)
    little = max(r["little_rel_err"] for r in res)
    ok = acc >= 8 and little <= 0.03
    report(capsys, 7, ok, f"Poisson(lambda*T) accepted in {acc}/10 seeds (need >=8); max Little's-law error "
                          f"{little:.4f} (<=0.03)")


def test_c8_des_fixture(capsys):
    o = simulate_from_times([0.0, 1.0], [0.5, 0.2], [1.5, 0.3], 1, 1)
    traces = o.in_trace.tolist() == [0.5, 1.2] and o.out_trace.tolist() == [1.5, 1.8]
    s = o.sojourn_samples.tolist()
    # the second sojourn is 1.8 - 1.2 evaluated in binary64
    exact = s == [1.5 - 0.5, 1.8 - 1.2]
    report(capsys, 8, traces and exact,
           f"in={o.in_trace.tolist()} out={o.out_trace.tolist()} sojourns={s}; sojourns equal out-in in binary64 "
           f"(literal 0.6 is {abs(s[1] - 0.6) / math.ulp(0.6):.0f} ulp away)")


def test_c9_cli_determinism(tmp_path, capsys):
    sim = ["simulate", "--lambda", "0.3", "--n-a", "1", "--mu-a", "0.8", "--n-b", "1", "--mu-b", "0.8",
           "--jobs", "100000", "--seed", "7"]
    sweep = ["sweep", "--preset", "table3", "--jobs", "10000", "--seeds", "0,1", "--workers", "2"]
    same = []
    for name, argv in (("simulate", sim), ("sweep", sweep)):
        a, b, c = tmp_path / f"{name}-a", tmp_path / f"{name}-b", tmp_path / f"{name}-m"
        assert cli_main(argv + ["--out-dir", str(a)]) == 0
        assert cli_main(argv + ["--out-dir", str(b)]) == 0
        assert cli_main(["--from-manifest", str(a / "manifest.json"), "--out-dir", str(c)]) == 0
        files = lambda d: {p.name: p.read_bytes() for p in sorted(Path(d).iterdir())}  # noqa: E731
        same.append(files(a) == files(b) == files(c) and len(files(a)) >= 3)
    capsys.readouterr()
    report(capsys, 9, all(same), f"simulate identical={same[0]} sweep identical={same[1]} (repeat and manifest re-run)")

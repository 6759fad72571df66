"""Parameter sweeps over the network and the reference data they are compared to."""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as chi2_dist

from . import ck
from .analytics import OccupancyModel, occupancy_pmf, poisson_tail
from .des import extract_intervals, mean_sojourn, run_simulation
from .errors import ForkJoinError
from .params import NetworkParams, validate_params
from .stats import ALPHA, classify_almost_poisson

PSI_STEP = 0.05
# arrival rate used for each channel-count block
BLOCK_LAMBDA = ((2, 0.3), (5, 1.5), (math.inf, 2.0))
# finite stand-ins for the open channel range [6, inf)
LARGE_N = (6, 8, 12)


def block_lambda(n_a: int, n_b: int) -> float:
    n = max(n_a, n_b)
    for upper, lam in BLOCK_LAMBDA:
        if n <= upper:
            return lam
    raise AssertionError


# --- region tables -------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = True

    def __contains__(self, x: float) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below


def _iv(text: str) -> tuple[Interval, ...]:
    """Parse ``"(0, 0.2] u [0.75, 1)"`` style interval unions."""
    parts = []
    for piece in text.split("u"):
        piece = piece.strip()
        lo, hi = (float(v) for v in piece[1:-1].split(","))
        parts.append(Interval(lo, hi, piece[0] == "[", piece[-1] == "]"))
    return tuple(parts)


@dataclass(frozen=True)
class RegionRow:
    n_a: tuple
    n_b: tuple
    psi_a: tuple
    psi_b: tuple
    min_gap: float = 0.0  # required |psi_a - psi_b|

    def contains(self, n_a, n_b, psi_a, psi_b) -> bool:
        return (n_a in self.n_a and n_b in self.n_b
                and any(psi_a in i for i in self.psi_a)
                and any(psi_b in i for i in self.psi_b)
                and abs(psi_a - psi_b) >= self.min_gap - 1e-9)


SMALL, MID, LARGE = (1, 2), (3, 4, 5), LARGE_N

IN_REGIONS = (
    RegionRow(SMALL, SMALL, _iv("(0, 0.2] u [0.75, 1)"), _iv("(0, 0.2]")),
    RegionRow(SMALL, SMALL, _iv("(0, 0.2]"), _iv("(0, 0.2] u [0.75, 1)")),
    RegionRow(MID, MID, _iv("(0, 0.75]"), _iv("(0, 1)")),
    RegionRow(MID, MID, _iv("(0, 1)"), _iv("(0, 0.75]")),
    RegionRow(LARGE, LARGE, _iv("(0, 1)"), _iv("(0, 1)")),
)

OUT_REGIONS = (
    RegionRow(SMALL, SMALL, _iv("(0, 0.2] u [0.75, 1)"), _iv("(0, 0.2]"), min_gap=0.1),
    RegionRow(SMALL, SMALL, _iv("(0, 0.2]"), _iv("(0, 0.2] u [0.75, 1)"), min_gap=0.1),
    RegionRow(MID, MID, _iv("(0, 0.75]"), _iv("(0, 1)")),
    RegionRow(MID, MID, _iv("(0, 1)"), _iv("(0, 0.75]")),
    RegionRow(LARGE, LARGE, _iv("(0, 1)"), _iv("(0, 1)")),
)

REGIONS = {"in": IN_REGIONS, "out": OUT_REGIONS}

# (lambda, n_a, n_b, psi_a, psi_b, in chi2, in St, out chi2, out St) as published
TABLE3 = (
    (0.3, 1, 1, 0.75, 0.75, 167, 1.86, 192, 0.46),
    (0.3, 1, 1, 0.75, 0.5, 130, 0.53, 118, 2.32),
    (0.3, 1, 1, 0.75, 0.25, 61, 2.02, 56.3, 2.08),
    (0.3, 1, 1, 0.75, 0.2, 46, 1.89, 43.3, 2.12),
    (0.3, 1, 1, 0.1, 0.2, 35, 2.09, 49.2, 1.83),
    (0.3, 1, 1, 0.1, 0.1, 46.6, 1.80, 55.4, 1.98),
    (0.3, 1, 1, 0.375, 0.375, 110, 2.36, 212.3, 1.5),
    (1.5, 3, 5, 0.83, 0.3, 30, 0.30, 37.82, 0.56),
    (1.5, 3, 5, 0.91, 0.6, 44.2, 1.57, 31.33, 2.20),
    (1.5, 3, 5, 0.83, 0.75, 51.9, 3.42, 60.02, 3.26),
    (1.5, 3, 5, 0.83, 0.83, 54.5, 3.04, 74.13, 3.53),
    (1.5, 3, 5, 0.625, 0.6, 45, 1.38, 48.47, 2.17),
    (1.5, 3, 5, 0.5, 0.5, 42.3, 1.07, 23.07, 2.17),
    (1.5, 3, 5, 0.25, 0.25, 30, 1.68, 19.17, 0.45),
    (2.0, 8, 8, 0.5, 0.36, 33.3, 0.28, 33.56, 0.28),
    (2.0, 8, 8, 0.83, 0.625, 31.75, 2.09, 24.07, 2.07),
    (2.0, 8, 8, 0.93, 0.71, 35.15, 1.95, 28.20, 1.92),
    (2.0, 8, 8, 0.83, 0.83, 25.4, 1.89, 45.39, 2.05),
    (2.0, 8, 8, 0.9, 0.93, 32.7, 2.20, 48.26, 0.65),
    (2.0, 8, 8, 0.42, 0.83, 30.5, 0.20, 38.78, 2.17),
)


def psi_grid(step: float = PSI_STEP) -> list[float]:
    n = int(round(1 / step))
    return [round(i * step, 10) for i in range(1, n)]


def region_cells(flow: str, step: float = PSI_STEP) -> list[tuple]:
    """Grid cells ``(lambda, n_a, n_b, psi_a, psi_b)`` inside any row of a region table."""
    rows = REGIONS[flow]
    ns = sorted({n for r in rows for n in r.n_a + r.n_b})
    grid = psi_grid(step)
    cells = []
    for n_a in ns:
        for n_b in ns:
            for pa in grid:
                for pb in grid:
                    if any(r.contains(n_a, n_b, pa, pb) for r in rows):
                        cells.append((block_lambda(n_a, n_b), n_a, n_b, pa, pb))
    return cells


def in_region(flow: str, n_a, n_b, psi_a, psi_b) -> bool:
    return any(r.contains(n_a, n_b, psi_a, psi_b) for r in REGIONS[flow])


# --- sweeps --------------------------------------------------------------

def cell_seed(master: int, cell: tuple) -> int:
    """Deterministic per-cell seed derived from a master seed and the cell key."""
    key = f"{int(master)}|" + "|".join(repr(float(v)) if isinstance(v, float) else str(v) for v in cell)
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


@dataclass(frozen=True)
class SweepSpec:
    cells: tuple  # of (lambda, n_a, n_b, psi_a, psi_b)
    jobs: int = 100_000
    seeds: tuple = (0,)
    flows: tuple = ("in", "out")
    warmup_fraction: float = 0.1
    per_cell_seeds: bool = False  # derive each run's seed from (seed, cell)

    def __post_init__(self):
        for c in self.cells:
            validate_params(NetworkParams.from_loads(*c))
        if not set(self.flows) <= {"in", "out"}:
            raise ValueError(f"flows must be drawn from 'in'/'out', got {self.flows}")

    def to_dict(self) -> dict:
        return {"cells": [list(c) for c in self.cells], "jobs": self.jobs, "seeds": list(self.seeds),
                "flows": list(self.flows), "warmup_fraction": self.warmup_fraction,
                "per_cell_seeds": self.per_cell_seeds}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        return cls(cells=tuple(tuple(c) for c in d["cells"]), jobs=int(d["jobs"]),
                   seeds=tuple(d["seeds"]), flows=tuple(d["flows"]),
                   warmup_fraction=float(d["warmup_fraction"]),
                   per_cell_seeds=bool(d.get("per_cell_seeds", False)))


REPORT_COLUMNS = ("n_a", "n_b", "psi_a", "psi_b", "seed", "flow", "chi2", "st", "verdict")


@dataclass
class RegionReport:
    rows: list = field(default_factory=list)

    def fraction_accepted(self, flow: str, predicate=None) -> float:
        sel = [r for r in self.rows if r["flow"] == flow and (predicate is None or predicate(r))]
        if not sel:
            return math.nan
        return sum(r["verdict"] == "accept" for r in sel) / len(sel)

    def summary(self) -> dict:
        out = {"rows": len(self.rows)}
        for flow in ("in", "out"):
            sel = [r for r in self.rows if r["flow"] == flow]
            if not sel:
                continue
            inside = [r for r in sel if in_region(flow, r["n_a"], r["n_b"], r["psi_a"], r["psi_b"])]
            out[flow] = {
                "cells": len(sel),
                "accepted_fraction": self.fraction_accepted(flow),
                "in_region_cells": len(inside),
                "in_region_accepted_fraction": (sum(r["verdict"] == "accept" for r in inside) / len(inside)
                                                if inside else None),
                "errors": sum(r["verdict"] == "error" for r in sel),
            }
        return out


def _run_cell(args):
    cell, seed, spec = args
    lam, n_a, n_b, pa, pb = cell
    run_seed = cell_seed(seed, cell) if spec.per_cell_seeds else seed
    rows = []
    base = {"lambda": lam, "n_a": n_a, "n_b": n_b, "psi_a": pa, "psi_b": pb, "seed": run_seed}
    try:
        o = run_simulation(NetworkParams.from_loads(lam, n_a, n_b, pa, pb), spec.jobs, run_seed,
                           spec.warmup_fraction)
    except ForkJoinError as exc:
        return [{**base, "flow": f, "chi2": math.nan, "st": math.nan, "verdict": "error",
                 "error": str(exc)} for f in spec.flows]
    for flow in spec.flows:
        trace = o.in_trace if flow == "in" else o.out_trace
        try:
            v = classify_almost_poisson(extract_intervals(trace), lam)
            rows.append({**base, "flow": flow, "chi2": v.chi.statistic, "st": v.student.statistic,
                         "verdict": "accept" if v.almost_poisson else "reject"})
        except ForkJoinError as exc:
            rows.append({**base, "flow": flow, "chi2": math.nan, "st": math.nan, "verdict": "error",
                         "error": str(exc)})
    return rows


def _row_key(r):
    return (r["n_a"], r["n_b"], r["psi_a"], r["psi_b"], r["lambda"], r["seed"], r["flow"])


def run_sweep(spec: SweepSpec, workers: int = 1) -> RegionReport:
    """Simulate every (cell, seed) and classify the requested flows.

    Rows come back sorted by cell key and seed regardless of ``workers``.
    """
    tasks = [(c, s, spec) for c in spec.cells for s in spec.seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        chunks = [_run_cell(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=_row_key)
    return RegionReport(rows)


# --- conditional-rate curves --------------------------------------------

FIG_PSI_B = (0.05, 0.35, 0.65, 0.90)
CURVE_COLUMNS = ("psi_a", "psi_b", "delta_rel")


def delta_curves(psi_b_list=FIG_PSI_B, psi_a_grid=None, q_max: int | None = None,
                 tol: float = ck.DEFAULT_TOL, refine: bool = False) -> list[dict]:
    """Relative drop of the first-partner rate after a first-partner event.

    Uses ``N_a = N_b = 1`` and ``lambda = 1`` with the service rates set from
    the loads. With ``refine=True`` each point is re-solved on a grid twice as
    large (warm-started) and ``delta_rel_refined`` is added.
    """
    psi_a_grid = psi_grid() if psi_a_grid is None else list(psi_a_grid)
    out = []
    for pb in psi_b_list:
        for pa in psi_a_grid:
            p = NetworkParams.from_loads(1.0, 1, 1, pa, pb)
            g = ck.solve_stationary(p, q_max=q_max, tol=tol)
            row = {"psi_a": pa, "psi_b": pb, "delta_rel": ck.delta_p_relative(g, p), "q_max": g.q_max}
            if refine:
                q2 = 2 * g.q_max
                g2 = ck.solve_stationary(p, q_max=q2, tol=tol, start=ck._embed(g.probs, q2))
                row["delta_rel_refined"] = ck.delta_p_relative(g2, p)
            out.append(row)
    return out


def curve_argmax(rows: list[dict]) -> dict:
    """``psi_b -> psi_a`` at which each curve peaks."""
    best: dict = {}
    for r in rows:
        if r["psi_b"] not in best or r["delta_rel"] > best[r["psi_b"]][1]:
            best[r["psi_b"]] = (r["psi_a"], r["delta_rel"])
    return {pb: pa for pb, (pa, _) in best.items()}


# --- occupancy law -------------------------------------------------------

def occupancy_snapshots(o, spacing: float) -> np.ndarray:
    """Number of unmatched observed jobs at ``t_start + spacing * k``, k >= 1.

    Snapshots stop at the last first-partner event so the drain is excluded.
    """
    times = np.arange(o.t_start + spacing, o.in_trace[-1], spacing)
    return (np.searchsorted(o.in_trace, times, side="right")
            - np.searchsorted(o.out_trace, times, side="right"))


def pooled_chi_square(samples: np.ndarray, rho: float, min_expected: float = 5.0):
    """Chi-square of occupancy counts against Poisson(rho) with pooled cells.

    Adjacent values are merged left to right until each cell expects at least
    ``min_expected`` observations; the last cell is open-ended.
    Returns ``(statistic, cells)``.
    """
    n = len(samples)
    kmax = int(max(samples.max(), rho + 10 * math.sqrt(rho) + 10))
    probs = occupancy_pmf(OccupancyModel(rho), np.arange(kmax + 1))
    observed = np.bincount(samples, minlength=kmax + 1).astype(np.float64)
    groups, cur_p, cur_o = [], 0.0, 0.0
    for k in range(kmax + 1):
        cur_p += probs[k]
        cur_o += observed[k]
        if cur_p * n >= min_expected:
            groups.append([cur_p, cur_o])
            cur_p, cur_o = 0.0, 0.0
    tail_p = poisson_tail(rho, kmax)
    tail_o = cur_o
    if groups:
        groups[-1][0] += cur_p + tail_p
        groups[-1][1] += tail_o
    else:
        groups.append([1.0, float(n)])
    exp = np.array([g[0] for g in groups]) * n
    obs = np.array([g[1] for g in groups])
    return float(np.sum((obs - exp) ** 2 / exp)), len(groups)


def validate_occupancy_law(p: NetworkParams, jobs: int = 100_000, seeds=range(10),
                           warmup_fraction: float = 0.1, alpha: float = ALPHA,
                           spacing_quantile: float = 0.99) -> list[dict]:
    """Compare simulated synchronizer occupancy with Poisson(lambda * T).

    Occupancy is sampled on a regular grid whose spacing is the
    ``spacing_quantile`` quantile of the pair sojourn time, which keeps
    snapshots close to independent. One parameter (rho) is estimated, so the
    test uses ``cells - 2`` degrees of freedom.
    """
    validate_params(p)
    out = []
    for seed in seeds:
        o = run_simulation(p, jobs, seed, warmup_fraction)
        tbar = mean_sojourn(o)
        rho = p.lam * tbar
        spacing = float(np.quantile(o.sojourn_samples, spacing_quantile))
        snaps = occupancy_snapshots(o, spacing)
        stat, cells = pooled_chi_square(snaps, rho)
        dof = max(cells - 2, 1)
        threshold = float(chi2_dist.ppf(1 - alpha, dof))
        mean_occ = o.mean_occupancy
        out.append({
            "seed": seed, "mean_sojourn": tbar, "rho": rho, "mean_occupancy": mean_occ,
            "little_rel_err": abs(mean_occ - rho) / rho if rho > 0 else 0.0,
            "snapshots": len(snaps), "spacing": spacing, "chi2": stat, "dof": dof,
            "threshold": threshold, "accepted": stat <= threshold,
            "p_zero": float(o.occupancy_time[0] / o.total_sim_time),
        })
    return out

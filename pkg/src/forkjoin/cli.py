"""Command-line entry point.

Every artifact-producing subcommand writes a ``manifest.json`` next to its
outputs. ``forkjoin --from-manifest path/manifest.json`` re-runs the recorded
configuration and reproduces the outputs byte for byte. Without ``--out-dir``
outputs go to ``runs/<subcommand>-<hash>`` where the hash is taken over the
manifest content.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__, ck
from .analytics import min_total_memory, partition_memory, required_memory
from .des import extract_intervals, run_simulation
from .errors import ForkJoinError
from .experiments import (CURVE_COLUMNS, FIG_PSI_B, REPORT_COLUMNS, TABLE3, SweepSpec, delta_curves,
                          psi_grid, region_cells, run_sweep)
from .io import dumps_json, read_trace, write_csv, write_json, write_sim_output
from .params import load_config, params_from_mapping
from .stats import classify_almost_poisson


class UsageError(Exception):
    pass


def _add_param_flags(p: argparse.ArgumentParser, need_channels: bool = True) -> None:
    p.add_argument("--config", help="key=value file with lambda, n_a, n_b, mu_a, mu_b, seed")
    p.add_argument("--lambda", dest="lambda_", type=float)
    if need_channels:
        p.add_argument("--n-a", type=int)
        p.add_argument("--n-b", type=int)
    p.add_argument("--mu-a", type=float)
    p.add_argument("--mu-b", type=float)


def _resolve_params(args, need_channels: bool = True) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {"lambda": args.lambda_, "mu_a": args.mu_a, "mu_b": args.mu_b}
    if need_channels:
        flags.update(n_a=args.n_a, n_b=args.n_b)
    else:
        flags.update(n_a=1, n_b=1)
    if getattr(args, "seed", None) is not None:
        flags["seed"] = args.seed
    merged = {**cfg, **{k: v for k, v in flags.items() if v is not None}}
    missing = [k for k in ("lambda", "n_a", "n_b", "mu_a", "mu_b") if merged.get(k) is None]
    if missing:
        raise UsageError(f"missing parameters: {', '.join(missing)} (use flags or --config)")
    return merged


def _require_seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        raise UsageError("--seed (or seed= in --config) is required for stochastic commands")
    return int(cfg["seed"])


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


# --- resolve: argv -> config dict --------------------------------------

def resolve_simulate(args) -> dict:
    cfg = _resolve_params(args)
    seed = _require_seed(cfg)
    params_from_mapping(cfg)
    return {"params": {k: cfg[k] for k in ("lambda", "n_a", "n_b", "mu_a", "mu_b")},
            "seed": seed, "jobs": args.jobs, "warmup_fraction": args.warmup}


def resolve_solve_ck(args) -> dict:
    cfg = _resolve_params(args, need_channels=False)
    params_from_mapping(cfg)
    return {"params": {k: cfg[k] for k in ("lambda", "mu_a", "mu_b")}, "q_max": args.q_max,
            "tol": args.tol, "boundary_budget": args.boundary_budget}


def resolve_sweep(args) -> dict:
    if args.seed is None and args.seeds is None:
        raise UsageError("--seed or --seeds is required for sweep")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    if args.preset == "regions":
        cells = sorted(set(region_cells("in", args.psi_step)) | set(region_cells("out", args.psi_step)))
    elif args.preset == "table3":
        cells = [row[:5] for row in TABLE3]
    else:
        if None in (args.lambda_, args.n_a, args.n_b) or not args.psi_a or not args.psi_b:
            raise UsageError("custom sweep needs --lambda, --n-a, --n-b, --psi-a and --psi-b")
        cells = [(args.lambda_, args.n_a, args.n_b, pa, pb)
                 for pa in _parse_floats(args.psi_a) for pb in _parse_floats(args.psi_b)]
    flows = ["in", "out"] if args.flow == "both" else [args.flow]
    spec = SweepSpec(tuple(tuple(c) for c in cells), jobs=args.jobs, seeds=tuple(seeds), flows=tuple(flows),
                     warmup_fraction=args.warmup, per_cell_seeds=args.per_cell_seeds)
    return {"spec": spec.to_dict(), "workers": args.workers}


def resolve_curves(args) -> dict:
    psi_b = _parse_floats(args.psi_b) if args.psi_b else list(FIG_PSI_B)
    return {"psi_b": psi_b, "psi_a": psi_grid(args.psi_step), "q_max": args.q_max, "tol": args.tol,
            "refine": args.refine}


# --- execute: config dict -> files in out_dir ----------------------------

def execute_simulate(cfg: dict, out: Path) -> list[str]:
    p = params_from_mapping(cfg["params"])
    o = run_simulation(p, cfg["jobs"], cfg["seed"], cfg["warmup_fraction"])
    return write_sim_output(out, o)


def execute_solve_ck(cfg: dict, out: Path) -> list[str]:
    p = params_from_mapping({**cfg["params"], "n_a": 1, "n_b": 1})
    g = ck.solve_stationary(p, q_max=cfg["q_max"], tol=cfg["tol"], boundary_budget=cfg["boundary_budget"])
    write_csv(out / "grid.csv", ("q_a", "q_b", "prob"), ck.grid_rows(g))
    summary = {"q_max": g.q_max, "residual": g.residual, "mass_at_boundary": g.mass_at_boundary,
               "iterations": g.iterations, "psi_a": p.psi_a, "psi_b": p.psi_b,
               "conditional_rate": ck.conditional_rate(g, p), "delta_p_rel": ck.delta_p_relative(g, p)}
    write_json(out / "summary.json", summary)
    return ["grid.csv", "summary.json"]


def execute_sweep(cfg: dict, out: Path) -> list[str]:
    report = run_sweep(SweepSpec.from_dict(cfg["spec"]), workers=cfg.get("workers", 1))
    write_csv(out / "region_report.csv", REPORT_COLUMNS, ([r[c] for c in REPORT_COLUMNS] for r in report.rows))
    write_json(out / "summary.json", report.summary())
    return ["region_report.csv", "summary.json"]


def execute_curves(cfg: dict, out: Path) -> list[str]:
    rows = delta_curves(cfg["psi_b"], cfg["psi_a"], q_max=cfg["q_max"], tol=cfg["tol"], refine=cfg["refine"])
    cols = CURVE_COLUMNS + (("delta_rel_refined",) if cfg["refine"] else ())
    write_csv(out / "curves.csv", cols, ([r[c] for c in cols] for r in rows))
    return ["curves.csv"]


EXECUTORS = {"simulate": execute_simulate, "solve-ck": execute_solve_ck, "sweep": execute_sweep,
             "curves": execute_curves}
RESOLVERS = {"simulate": resolve_simulate, "solve-ck": resolve_solve_ck, "sweep": resolve_sweep,
             "curves": resolve_curves}


def manifest_for(subcommand: str, cfg: dict) -> dict:
    return {"tool": "forkjoin", "version": __version__, "subcommand": subcommand, "config": cfg}


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(dumps_json(manifest).encode()).hexdigest()[:16]


def run_manifest(manifest: dict, out_dir: str | None) -> dict:
    sub = manifest["subcommand"]
    if sub not in EXECUTORS:
        raise UsageError(f"manifest names unknown subcommand {sub!r}")
    out = Path(out_dir) if out_dir else Path("runs") / f"{sub}-{manifest_hash(manifest)}"
    out.mkdir(parents=True, exist_ok=True)
    files = EXECUTORS[sub](manifest["config"], out)
    write_json(out / "manifest.json", {**manifest, "outputs": files})
    return {"out_dir": str(out), "outputs": files + ["manifest.json"]}


# --- non-artifact commands -------------------------------------------------

def cmd_test_flow(args) -> dict:
    trace = read_trace(args.timestamps)
    verdict = classify_almost_poisson(extract_intervals(trace), args.rate)
    return verdict.to_dict()


def cmd_size_memory(args) -> dict:
    if (args.rho is None) == (args.sim_output is None):
        raise UsageError("give exactly one of --rho or --sim-output")
    if args.rho is not None:
        rho = args.rho
    else:
        summary = Path(args.sim_output)
        if summary.is_dir():
            summary = summary / "summary.json"
        rho = float(json.loads(summary.read_text())["rho"])
    result = {"rho": rho, "epsilon": args.epsilon, "k_max": required_memory(rho, args.epsilon)}
    have_params = any(v is not None for v in (args.config, args.lambda_, args.mu_a, args.mu_b, args.n_a, args.n_b))
    if args.m_max is not None or have_params:
        p = params_from_mapping(_resolve_params(args))
        if args.m_max is not None:
            result["plan"] = partition_memory(p, rho, args.m_max).to_dict()
        else:
            result["min_total_plan"] = min_total_memory(p, rho, args.epsilon).to_dict()
    return result


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forkjoin", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--from-manifest", help="re-run the configuration recorded in a manifest.json")
    ap.add_argument("--out-dir", help="output directory (default: runs/<subcommand>-<hash>)")
    sub = ap.add_subparsers(dest="command")

    s = sub.add_parser("simulate", help="simulate the network and record synchronizer flows")
    _add_param_flags(s)
    s.add_argument("--jobs", type=int, default=100_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--warmup", type=float, default=0.1, help="fraction of arrivals discarded (default 0.1)")
    s.add_argument("--out-dir", dest="sub_out_dir")

    s = sub.add_parser("solve-ck", help="stationary distribution of the single-channel branches")
    _add_param_flags(s, need_channels=False)
    s.add_argument("--q-max", type=int)
    s.add_argument("--tol", type=float, default=ck.DEFAULT_TOL)
    s.add_argument("--boundary-budget", type=float, default=ck.DEFAULT_BOUNDARY_BUDGET)
    s.add_argument("--out-dir", dest="sub_out_dir")

    s = sub.add_parser("test-flow", help="almost-Poisson verdict for a timestamp file")
    s.add_argument("--timestamps", required=True)
    s.add_argument("--rate", type=float, required=True)

    s = sub.add_parser("size-memory", help="synchronizer memory for a loss budget")
    s.add_argument("--rho", type=float)
    s.add_argument("--sim-output", help="simulate output directory or its summary.json")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--m-max", type=int)
    _add_param_flags(s)

    s = sub.add_parser("sweep", help="classify flows over a grid of network parameters")
    s.add_argument("--preset", choices=["regions", "table3", "custom"], default="custom")
    s.add_argument("--lambda", dest="lambda_", type=float)
    s.add_argument("--n-a", type=int)
    s.add_argument("--n-b", type=int)
    s.add_argument("--psi-a", help="comma-separated loads")
    s.add_argument("--psi-b", help="comma-separated loads")
    s.add_argument("--psi-step", type=float, default=0.05)
    s.add_argument("--jobs", type=int, default=100_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", help="comma-separated seeds")
    s.add_argument("--per-cell-seeds", action="store_true", help="derive each run's seed from (seed, cell)")
    s.add_argument("--flow", choices=["in", "out", "both"], default="both")
    s.add_argument("--warmup", type=float, default=0.1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-dir", dest="sub_out_dir")

    s = sub.add_parser("curves", help="relative first-partner rate drop over a load grid")
    s.add_argument("--psi-b", help="comma-separated loads of branch b (default 0.05,0.35,0.65,0.9)")
    s.add_argument("--psi-step", type=float, default=0.05)
    s.add_argument("--q-max", type=int)
    s.add_argument("--tol", type=float, default=ck.DEFAULT_TOL)
    s.add_argument("--refine", action="store_true", help="also solve on a doubled grid")
    s.add_argument("--out-dir", dest="sub_out_dir")
    return ap


def _fail(code: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.from_manifest:
            manifest = json.loads(Path(args.from_manifest).read_text())
            manifest.pop("outputs", None)
            result = run_manifest(manifest, args.out_dir)
        elif args.command is None:
            parser.print_usage(sys.stderr)
            return _fail("usage", "a subcommand or --from-manifest is required", 2)
        elif args.command == "test-flow":
            result = cmd_test_flow(args)
        elif args.command == "size-memory":
            result = cmd_size_memory(args)
        else:
            cfg = RESOLVERS[args.command](args)
            result = run_manifest(manifest_for(args.command, cfg), args.sub_out_dir or args.out_dir)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("usage", str(exc), 2)
    except ForkJoinError as exc:
        return _fail(exc.code, str(exc), 1)
    except (ValueError, OSError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    sys.stdout.write(dumps_json(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())

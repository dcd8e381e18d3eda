"""Command-line entry point: ``gabprate {analyze,solve,bounds,loops,treecheck,bench}``.

Exit codes: 0 success, 2 parse or config error, 3 numerical failure,
4 dominance precondition not met. Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import errors as err
from .bounds import enumerate_simple_loops
from .dominance import Classification, classify, spectral_certificate
from .experiment import BOUND_KINDS, SCALINGS, ExperimentConfig, load_system, resolve_scaling, run_experiment
from .solver import Termination
from .system import build_induced_graph
from .treecheck import build_unwrapped_tree, verify_root_equivalence, verify_tree_dominance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NOT_DOMINANT = 4

_CONFIG_ERRORS = (err.ParseError, err.ConfigError, err.TreeTooLarge, ValueError, OSError)
_DOMINANCE_ERRORS = (err.NotWeaklyDominant, err.NotGeneralizedDD, err.NonPositiveDiagonal, err.GenerationFailed)

# subcommand -> (default bounds, default jacobi)
_DEFAULTS = {
    "solve": ((), True),
    "bounds": (BOUND_KINDS, False),
    "bench": (("rho", "lambda_star"), True),
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, _DOMINANCE_ERRORS):
        return EXIT_NOT_DOMINANT
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def error_payload(exc: BaseException) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code_for(exc)}
    if isinstance(exc, err.ParseError) and exc.line is not None:
        payload["line"] = exc.line
    if isinstance(exc, err.NumericalFailure):
        payload["round"] = exc.round
        payload["edge"] = list(exc.edge)
    return payload


def _add_source(p):
    p.add_argument("--config", help="JSON experiment config; explicit flags override its values")
    p.add_argument("--input", help="Matrix Market coordinate file")
    p.add_argument("--rhs", help="right-hand side (Matrix Market array or JSON list)")
    p.add_argument("--generate", help="generator spec, e.g. 'tree:n=30' or 'example2'")
    p.add_argument("--seed", type=int)
    p.add_argument("--scaling", choices=SCALINGS)
    p.add_argument("--scaling-file", help="scaling vector used with --scaling file")


def _add_run(p):
    p.add_argument("--rounds", type=int)
    p.add_argument("--stop-tol", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--bounds", help=f"comma list drawn from {','.join(BOUND_KINDS)}, or 'none'")
    p.add_argument("--jacobi", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--fit-window", type=int, nargs=2, metavar=("FIRST", "LAST"))
    p.add_argument("--max-loops", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gabprate", description="Message-passing solver and convergence-rate bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="dominance report")
    _add_source(p)
    p.add_argument("--out", help="also write the report to this JSON file")

    for name, text in (("solve", "run the solver and write curves"), ("bounds", "solver run plus all bounds")):
        p = sub.add_parser(name, help=text)
        _add_source(p)
        _add_run(p)

    p = sub.add_parser("loops", help="enumerate simple loops and their gains")
    _add_source(p)
    p.add_argument("--max-loops", type=int, default=10**6)
    p.add_argument("--out", help="also write the report to this JSON file")

    p = sub.add_parser("treecheck", help="unwrapped-tree root equivalence and dominance inheritance")
    _add_source(p)
    p.add_argument("--root", type=int, default=0, help="0-based root node")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--out", help="also write the report to this JSON file")

    p = sub.add_parser("bench", help="the same experiment over many seeds")
    _add_source(p)
    _add_run(p)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.from_json(args.config).to_dict()
    else:
        bounds, jacobi = _DEFAULTS.get(args.command, (BOUND_KINDS, True))
        data.update(bounds=list(bounds), jacobi=jacobi)
    overrides = {
        "input": args.input,
        "generate": args.generate,
        "rhs": args.rhs,
        "seed": args.seed,
        "scaling": args.scaling,
        "scaling_file": args.scaling_file,
        "rounds": getattr(args, "rounds", None),
        "stop_tol": getattr(args, "stop_tol", None),
        "out": getattr(args, "out", None),
        "jacobi": getattr(args, "jacobi", None),
        "fit_window": getattr(args, "fit_window", None),
        "max_loops": getattr(args, "max_loops", None),
    }
    if args.input is not None:
        data.pop("generate", None)
    if args.generate is not None:
        data.pop("input", None)
    bounds = getattr(args, "bounds", None)
    if bounds is not None:
        data["bounds"] = [] if bounds == "none" else [b.strip() for b in bounds.split(",") if b.strip()]
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.command in ("analyze", "loops", "treecheck"):
        data["out"] = data.get("out") or "out"
    return ExperimentConfig.from_dict(data)


def _emit(report: dict, out):
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")


def cmd_analyze(args, cfg):
    system = load_system(cfg)
    d = resolve_scaling(cfg, system)
    report = classify(system, d.d, spectral=False)
    out = {
        "n": system.n,
        "scaling": cfg.scaling,
        "classification": report.classification.name,
        "strictly_dominant": report.strictly_dominant,
        "varrho": [None if not np.isfinite(v) else float(v) for v in report.varrho],
        "borderline_nodes": list(report.borderline_nodes),
        "borderline_edges": [list(e) for e in report.borderline_edges],
        "diagnostic": report.diagnostic,
    }
    if np.all(system.diag > 0):
        cert = spectral_certificate(system)
        out["rho"] = cert.rho
        out["perron_vector"] = cert.u.tolist()
        out["generalized_dd"] = cert.rho < 1.0
    _emit(out, args.out)
    return EXIT_OK


def cmd_loops(args, cfg):
    system = load_system(cfg)
    d = resolve_scaling(cfg, system)
    report = classify(system, d.d, spectral=False)
    if report.classification == Classification.NotWeaklyDD and not np.all(np.isfinite(report.varrho)):
        raise err.NonPositiveDiagonal(report.diagnostic)
    loops = enumerate_simple_loops(build_induced_graph(system), report.varrho, args.max_loops)
    _emit(
        {
            "scaling": cfg.scaling,
            "acyclic": loops.acyclic,
            "truncated": loops.truncated,
            "lambda_star": loops.lambda_star,
            "loops": [
                {"nodes": list(p), "gain": float(gn), "per_node_gain": float(pn)}
                for p, gn, pn in zip(loops.loops, loops.gains, loops.per_node_gains)
            ],
        },
        args.out,
    )
    return EXIT_OK


def cmd_treecheck(args, cfg):
    system = load_system(cfg)
    g = build_induced_graph(system)
    if not 0 <= args.root < system.n:
        raise err.ConfigError(f"root {args.root} outside 0..{system.n - 1}")
    if args.depth < 0:
        raise err.ConfigError("depth must be >= 0")
    d = resolve_scaling(cfg, system)
    tree = build_unwrapped_tree(system, g, args.root, args.depth)
    equiv = verify_root_equivalence(system, g, args.root, args.depth)
    dom = verify_tree_dominance(system, g, d, args.root, args.depth)
    ok = equiv.ok and dom.ok
    _emit(
        {
            "root": args.root,
            "depth": args.depth,
            "tree_size": len(tree.nodes),
            "layer_sizes": tree.layer_sizes(),
            "x_graph": equiv.x_graph,
            "x_tree": equiv.x_tree,
            "abs_diff": equiv.abs_diff,
            "root_equivalent": equiv.ok,
            "original_classification": dom.original.classification.name,
            "tree_classification": dom.tree.classification.name,
            "tree_dominant": dom.ok,
            "ok": ok,
        },
        args.out,
    )
    return EXIT_OK if ok else EXIT_NUMERICAL


def _result_code(result) -> int:
    if result.termination == Termination.NumericalFailure:
        print(json.dumps(error_payload(result.failure)), file=_sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_run(args, cfg):
    result = run_experiment(cfg)
    s = result.summary
    fit = s["fit"]
    rate = "exact (degenerate fit)" if fit.get("degenerate") else f"{fit['rate']:.6g}"
    print(f"classification={s['classification']} rho={s['rho']} rate={rate} termination={s['termination']}")
    print(f"wrote {result.csv_path} and {result.summary_path}")
    return _result_code(result)


def _bench_one(cfg: ExperimentConfig):
    try:
        res = run_experiment(cfg)
    except err.GaBPError as exc:
        return {"seed": cfg.seed, "error": type(exc).__name__, "message": str(exc)}
    s = res.summary
    return {
        "seed": cfg.seed,
        "classification": s["classification"],
        "rho": s["rho"],
        "lambda_star": s.get("lambda_star"),
        "rate": s["fit"].get("rate"),
        "final_log10_mse": s["final_log10_mse"],
        "jacobi_final_log10_mse": s.get("jacobi_final_log10_mse"),
        "termination": s["termination"],
    }


BENCH_COLUMNS = (
    "seed",
    "classification",
    "rho",
    "lambda_star",
    "rate",
    "final_log10_mse",
    "jacobi_final_log10_mse",
    "termination",
    "error",
    "message",
)


def cmd_bench(args, cfg):
    if cfg.generate is None:
        raise err.ConfigError("bench needs --generate")
    if args.seeds < 1 or args.jobs < 1:
        raise err.ConfigError("--seeds and --jobs must be positive")
    root = Path(cfg.out)
    cfgs = [replace(cfg, seed=cfg.seed + k, out=str(root / f"seed_{cfg.seed + k}")) for k in range(args.seeds)]
    if args.jobs == 1:
        rows = [_bench_one(c) for c in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, cfgs))
    root.mkdir(parents=True, exist_ok=True)
    path = root / "bench.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, restval="", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    failed = sum("error" in r for r in rows)
    print(f"wrote {path} ({len(rows)} seeds, {failed} failed)")
    return EXIT_OK


_COMMANDS = {
    "analyze": cmd_analyze,
    "solve": cmd_run,
    "bounds": cmd_run,
    "loops": cmd_loops,
    "treecheck": cmd_treecheck,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return _COMMANDS[args.command](args, cfg)
    except (err.GaBPError, ValueError, OSError) as exc:
        payload = error_payload(exc)
        print(json.dumps(payload), file=_sys.stderr)
        return payload["exit_code"]


if __name__ == "__main__":
    _sys.exit(main())

"""Experiment driver: one configured run producing a per-round CSV and a JSON summary."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bnd
from .dominance import Classification, classify, spectral_certificate, varrho
from .errors import ConfigError, DegenerateFit, NotGeneralizedDD, NotWeaklyDominant
from .generators import GeneratorSpec, generate
from .mmio import load_matrix_market, read_vector
from .solver import Termination, jacobi_run, run
from .system import Scaling, SparseSystem, build_induced_graph, direct_solve

BOUND_KINDS = ("theorem1", "rho", "lambda_star")
SCALINGS = ("identity", "perron", "file")
CSV_COLUMNS = ("round", "log10_mse", "theorem1_bound_log10", "rho_bound_log10", "jacobi_log10_mse")
CSV_NAME = "curves.csv"
SUMMARY_NAME = "summary.json"


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    Exactly one of ``input`` (Matrix Market path) and ``generate``
    (generator spec string such as ``"tree:n=30"``) must be set. ``scaling``
    is ``identity``, ``perron`` or ``file``; an explicit vector may also be
    given inline through ``scaling_vector``.
    """

    input: Optional[str] = None
    generate: Optional[str] = None
    rhs: Optional[str] = None
    seed: int = 0
    scaling: str = "identity"
    scaling_file: Optional[str] = None
    scaling_vector: Optional[list] = None
    rounds: int = 100
    stop_tol: float = 0.0
    bounds: tuple = BOUND_KINDS
    jacobi: bool = True
    fit_window: Optional[tuple] = None
    max_loops: int = 10**6
    out: str = "out"

    def __post_init__(self):
        self.bounds = tuple(self.bounds)
        if self.fit_window is not None:
            self.fit_window = tuple(self.fit_window)
        self.validate()

    def validate(self):
        if (self.input is None) == (self.generate is None):
            raise ConfigError("set exactly one of input and generate")
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise ConfigError(f"rounds must be a positive integer, got {self.rounds!r}")
        if self.stop_tol < 0:
            raise ConfigError("stop_tol must be >= 0")
        unknown = set(self.bounds) - set(BOUND_KINDS)
        if unknown:
            raise ConfigError(f"unknown bounds {sorted(unknown)}; choose from {', '.join(BOUND_KINDS)}")
        if self.scaling_vector is not None:
            self.scaling = "file"
        if self.scaling not in SCALINGS:
            raise ConfigError(f"scaling must be one of {', '.join(SCALINGS)}")
        if self.scaling == "file" and self.scaling_file is None and self.scaling_vector is None:
            raise ConfigError("scaling 'file' needs scaling_file")
        if self.fit_window is not None and len(self.fit_window) != 2:
            raise ConfigError("fit_window must be a (first, last) pair")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bounds"] = list(self.bounds)
        return out


@dataclass
class ExperimentResult:
    summary: dict
    csv_path: Path
    summary_path: Path
    termination: Termination
    failure: Optional[Exception] = field(default=None, repr=False)


def load_system(cfg: ExperimentConfig) -> SparseSystem:
    if cfg.input is not None:
        return load_matrix_market(cfg.input, cfg.rhs)
    try:
        spec = GeneratorSpec.parse(cfg.generate)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sys = generate(spec, cfg.seed)
    if cfg.rhs is not None:
        b = read_vector(cfg.rhs)
        if b.size != sys.n:
            raise ConfigError(f"right-hand side has {b.size} entries, system has {sys.n}")
        sys = sys.with_rhs(b)
    return sys


def resolve_scaling(cfg: ExperimentConfig, sys: SparseSystem, certificate=None) -> Scaling:
    if cfg.scaling == "identity":
        return Scaling.identity(sys.n)
    if cfg.scaling == "perron":
        u = (certificate or spectral_certificate(sys)).u
        try:
            return Scaling(u)
        except ValueError:
            raise NotGeneralizedDD("Perron vector has zero entries; it is not a valid scaling") from None
    d = np.asarray(cfg.scaling_vector if cfg.scaling_vector is not None else read_vector(cfg.scaling_file), dtype=float)
    if d.size != sys.n:
        raise ConfigError(f"scaling has {d.size} entries, system has {sys.n}")
    try:
        return Scaling(d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


def _cell(v):
    return "" if v is None else format(float(v), ".17g")


def _first_exact_round(traj, xstar):
    tol = 1e-10 * max(1.0, float(np.max(np.abs(xstar), initial=0.0)))
    hit = np.nonzero(np.max(np.abs(traj.errors), axis=1, initial=0.0) <= tol)[0]
    return int(hit[0]) if hit.size else None


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Solve, run the message-passing solver (and Jacobi), compute bounds and write outputs.

    Precondition failures of a requested bound raise (``NotWeaklyDominant``,
    ``NotGeneralizedDD``). A solver divisor collapse does not: the rounds
    computed so far are written and the result carries the failure.
    """
    sys = load_system(cfg)
    g = build_induced_graph(sys)
    cert = spectral_certificate(sys) if np.all(sys.diag > 0) else None
    scaling = resolve_scaling(cfg, sys, cert)
    report = classify(sys, scaling.d, spectral=False)
    solution = direct_solve(sys)
    traj = run(sys, g, cfg.rounds, cfg.stop_tol, solution)
    K = traj.rounds_executed
    log_mse = traj.log10_mse()

    columns = {"theorem1": None, "rho": None, "jacobi": None}
    summary = {
        "config": cfg.to_dict(),
        "n": sys.n,
        "nnz": sys.nnz,
        "num_edges": g.num_edges,
        "acyclic": g.is_acyclic(),
        "diameter": g.diameter(),
        "direct_residual": solution.residual_norm,
        "classification": report.classification.name,
        "varrho": [_finite(v) for v in report.varrho],
        "borderline_nodes": list(report.borderline_nodes),
        "borderline_edges": [list(e) for e in report.borderline_edges],
        "diagnostic": report.diagnostic,
        "rho": None if cert is None else cert.rho,
        "generalized_dd": None if cert is None else cert.rho < 1.0,
    }

    if "theorem1" in cfg.bounds:
        if not report.satisfies(Classification.WeaklyDScaledDD):
            raise NotWeaklyDominant(report.diagnostic or "matrix is not weakly dominant under the chosen scaling")
        if K >= 1:
            table = bnd.theorem1_bound(sys, g, scaling, K, solution)
            columns["theorem1"] = dict(zip(table.rounds.tolist(), table.log10_mean_square().tolist()))
    if "rho" in cfg.bounds:
        if cert is None:
            raise NotGeneralizedDD("diagonal is not positive")
        table = bnd.rho_bound(sys, K, solution, cert)
        columns["rho"] = dict(zip(table.rounds.tolist(), table.log10_mean_square().tolist()))
    if "lambda_star" in cfg.bounds:
        loops = bnd.enumerate_simple_loops(g, report.varrho, cfg.max_loops)
        at_perron = None
        if cert is not None and cert.rho < 1.0 and np.all(cert.u > 0):
            at_perron = bnd.loop_gains(loops.loops, varrho(sys, cert.u), loops.truncated).lambda_star
        summary["lambda_star"] = loops.lambda_star
        summary["lambda_star_at_perron"] = at_perron
        summary["loops"] = len(loops.loops)
        summary["loops_truncated"] = loops.truncated

    if cfg.jacobi:
        jac = jacobi_run(sys, cfg.rounds, cfg.stop_tol, solution)
        columns["jacobi"] = dict(enumerate(jac.log10_mse().tolist()))
        summary["jacobi_termination"] = jac.termination.value
        summary["jacobi_final_log10_mse"] = _finite(jac.log10_mse()[-1])

    summary["termination"] = traj.termination.value
    summary["rounds_executed"] = K
    summary["failure"] = None
    if traj.failure is not None:
        f = traj.failure
        summary["failure"] = {"round": f.round, "edge": list(f.edge), "value": _finite(f.value)}
    summary["final_log10_mse"] = _finite(log_mse[-1])
    summary["exact_round"] = _first_exact_round(traj, solution.x)
    summary["exact_at_diameter"] = (
        summary["exact_round"] is not None and summary["exact_round"] <= g.diameter() if g.is_acyclic() else None
    )
    try:
        fit = bnd.estimate_asymptotic_rate(traj, cfg.fit_window)
        summary["fit"] = {"slope": fit.slope, "rate": fit.rate, "window": list(fit.fit_window)}
    except DegenerateFit as exc:
        summary["fit"] = {"degenerate": True, "reason": str(exc)}

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / CSV_NAME
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for k in range(K + 1):
            w.writerow([
                k,
                _cell(log_mse[k]),
                _cell(columns["theorem1"].get(k)) if columns["theorem1"] else "",
                _cell(columns["rho"].get(k)) if columns["rho"] else "",
                _cell(columns["jacobi"].get(k)) if columns["jacobi"] else "",
            ])
    summary_path = out / SUMMARY_NAME
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentResult(summary, csv_path, summary_path, traj.termination, traj.failure)


def read_curves(path) -> dict:
    """Load a curves CSV back into float arrays (empty cells become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in CSV_COLUMNS}

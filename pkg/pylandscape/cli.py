"""
Command line experiment runner.

    pylandscape run       --config FILE   ascend from c = 0 for every seed and write result files
    pylandscape gradcheck --config FILE   compare analytic and finite-difference gradients
    pylandscape rankscan  --config FILE   tabulate the rank condition over random controls or a trajectory
    pylandscape validate  --config FILE   re-check written result files

Every command prints a single JSON object summarizing the outcome on
standard output. Exit codes are EXIT_OK, EXIT_CONFIG (configuration or file
errors), EXIT_NUMERIC (numerical failures) and EXIT_VIOLATION (an
acceptance bound was violated).
"""
import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .config import ExperimentConfig, load_config
from .diagnostics import closed_rank_identity, modal_rank, rank_condition
from .errors import ConfigError, LandscapeError
from .gradients import FALLBACK_FIDELITY, bundle, finite_diff_f, finite_diff_j
from .landscape import evaluate
from .model import make_rng
from .optimizer import Status, ascend
from .output import verify_outputs, write_controls, write_rankscan, write_spectra, write_trace

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERIC",
    "EXIT_VIOLATION",
    "relative_error",
    "run_seed",
    "gradcheck_draw",
    "rankscan_seed",
    "cmd_run",
    "cmd_gradcheck",
    "cmd_rankscan",
    "cmd_validate",
    "build_parser",
    "main",
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_VIOLATION = 3


def _native(x: Any) -> Any:
    # numpy scalars and arrays to JSON-serializable values
    if isinstance(x, dict):
        return {k: _native(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_native(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_native(v) for v in x.tolist()]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _emit(summary: Dict[str, Any]):
    print(json.dumps(_native(summary), sort_keys=True))


class _WorkerFailure(Exception):
    """Carries a failure out of a worker as (exit code, message)."""

    def __init__(self, code: int, message: str):
        super(_WorkerFailure, self).__init__(message)
        self.code = code


def _guarded(func: Callable, args: tuple):
    # Errors are returned as values; not every LandscapeError survives pickling.
    try:
        return EXIT_OK, func(*args)
    except ConfigError as e:
        return EXIT_CONFIG, str(e)
    except (LandscapeError, np.linalg.LinAlgError, FloatingPointError) as e:
        return EXIT_NUMERIC, str(e)


def _map(func: Callable, args: Sequence[tuple], jobs: int) -> List:
    """
    Applies func to every element of args, in up to jobs processes. Results
    come back in the order of args regardless of scheduling.

    Raises:
        _WorkerFailure: If any call failed; the first failure in args order wins.
    """
    if jobs <= 1 or len(args) <= 1:
        outcomes = [_guarded(func, a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
            outcomes = list(pool.map(_guarded, [func] * len(args), args))
    for code, value in outcomes:
        if code != EXIT_OK:
            raise _WorkerFailure(code, value)
    return [value for _, value in outcomes]


def relative_error(analytic, numeric) -> float:
    """
    Returns ||analytic - numeric|| / max(||numeric||, 1): a relative error
    that turns into an absolute one for gradients of norm below 1.
    """
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1.0))


def run_seed(cfg: ExperimentConfig, seed: int) -> Dict[str, Any]:
    """
    Runs one ascent from c = 0 and writes the result files of the seed.

    Returns:
        The per-seed summary.
    """
    system = cfg.system(seed)
    w = cfg.target_for(system, seed)
    optimizer = cfg.optimizer
    if cfg.run.emit_spectra and not optimizer.record_gradient_spectra:
        optimizer = replace(optimizer, record_gradient_spectra=True)

    logger.info("seed %d: ascending on N = %d, L = %d, M = %d", seed, system.n, system.intervals, system.m)
    trace = ascend(system, w, cfg=optimizer)

    out = cfg.run.output
    if cfg.run.emit_trace:
        write_trace(out, seed, trace)
    if cfg.run.emit_spectra:
        write_spectra(out, seed, trace)
    if cfg.run.emit_controls:
        write_controls(out, seed, trace.controls)

    summary = {
        "seed": seed,
        "status": trace.status.value,
        "evaluations": trace.evaluations,
        "rejects": trace.rejects,
        "escapes": trace.escapes,
    }
    if trace.records:
        final = trace.final
        checked = [r.identities_ok for r in trace.records if r.identities_ok is not None]
        summary.update(
            iterations=final.iteration,
            final_F=final.fidelity,
            final_one_minus_F=final.one_minus_f,
            modal_rank_Gc=modal_rank(r.rank_c for r in trace.records),
            modal_rank_Gcphi=modal_rank(r.rank_stack for r in trace.records),
            degenerate_iterations=sum(r.degenerate for r in trace.records),
            identities_ok=all(checked) if checked else None,
        )
    return summary


def cmd_run(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    seeds = cfg.seeds()
    logger.info("run: %d seeds from %s into %s", len(seeds), cfg.path, cfg.run.output)
    results = _map(run_seed, [(cfg, s) for s in seeds], cfg.run.jobs)
    failed = [r["seed"] for r in results if r["status"] == Status.NON_FINITE.value]
    _emit({"command": "run", "config": cfg.path, "output": cfg.run.output, "seeds": results})
    return EXIT_NUMERIC if failed else EXIT_OK


def gradcheck_draw(cfg: ExperimentConfig, seed: int, draw: int, steps: Sequence[float]) -> Dict[str, Any]:
    """
    Compares analytic and central-difference gradients at one random point.

    ∇J over (c, φ) is checked at a random φ; ∇_c F is checked at φ_opt(c)
    unless F is at or below FALLBACK_FIDELITY.

    Returns:
        A record with the relative errors per step and the degeneracy flag.
    """
    g = cfg.gradcheck
    system = cfg.system(seed)
    w = cfg.target_for(system, seed)
    rng = make_rng(seed * 1_000_003 + draw)
    c = rng.uniform(-g.amplitude, g.amplitude, (system.intervals, system.m))
    phi = rng.uniform(-g.phi_amplitude, g.phi_amplitude, system.n_b ** 2)

    grads = bundle(system, w, c, phi)
    ev = evaluate(system, w, c)
    grads_f = bundle(system, w, c, evaluation=ev) if ev.fidelity > FALLBACK_FIDELITY else None

    errors = []
    for step in steps:
        err_j = relative_error(grads.grad_j, finite_diff_j(system, w, c, phi, step))
        err_f = None
        if grads_f is not None:
            err_f = relative_error(grads_f.grad_f_c, finite_diff_f(system, w, c, step))
        errors.append({"step": step, "rel_err_j": err_j, "rel_err_f": err_f})
    return {"seed": seed, "draw": draw, "degenerate": grads.degenerate, "errors": errors}


def cmd_gradcheck(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    g = cfg.gradcheck
    draws = args.draws if args.draws is not None else g.draws
    steps = args.steps if args.steps else [g.step]
    seeds = cfg.seeds()

    jobs = [(cfg, seeds[i % len(seeds)], i, steps) for i in range(draws)]
    records = _map(gradcheck_draw, jobs, cfg.run.jobs)

    per_step = []
    for k, step in enumerate(steps):
        j_errs = [r["errors"][k]["rel_err_j"] for r in records if not r["degenerate"]]
        f_errs = [r["errors"][k]["rel_err_f"] for r in records if r["errors"][k]["rel_err_f"] is not None]
        per_step.append({
            "step": step,
            "max_rel_err_j": max(j_errs, default=0.0),
            "max_rel_err_f": max(f_errs, default=0.0),
        })
    worst = max(max(s["max_rel_err_j"], s["max_rel_err_f"]) for s in per_step)
    skipped = sum(r["degenerate"] for r in records)
    if skipped:
        logger.warning("gradcheck: %d of %d draws flagged degenerate and excluded from ∇J", skipped, draws)

    passed = bool(np.isfinite(worst) and worst <= g.tolerance)
    _emit({
        "command": "gradcheck",
        "config": cfg.path,
        "draws": draws,
        "skipped_degenerate": skipped,
        "steps": per_step,
        "max_rel_err": worst,
        "tolerance": g.tolerance,
        "passed": passed,
    })
    return EXIT_OK if passed else EXIT_VIOLATION


def rankscan_seed(cfg: ExperimentConfig, seed: int) -> Dict[str, Any]:
    """
    Evaluates the rank condition at random controls or along the ascent
    trajectory of one seed and writes the rankscan file.

    Returns:
        The per-seed summary.
    """
    system = cfg.system(seed)
    w = cfg.target_for(system, seed)
    rel_tol = cfg.optimizer.rank_tolerance
    reports, fidelities = [], []

    def record(ev, grads):
        reports.append(rank_condition(grads, rel_tol=rel_tol))
        fidelities.append(ev.fidelity)

    if cfg.rankscan.source == "trajectory":
        ascend(system, w, cfg=cfg.optimizer, callback=lambda it, c, ev, grads: record(ev, grads))
    else:
        rng = make_rng(seed)
        a = cfg.rankscan.amplitude
        for _ in range(cfg.rankscan.points):
            c = rng.uniform(-a, a, (system.intervals, system.m))
            ev = evaluate(system, w, c)
            record(ev, bundle(system, w, c, evaluation=ev))

    write_rankscan(cfg.run.output, seed, reports, fidelities)

    summary = {
        "seed": seed,
        "points": len(reports),
        "condition_met": sum(bool(r.condition_met) for r in reports),
        "min_rank_gain": min((r.numerical_rank - r.rank_c for r in reports), default=None),
        "cases": sorted({r.case.value for r in reports}),
    }
    if system.is_closed:
        summary["closed_identity_violations"] = sum(
            r.numerical_rank != closed_rank_identity(r.rank_c, system.n) for r in reports)
    return summary


def cmd_rankscan(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    results = _map(rankscan_seed, [(cfg, s) for s in cfg.seeds()], cfg.run.jobs)
    _emit({"command": "rankscan", "config": cfg.path, "output": cfg.run.output, "seeds": results})
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    results = []
    for seed in cfg.seeds():
        system = cfg.system(seed)
        report = verify_outputs(system, cfg.target_for(system, seed), cfg.run.output, seed)
        if not report.checked:
            report.violations.append("no result files found")
        results.append({"seed": seed, "checked": report.checked, "violations": report.violations})
    ok = all(not r["violations"] for r in results)
    _emit({"command": "validate", "config": cfg.path, "output": cfg.run.output, "seeds": results, "passed": ok})
    return EXIT_OK if ok else EXIT_VIOLATION


def _steps(text: str) -> List[float]:
    try:
        steps = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid step list {text!r}")
    if not steps or any(not s > 0 for s in steps):
        raise argparse.ArgumentTypeError("steps must be positive numbers")
    return steps


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="experiment configuration file (TOML)")
    common.add_argument("--out", metavar="DIR", help="output directory, overrides [run] output")
    common.add_argument("--jobs", type=int, metavar="N", help="number of seeds run concurrently")
    common.add_argument("--seed-offset", type=int, metavar="K", help="added to every seed")
    common.add_argument("--rank-tol", type=float, metavar="X", help="relative numerical rank threshold")
    common.add_argument("-v", "--verbose", action="store_true", help="log debug messages to standard error")

    parser = argparse.ArgumentParser(prog="pylandscape", description="Control landscape analysis for bipartite quantum systems.")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="run gradient ascents and write traces")
    run.set_defaults(func=cmd_run)

    gradcheck = commands.add_parser("gradcheck", parents=[common], help="check analytic gradients against finite differences")
    gradcheck.add_argument("--draws", type=int, metavar="N", help="number of random draws, overrides [gradcheck] draws")
    gradcheck.add_argument("--steps", type=_steps, metavar="H1,H2,...", help="finite-difference steps to sweep")
    gradcheck.set_defaults(func=cmd_gradcheck)

    rankscan = commands.add_parser("rankscan", parents=[common], help="tabulate the rank condition")
    rankscan.set_defaults(func=cmd_rankscan)

    validate = commands.add_parser("validate", parents=[common], help="re-check written result files")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)

    try:
        if getattr(args, "draws", None) is not None and args.draws < 1:
            raise ConfigError(args.config, f"--draws must be at least 1 (was {args.draws})")
        cfg = load_config(args.config).with_overrides(args.out, args.jobs, args.seed_offset, args.rank_tol)
        return args.func(cfg, args)
    except _WorkerFailure as e:
        print(f"pylandscape: {e}", file=sys.stderr)
        return e.code
    except ConfigError as e:
        print(f"pylandscape: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"pylandscape: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (LandscapeError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"pylandscape: {e}", file=sys.stderr)
        return EXIT_NUMERIC

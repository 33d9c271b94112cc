"""Command-line front end: solves, optimization runs, sweeps and certificates.

Subcommands write their artifacts into ``--out`` as JSON/CSV so external
tools can consume them; exit status is 0 on success, 1 on solver failure,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import problems
from .adjoint import ControlProblem
from .core import classify_sets, complementarity_residual, load_problem, save_problem
from .errors import ViOptError
from .oracle import make_random_problem
from .sensitivity import derivative_cone_vi, finite_difference_quotient
from .ssn import HuberParams, solve_vi
from .stationarity import check_b_stationarity, check_strong_stationarity
from .trust_region import TrustRegionConfig, optimize

_TR_FLAG_DEFAULTS = {
    "tr_eta1": 0.25,
    "tr_eta2": 0.75,
    "tr_gamma0": 0.25,
    "tr_gamma1": 0.5,
    "tr_gamma2": 1.5,
    "tr_beta": 1.0,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--config", default=None, help="flat JSON file of flag defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma-max", type=float, default=1e8)
    p.add_argument("--newton-tol", type=float, default=1e-10)


def _add_tr_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stop-tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=150)
    p.add_argument("--tr-delta0", type=float, default=1.0)
    for flag, default in _TR_FLAG_DEFAULTS.items():
        p.add_argument("--" + flag.replace("_", "-"), type=float, default=default)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="viopt")
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = commands["solve-vi"] = sub.add_parser(
        "solve-vi", help="solve one VI instance from a problem JSON"
    )
    p.add_argument("--problem", required=True)
    _add_common(p)

    p = commands["optimize"] = sub.add_parser(
        "optimize", help="trust-region run on the benchmark problem"
    )
    p.add_argument("--alpha", type=float, default=1e-4)
    p.add_argument("--g", type=float, default=15.0)
    p.add_argument("--mesh", type=int, default=80)
    p.add_argument(
        "--u0",
        default="target",
        help="initial control: 'target', 'tracking', 'zero', or a CSV file path",
    )
    _add_tr_flags(p)
    _add_common(p)

    p = commands["sweep"] = sub.add_parser(
        "sweep", help="iteration-count table over (alpha, g) cells"
    )
    p.add_argument("--alphas", required=True, help="comma-separated alpha values")
    p.add_argument("--gs", required=True, help="comma-separated g values")
    p.add_argument("--mesh", type=int, default=40)
    p.add_argument("--jobs", type=int, default=1)
    _add_tr_flags(p)
    _add_common(p)

    p = commands["check-stationarity"] = sub.add_parser(
        "check-stationarity", help="certificates for a stored control"
    )
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--mesh", type=int, required=True)
    p.add_argument("--control", required=True, help="CSV grid or flat control file")
    p.add_argument("--b-mode", choices=["coordinates", "random"], default="coordinates")
    _add_common(p)

    p = commands["derivative-check"] = sub.add_parser(
        "derivative-check", help="difference-quotient convergence study"
    )
    p.add_argument("--problem", default=None, help="problem JSON (random instance if omitted)")
    p.add_argument("--n", type=int, default=6, help="dimension of the random instance")
    _add_common(p)
    return parser, commands


def _apply_config_defaults(
    parser: argparse.ArgumentParser,
    commands: dict[str, argparse.ArgumentParser],
    argv: list[str],
) -> argparse.Namespace:
    """Two-phase parse so flags beat the config file, which beats defaults."""
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        flat = {str(k).replace("-", "_"): v for k, v in doc.items()}
        for action in commands[args.command]._actions:
            if action.dest in flat:
                action.default = flat[action.dest]
    return parser.parse_args(argv)


def _tr_config(args: argparse.Namespace) -> TrustRegionConfig:
    return TrustRegionConfig(
        eta1=args.tr_eta1,
        eta2=args.tr_eta2,
        gamma0=args.tr_gamma0,
        gamma1=args.tr_gamma1,
        gamma2=args.tr_gamma2,
        delta0=args.tr_delta0,
        beta=args.tr_beta,
        stop_tol=args.stop_tol,
        max_iters=args.max_iters,
    )


def _huber(args: argparse.Namespace) -> HuberParams:
    return HuberParams(gamma_max=args.gamma_max, newton_tol=args.newton_tol)


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_solve_vi(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    out = _outdir(args)
    sol, log = solve_vi(problem, _huber(args))
    r1, r2, r3 = complementarity_residual(problem, sol.y, sol.q)
    doc = sol.to_json_dict()
    doc["residuals"] = {
        "linear": float(np.abs(r1).max()),
        "slack": float(np.abs(r2).max()),
        "bound": float(np.abs(r3).max()),
    }
    (out / "solution.json").write_text(json.dumps(doc))
    log.write_jsonl(out / "log.jsonl")
    return 0 if sol.converged else 1


def _write_optimize_artifacts(
    out: Path, cp: ControlProblem, grid: problems.GridSpec, result, args
) -> dict:
    result.write_history_csv(out / "history.csv")
    (out / "state.csv").write_text(problems.state_grid_csv(result.y_final, grid))
    (out / "control.csv").write_text(problems.state_grid_csv(result.u_final, grid))
    params = _huber(args)
    sol, _ = solve_vi(cp.problem_at(result.u_final), params, y0=result.y_final, q0=result.q_final)
    sets = classify_sets(sol.y, sol.q, cp.vi.g)
    report = check_strong_stationarity(cp, result.u_final, sol, sets)
    b_min = check_b_stationarity(
        cp, result.u_final, params, seed=args.seed, sol=sol, sets=sets
    )
    doc = {
        "converged": result.converged,
        "iterations": result.iterations,
        "j_final": cp.cost_of(result.y_final, result.u_final),
        "zero_fraction": problems.zero_fraction(result.y_final),
        "biactive_count": sets.biactive_count,
        "stationarity": report.to_json_dict(),
        "b_min_directional": b_min,
    }
    (out / "report.json").write_text(json.dumps(doc))
    return doc


def _cmd_optimize(args: argparse.Namespace) -> int:
    grid = problems.GridSpec(args.mesh)
    cp = problems.paper_example(args.alpha, args.g, grid)
    out = _outdir(args)
    result = optimize(cp, _tr_config(args), _huber(args), problems.tracking_control(cp))
    _write_optimize_artifacts(out, cp, grid, result, args)
    return 0 if result.converged else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    alphas = [float(v) for v in args.alphas.split(",") if v]
    gs = [float(v) for v in args.gs.split(",") if v]
    grid = problems.GridSpec(args.mesh)
    table = problems.sweep(alphas, gs, grid, _tr_config(args), _huber(args), jobs=args.jobs)
    out = _outdir(args)
    table.write_csv(out / "table1.csv")
    failed = [c for c in table.cells.values() if c.error]
    return 1 if failed else 0


def _read_control(path: str, n: int) -> np.ndarray:
    text = Path(path).read_text().strip()
    values = [float(v) for line in text.splitlines() for v in line.split(",") if v]
    u = np.asarray(values, dtype=float)
    if u.size != n:
        raise ValueError(f"control file has {u.size} values, expected {n}")
    return u


def _cmd_check_stationarity(args: argparse.Namespace) -> int:
    grid = problems.GridSpec(args.mesh)
    cp = problems.paper_example(args.alpha, args.g, grid)
    u = _read_control(args.control, cp.n)
    out = _outdir(args)
    params = _huber(args)
    sol, _ = solve_vi(cp.problem_at(u), params)
    sets = classify_sets(sol.y, sol.q, cp.vi.g)
    report = check_strong_stationarity(cp, u, sol, sets)
    b_min = check_b_stationarity(
        cp,
        u,
        params,
        seed=args.seed,
        include_coordinates=args.b_mode == "coordinates",
        sol=sol,
        sets=sets,
    )
    doc = report.to_json_dict()
    doc["b_min_directional"] = b_min
    (out / "report.json").write_text(json.dumps(doc))
    return 0 if sol.converged else 1


def _cmd_derivative_check(args: argparse.Namespace) -> int:
    if args.problem:
        problem = load_problem(args.problem)
    else:
        problem = make_random_problem(args.n, np.random.default_rng(args.seed))
    out = _outdir(args)
    params = _huber(args)
    sol, _ = solve_vi(problem, params)
    sets = classify_sets(sol.y, sol.q, problem.g)
    rng = np.random.default_rng(args.seed)
    h = rng.standard_normal(problem.n)
    h /= np.linalg.norm(h)
    pair = derivative_cone_vi(problem, sol, sets, h)
    ts = [1e-2, 1e-3, 1e-4, 1e-5]
    errors = []
    print("t          |fd_quotient - eta|_inf")
    for t in ts:
        quot = finite_difference_quotient(problem, params, h, t)
        err = float(np.abs(quot - pair.eta).max())
        errors.append(err)
        print(f"{t:<10.1e} {err:.6e}")
    (out / "derivative_check.json").write_text(
        json.dumps({"t": ts, "error": errors, "biactive_count": sets.biactive_count})
    )
    save_problem(problem, out / "problem.json")
    return 0


_COMMANDS = {
    "solve-vi": _cmd_solve_vi,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
    "check-stationarity": _cmd_check_stationarity,
    "derivative-check": _cmd_derivative_check,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, commands = build_parser()
    args = _apply_config_defaults(parser, commands, argv)
    try:
        return _COMMANDS[args.command](args)
    except (ViOptError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface: ``gen2sat <subcommand> ...``."""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import branching_matrix, first_moment_bound, path_count_bound, rho_numeric_check
from .branching import (FBranchingConfig, estimate_extinction, estimate_extinction_even_steps,
                        extinction_single_type, linear_growth_check)
from .digraph import is_satisfiable
from .experiments import ExperimentConfig, bootstrap_rounds, find_threshold, fmt, rows_to_csv, sweep
from .exploration import PREFER_NEGATIVE, PREFER_POSITIVE, explore, horizon
from .rng import derive_seed
from .formula import DimacsError, FormulaError, LazyFormula, Literal, ModelParams, Provenance, read_dimacs, sample_formula, write_dimacs

EXIT_SAT, EXIT_UNSAT, EXIT_USAGE = 10, 20, 2


class UsageError(Exception):
    pass


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return fmt(x)
    return json.dumps(obj)


def _alphas(text: str) -> ModelParams:
    try:
        return ModelParams.parse(text)
    except (FormulaError, ValueError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {v}")
    return v


def _n(text: str) -> int:
    v = _positive_int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("n must be >= 2")
    return v


def _int_list(text: str) -> list[int]:
    return [_n(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("need finite numbers")
    return vals


def _literal(text: str) -> Literal:
    try:
        return Literal.from_int(int(text))
    except (ValueError, FormulaError):
        raise argparse.ArgumentTypeError(f"bad literal {text!r}") from None


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return v


# -- subcommands --------------------------------------------------------------


def cmd_solve(args) -> int:
    text = sys.stdin.read() if args.file in (None, "-") else Path(args.file).read_text()
    f = read_dimacs(text)
    v = is_satisfiable(f)
    out = sys.stdout
    if v.satisfiable:
        out.write("SAT\n")
        lits = [str(i + 1) if b else str(-(i + 1)) for i, b in enumerate(v.witness)]
        out.write("v " + " ".join(lits + ["0"]) + "\n")
        return EXIT_SAT
    out.write("UNSAT\n")
    return EXIT_UNSAT


def cmd_gen(args) -> int:
    params = args.alphas
    params.probabilities(args.n)
    f = sample_formula(args.n, params, args.seed)
    prov = Provenance.of(f, params)
    text = write_dimacs(f, comments=[prov.to_json()])
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".json").write_text(prov.to_json() + "\n")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bounds(args) -> int:
    params = args.alphas
    bm = branching_matrix(params)
    rho, rho_num = rho_numeric_check(params)
    res = {"alpha": list(params.alphas), "matrix": [list(r) for r in bm.entries], "rho": rho,
           "rho_minus": bm.rho_minus, "rho_numeric": rho_num,
           "always_satisfiable": params.alphas[0] * params.alphas[2] == 0}
    if args.s:
        res["path_count_bound"] = {"s": args.s, "T": path_count_bound(params, args.s)}
    if args.n:
        res["n"] = args.n
        res["first_moment_bound"] = first_moment_bound(params, args.n)
    print(dumps(res))
    return 0


def cmd_explore(args) -> int:
    params = args.alphas
    params.probabilities(args.n)
    T = args.T or horizon(args.n)
    start = args.start
    if start.variable > args.n:
        raise UsageError("start literal outside 1..n")
    tr = explore(LazyFormula(args.n, params), None, start, T, args.policy, args.seed)
    out = sys.stdout
    for rec in tr.records():
        out.write(dumps(rec) + "\n")
    out.write(dumps({"summary": True, "tau": tr.tau, "T": T, "stopped_early": tr.stopped_early,
                     "exhausted": tr.exhausted, "steps_run": tr.steps_run}) + "\n")
    return 0


def cmd_branch(args) -> int:
    cfg = FBranchingConfig.from_params(args.alphas, args.delta, args.beta)
    res = cfg.summary()
    res["degenerate"] = cfg.degenerate
    ext = estimate_extinction(cfg, args.trials, args.horizon, args.seed)
    res["q_fixed_point"] = list(ext.fixed_point)
    res["q_hat"] = list(ext.q)
    res["q_ci"] = [list(c) for c in ext.ci]
    if cfg.F1.cutoff == 0 and cfg.F0.cutoff and cfg.F2.cutoff:
        res["q_even_steps"] = list(extinction_single_type(cfg))
        q, se = estimate_extinction_even_steps(cfg, args.trials, 200, args.seed)
        res["q_even_steps_hat"] = [q, se]
    growth = {}
    for T in args.T:
        est, ci = linear_growth_check(cfg, T, args.trials, args.seed)
        growth[str(T)] = {"estimate": est, "ci": list(ci)}
    res["growth"] = growth
    print(dumps(res))
    return 0


def _rows_out(rows, out_path) -> None:
    text = rows_to_csv(rows)
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args) -> int:
    if (args.alphas is None) == (args.ray is None):
        raise UsageError("give exactly one of --alphas or --ray")
    if args.ray is not None and not args.lambdas:
        raise UsageError("--ray needs --lambdas")
    cfg = ExperimentConfig(
        n_values=tuple(args.n), points=(args.alphas,) if args.alphas else (), ray=args.ray,
        lambdas=tuple(args.lambdas or ()), trials=args.trials, seed=args.seed, workers=args.workers,
        timing=not args.no_timing,
    )
    for n in cfg.n_values:
        for p in cfg.parameter_points():
            p.probabilities(n)
    _rows_out(sweep(cfg), args.out)
    return 0


def cmd_threshold(args) -> int:
    res = find_threshold(args.ray, args.n, args.trials, args.tol, args.seed, workers=args.workers)
    print(dumps(res.as_dict()))
    return 0


def _one_bootstrap(task):
    n, a0, a1, a2, seed, rep, max_rounds = task
    r = bootstrap_rounds(n, ModelParams(a0, a1, a2), derive_seed(seed, rep), max_rounds=max_rounds)
    return r.as_dict()


def cmd_rounds(args) -> int:
    p = args.alphas
    if not p.rho > 1 or p.alphas[0] * p.alphas[2] == 0:
        raise UsageError("rounds needs rho > 1 and alpha0 * alpha2 > 0")
    tasks = [(args.n, *p.alphas, args.seed, k, args.max_rounds) for k in range(args.reps)]
    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_one_bootstrap, tasks))
    else:
        results = [_one_bootstrap(t) for t in tasks]
    counts: dict[str, int] = {"contradictory-cycle": 0, "round-stopped": 0, "exhausted": 0}
    for r in results:
        counts[r["verdict"]] += 1
    print(dumps({"n": args.n, "alpha": list(p.alphas), "reps": args.reps, "budget": results[0]["budget"] if results else 0,
                 "verdicts": counts, "runs": results}))
    return 0


# -- parser -------------------------------------------------------------------

CONFIG_KEYS = {"n", "alphas", "ray", "lambdas", "trials", "seed", "out", "workers", "tol"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gen2sat", description="Generalized random 2-SAT: generation, solving and experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    s = sub.add_parser("solve", help="decide a DIMACS 2-CNF (exit 10 SAT, 20 UNSAT)")
    s.add_argument("file", nargs="?", help="DIMACS file, '-' or omitted for stdin")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("gen", help="sample a formula as DIMACS")
    s.add_argument("--n", type=_n, required=True, help="number of variables")
    s.add_argument("--alphas", type=_alphas, required=True, help="a0,a1,a2")
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--out", help="output path; provenance goes to OUT.json")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("bounds", help="branching matrix, rho and the first-moment bound")
    s.add_argument("--alphas", type=_alphas, required=True, help="a0,a1,a2")
    s.add_argument("--n", type=_n, help="also evaluate the first-moment bound at this n")
    s.add_argument("--s", type=_positive_int, help="also print M^(s-1) (1,1)")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("explore", help="JSON-lines trace of one exploration")
    s.add_argument("--n", type=_n, required=True)
    s.add_argument("--alphas", type=_alphas, required=True)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--start", type=_literal, default=Literal(1, True), help="start literal as a signed integer")
    s.add_argument("--T", type=_positive_int, help="steps (default floor(sqrt n))")
    s.add_argument("--policy", choices=[PREFER_POSITIVE, PREFER_NEGATIVE], default=PREFER_POSITIVE)
    s.set_defaults(func=cmd_explore)

    s = sub.add_parser("branch", help="offspring laws, extinction and growth of the branching process")
    s.add_argument("--alphas", type=_alphas, required=True)
    s.add_argument("--delta", type=float, help="slack delta (default derived from rho)")
    s.add_argument("--beta", type=float, help="reweighting beta (default derived from rho and delta)")
    s.add_argument("--T", type=_int_list, default=[100, 1000], help="comma list of growth horizons")
    s.add_argument("--trials", type=_positive_int, default=1000, help="trajectories per estimate")
    s.add_argument("--horizon", type=_positive_int, default=1000, help="steps before a line counts as surviving")
    s.add_argument("--seed", type=_seed, default=0)
    s.set_defaults(func=cmd_branch)

    for name, helptext in (("sweep", "satisfiability probability over parameter points (CSV)"),
                           ("threshold", "bisection for the 1/2 crossing along a ray (JSON)")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="key=value file with defaults for these flags")
        if name == "sweep":
            s.add_argument("--n", type=_int_list, help="comma list of n")
            s.add_argument("--alphas", type=_alphas, help="single point a0,a1,a2")
            s.add_argument("--ray", type=_alphas, help="direction a0,a1,a2 scaled by --lambdas")
            s.add_argument("--lambdas", type=_float_list, help="comma list, strictly increasing")
            s.add_argument("--out", help="CSV path (default stdout)")
            s.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
            s.set_defaults(func=cmd_sweep)
        else:
            s.add_argument("--n", type=_n)
            s.add_argument("--ray", type=_alphas, help="direction a0,a1,a2")
            s.add_argument("--tol", type=float, default=0.02)
            s.set_defaults(func=cmd_threshold)
        s.add_argument("--trials", type=_positive_int, default=100, help="formulas per point (default 100)")
        s.add_argument("--seed", type=_seed, default=0, help="master seed")
        s.add_argument("--workers", type=_positive_int, default=1, help="worker processes; output does not depend on it")

    s = sub.add_parser("rounds", help="round bootstrap repetitions (JSON)")
    s.add_argument("--n", type=_n, required=True)
    s.add_argument("--alphas", type=_alphas, required=True)
    s.add_argument("--reps", type=_positive_int, default=100, help="independent repetitions")
    s.add_argument("--max-rounds", type=_positive_int, help="override the round budget")
    s.add_argument("--seed", type=_seed, default=0, help="master seed")
    s.add_argument("--workers", type=_positive_int, default=1, help="worker processes; output does not depend on it")
    s.set_defaults(func=cmd_rounds)
    return p


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]) -> None:
    cp = configparser.ConfigParser()
    try:
        cp.read_string("[config]\n" + Path(args.config).read_text())
    except (OSError, configparser.Error) as e:
        raise UsageError(f"cannot read config: {e}") from None
    # re-parse so flags given on the command line win over the file
    sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    dests = {a.dest: a for a in sub._actions}
    given = {a.dest for a in sub._actions for opt in a.option_strings if opt in argv or any(x.startswith(opt + "=") for x in argv)}
    for key, value in cp["config"].items():
        dest = key.replace("-", "_")
        if key not in CONFIG_KEYS or dest not in dests:
            raise UsageError(f"unknown config key {key!r}")
        if dest in given:
            continue
        action = dests[dest]
        try:
            setattr(args, dest, action.type(value) if action.type else value)
        except argparse.ArgumentTypeError as e:
            raise UsageError(f"config key {key}: {e}") from None


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            _apply_config(parser, args, argv)
        if args.command == "sweep" and not args.n:
            raise UsageError("--n is required")
        if args.command == "threshold" and (args.n is None or args.ray is None):
            raise UsageError("--n and --ray are required")
        if args.command == "threshold" and not args.tol > 0:
            raise UsageError("--tol must be positive")
        return args.func(args)
    except UsageError as e:
        parser.exit(EXIT_USAGE, f"gen2sat {args.command}: error: {e}\n")
    except DimacsError as e:
        print(f"gen2sat {args.command}: invalid input: {e}", file=sys.stderr)
        return 1
    except (FormulaError, ValueError) as e:
        parser.exit(EXIT_USAGE, f"gen2sat {args.command}: error: {e}\n")
    return 0  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

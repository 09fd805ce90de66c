"""Command-line entry point.

    appa-ed solve    --problem problem1 --trials 20 --out runs/p1
    appa-ed oracle   --problem problem2
    appa-ed validate --problem problem1 --outputs 400,250,150 --tol 1e-6

Exit codes: 0 success / valid, 1 invalid solution or no feasible trial,
2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys

from .dispatch import (
    DEFAULT_RESIDUAL_TOL,
    DispatchError,
    LimitViolationError,
    ProblemFileError,
    ResidualViolationError,
    balance_residual,
    load_problem,
    total_cost,
    validate_solution,
)
from .harness import ExperimentConfig, load_preset, run_experiment
from .oracle import solve_lambda

EXIT_OK, EXIT_INVALID, EXIT_INPUT = 0, 1, 2

# flag dest -> (ExperimentConfig field, preset key)
_SOLVE_FIELDS = {
    "problem": ("problem_path", "problem"),
    "trials": ("trials", "trials"),
    "seed": ("seed", "seed"),
    "pop": ("population_size", "pop"),
    "generations": ("max_generations", "generations"),
    "max_runners": ("max_runners", "max_runners"),
    "stagnation": ("stagnation_threshold", "stagnation"),
    "penalty": ("penalty", "penalty"),
    "tol": ("residual_tol", "tol"),
    "out": ("out_dir", "out"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="appa-ed",
        description="Adaptive plant propagation for economic load dispatch.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run seeded APPA trials and compare with the oracle")
    solve.add_argument("--problem", help="problem file, or a bundled name (problem1, problem2)")
    solve.add_argument("--preset", help="preset name (problem1_paper, problem2_paper) or JSON file")
    solve.add_argument("--trials", type=int, help="independent runs, seeds seed..seed+trials-1 (default 1)")
    solve.add_argument("--seed", type=int, help="base seed (default 0)")
    solve.add_argument("--pop", type=int, help="population size (default 30)")
    solve.add_argument("--generations", type=int, help="generation budget (default 200)")
    solve.add_argument("--max-runners", type=int, help="runner cap per plant (default 200)")
    solve.add_argument("--stagnation", type=int, help="abandonment threshold (default 10)")
    solve.add_argument("--penalty", type=float, help="balance penalty weight, Rs/h per MW^2 (default 1e6)")
    solve.add_argument("--tol", type=float, help="residual tolerance in MW for feasibility (default 0.1)")
    solve.add_argument("--out", help="directory for trace CSVs and reports")
    solve.add_argument("--jobs", type=int, default=1, help="worker processes for trials")

    oracle = sub.add_parser("oracle", help="equal-incremental-cost reference dispatch")
    oracle.add_argument("--problem", required=True)
    oracle.add_argument("--json", action="store_true", help="print machine-readable output")

    validate = sub.add_parser("validate", help="check a dispatch against limits and balance")
    validate.add_argument("--problem", required=True)
    validate.add_argument("--outputs", required=True, help="comma-separated unit outputs in MW")
    validate.add_argument("--tol", type=float, default=DEFAULT_RESIDUAL_TOL)
    validate.add_argument("--json", action="store_true", help="print machine-readable output")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    preset = load_preset(args.preset) if args.preset else {}
    kwargs = {}
    for dest, (field_name, key) in _SOLVE_FIELDS.items():
        value = getattr(args, dest)
        if value is None:
            value = preset.get(key)
        if value is not None:
            kwargs[field_name] = value
    if "problem_path" not in kwargs:
        raise ProblemFileError("no problem given; use --problem or a preset that names one")
    return ExperimentConfig(**kwargs)


def cmd_solve(args) -> int:
    cfg = _experiment_config(args)
    report = run_experiment(cfg, jobs=args.jobs)
    print(report.to_text(), end="")
    return EXIT_OK if report.any_feasible else EXIT_INVALID


def cmd_oracle(args) -> int:
    problem = load_problem(args.problem)
    sol = solve_lambda(problem)
    if args.json:
        print(json.dumps({
            "outputs": sol.outputs.tolist(),
            "lambda": sol.lam,
            "cost": sol.cost,
            "binding": list(sol.binding),
        }))
        return EXIT_OK
    for i, (p, tag) in enumerate(zip(sol.outputs, sol.binding), start=1):
        print(f"P{i} = {p:.4f} MW  ({tag})")
    print(f"lambda = {sol.lam:.4f} Rs/MWh")
    print(f"cost = {sol.cost:.1f} Rs/h")
    return EXIT_OK


def _parse_outputs(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise ProblemFileError(f"--outputs must be comma-separated numbers, got {text!r}") from None


def cmd_validate(args) -> int:
    problem = load_problem(args.problem)
    outputs = _parse_outputs(args.outputs)
    if len(outputs) != len(problem):
        raise ProblemFileError(f"expected {len(problem)} outputs, got {len(outputs)}")
    cost = total_cost(problem, outputs)
    residual = balance_residual(problem, outputs)
    try:
        validate_solution(problem, outputs, args.tol)
        verdict, reason, code = "valid", "", EXIT_OK
    except (LimitViolationError, ResidualViolationError) as exc:
        verdict, reason, code = "invalid", str(exc), EXIT_INVALID
    if args.json:
        print(json.dumps({"cost": cost, "residual": residual, "verdict": verdict, "reason": reason}))
    else:
        print(f"cost = {cost:.1f} Rs/h")
        print(f"residual = {residual:.4f} MW")
        print(verdict + (f": {reason}" if reason else ""))
    return code


COMMANDS = {"solve": cmd_solve, "oracle": cmd_oracle, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DispatchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

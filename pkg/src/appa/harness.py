"""Multi-trial experiment runner: seeded APPA trials vs the lambda oracle."""

from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dispatch import (
    DEFAULT_PENALTY_WEIGHT,
    DEFAULT_RESIDUAL_TOL,
    DispatchError,
    DispatchProblem,
    PenaltyConfig,
    balance_residual,
    load_problem,
    penalized_objective,
    total_cost,
    validate_solution,
)
from .engine import AppaParams, RunTrace, run
from .oracle import solve_lambda

TRACE_HEADER = ("generation", "best_cost", "mean_cost", "residual")
PRESETS = ("problem1_paper", "problem2_paper")


@dataclass(frozen=True)
class ExperimentConfig:
    problem_path: str
    population_size: int = 30
    max_generations: int = 200
    max_runners: int = 200
    stagnation_threshold: int = 10
    seed: int = 0
    trials: int = 1
    penalty: float = DEFAULT_PENALTY_WEIGHT
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    out_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if self.seed < 0 or self.seed + self.trials - 1 >= 2**64:
            raise ValueError("seed range must fit in 64-bit unsigned integers")
        if not self.residual_tol >= 0:
            raise ValueError(f"residual tolerance must be non-negative, got {self.residual_tol}")
        PenaltyConfig(self.penalty)
        self.params(0)

    def params(self, trial: int) -> AppaParams:
        return AppaParams(
            population_size=self.population_size,
            max_generations=self.max_generations,
            max_runners=self.max_runners,
            stagnation_threshold=self.stagnation_threshold,
            seed=self.seed + trial,
        )


def load_preset(name: str) -> dict:
    """Read a shipped preset (``problem1_paper`` / ``problem2_paper``) or a JSON file."""
    if name in PRESETS:
        text = resources.files("appa.presets").joinpath(f"{name}.json").read_text()
    else:
        text = Path(name).read_text()
    return json.loads(text)


@dataclass
class TrialResult:
    trial: int
    seed: int
    outputs: list[float]
    cost: float
    penalized_cost: float
    residual: float
    feasible: bool
    gap: float
    trace: RunTrace | None = field(default=None, repr=False)


@dataclass
class ComparisonReport:
    problem: str
    demand: float
    config: dict
    oracle_outputs: list[float]
    oracle_cost: float
    oracle_lambda: float
    trials: list[TrialResult]

    @property
    def feasible_costs(self) -> list[float]:
        return [t.cost for t in self.trials if t.feasible]

    @property
    def any_feasible(self) -> bool:
        return bool(self.feasible_costs)

    def aggregate(self) -> dict:
        costs = self.feasible_costs
        if not costs:
            return {"best": None, "median": None, "worst": None, "best_gap": None}
        best = min(costs)
        return {
            "best": best,
            "median": statistics.median(costs),
            "worst": max(costs),
            "best_gap": (best - self.oracle_cost) / self.oracle_cost,
        }

    def to_dict(self) -> dict:
        trials = []
        for t in self.trials:
            d = asdict(t)
            d.pop("trace")
            trials.append(d)
        return {
            "problem": self.problem,
            "demand_mw": self.demand,
            "config": self.config,
            "oracle": {
                "outputs": self.oracle_outputs,
                "cost": self.oracle_cost,
                "lambda": self.oracle_lambda,
            },
            "aggregate": self.aggregate(),
            "feasible_trials": len(self.feasible_costs),
            "trials": trials,
        }

    def to_text(self) -> str:
        mw = lambda xs: ", ".join(f"{x:.4f}" for x in xs)
        agg = self.aggregate()
        lines = [
            f"problem: {self.problem} (demand {self.demand:.4f} MW, {len(self.oracle_outputs)} units)",
            f"oracle: cost {self.oracle_cost:.1f} Rs/h, lambda {self.oracle_lambda:.4f} Rs/MWh",
            f"oracle outputs (MW): {mw(self.oracle_outputs)}",
            "",
            f"{'trial':>5} {'seed':>8} {'cost Rs/h':>12} {'gap %':>9} {'residual MW':>12}  outputs (MW)",
        ]
        for t in self.trials:
            flag = "" if t.feasible else "  INFEASIBLE"
            lines.append(
                f"{t.trial:>5} {t.seed:>8} {t.cost:>12.1f} {100 * t.gap:>9.4f} "
                f"{t.residual:>12.4f}  {mw(t.outputs)}{flag}"
            )
        lines.append("")
        lines.append(f"feasible trials: {len(self.feasible_costs)}/{len(self.trials)}")
        if agg["best"] is not None:
            lines.append(
                f"cost best/median/worst: {agg['best']:.1f} / {agg['median']:.1f} / {agg['worst']:.1f} Rs/h"
            )
            lines.append(f"best gap vs oracle: {100 * agg['best_gap']:.4f} %")
        return "\n".join(lines) + "\n"


def _run_trial(problem: DispatchProblem, cfg: ExperimentConfig, trial: int) -> TrialResult:
    penalty = PenaltyConfig(cfg.penalty)
    params = cfg.params(trial)
    best, trace = run(
        lambda x: penalized_objective(problem, penalty, x),
        problem.search_space(),
        params,
        vectorized=True,
    )
    p = best.position
    try:
        validate_solution(problem, p, cfg.residual_tol)
        feasible = True
    except DispatchError:
        feasible = False
    return TrialResult(
        trial=trial,
        seed=params.seed,
        outputs=p.tolist(),
        cost=total_cost(problem, p),
        penalized_cost=best.objective,
        residual=balance_residual(problem, p),
        feasible=feasible,
        gap=float("nan"),
        trace=trace,
    )


def write_trace(path: Path, problem: DispatchProblem, trace: RunTrace) -> None:
    """CSV with the best/mean penalized objective and the best plant's residual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for g in trace.generations:
            w.writerow(
                (
                    g.generation,
                    repr(float(g.best_objective)),
                    repr(float(g.mean_objective)),
                    repr(balance_residual(problem, g.best_position)),
                )
            )


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ComparisonReport:
    problem = load_problem(cfg.problem_path)
    oracle = solve_lambda(problem)
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_trial, problem, cfg, i) for i in range(cfg.trials)]
            results = [f.result() for f in futures]
    else:
        results = [_run_trial(problem, cfg, i) for i in range(cfg.trials)]
    for r in results:
        r.gap = (r.cost - oracle.cost) / oracle.cost

    config = asdict(cfg)
    report = ComparisonReport(
        problem=str(cfg.problem_path),
        demand=problem.demand,
        config=config,
        oracle_outputs=oracle.outputs.tolist(),
        oracle_cost=oracle.cost,
        oracle_lambda=oracle.lam,
        trials=results,
    )
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        width = max(3, len(str(cfg.trials - 1)))
        for r in results:
            write_trace(out / f"trace_{r.trial:0{width}d}.csv", problem, r.trace)
        (out / "report.txt").write_text(report.to_text())
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report

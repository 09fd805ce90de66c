"""Economic load dispatch model: quadratic unit costs, power balance, unit limits.

Losses are neglected; all units and the load sit on one bus. The balance
equality is folded into the objective with a static quadratic penalty and
the unit limits become the search box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import SearchSpace

__all__ = [
    "DEFAULT_PENALTY_WEIGHT",
    "DEFAULT_RESIDUAL_TOL",
    "DispatchError",
    "DispatchProblem",
    "DispatchSolution",
    "GeneratorUnit",
    "InfeasibleDemandError",
    "LimitViolationError",
    "PenaltyConfig",
    "ProblemFileError",
    "ResidualViolationError",
    "balance_residual",
    "bundled_problem",
    "dump_problem",
    "load_problem",
    "make_problem",
    "parse_problem",
    "penalized_objective",
    "total_cost",
    "validate_solution",
]

DEFAULT_PENALTY_WEIGHT = 1e6
DEFAULT_RESIDUAL_TOL = 0.1
BUNDLED = ("problem1", "problem2")


class DispatchError(ValueError):
    pass


class InfeasibleDemandError(DispatchError):
    pass


class LimitViolationError(DispatchError):
    pass


class ResidualViolationError(DispatchError):
    pass


class ProblemFileError(DispatchError):
    """Malformed problem file; message names the line or field."""


@dataclass(frozen=True)
class GeneratorUnit:
    """Cost ``fixed + lin * P + quad * P**2`` (Rs/h) over ``p_min <= P <= p_max`` MW."""

    quad: float
    lin: float
    fixed: float
    p_min: float
    p_max: float

    def __post_init__(self):
        for name in ("quad", "lin", "fixed", "p_min", "p_max"):
            if not np.isfinite(getattr(self, name)):
                raise DispatchError(f"{name} must be finite, got {getattr(self, name)}")
        if self.p_min < 0:
            raise DispatchError(f"p_min must be non-negative, got {self.p_min}")
        if not self.p_min < self.p_max:
            raise DispatchError(f"p_min must be below p_max, got {self.p_min} >= {self.p_max}")
        if self.quad < 0:
            raise DispatchError(f"quad must be non-negative, got {self.quad}")

    def cost(self, p):
        return self.fixed + self.lin * p + self.quad * p * p

    def incremental_cost(self, p):
        return self.lin + 2.0 * self.quad * p


def _frozen(values) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DispatchProblem:
    units: tuple[GeneratorUnit, ...]
    demand: float

    def __post_init__(self):
        units = tuple(self.units)
        object.__setattr__(self, "units", units)
        if not units:
            raise DispatchError("a dispatch problem needs at least one unit")
        if not np.isfinite(self.demand):
            raise DispatchError(f"demand must be finite, got {self.demand}")
        lo = sum(u.p_min for u in units)
        hi = sum(u.p_max for u in units)
        if self.demand < lo:
            raise InfeasibleDemandError(
                f"demand {self.demand} MW is below the total lower limit {lo} MW"
            )
        if self.demand > hi:
            raise InfeasibleDemandError(
                f"demand {self.demand} MW exceeds the total upper limit {hi} MW"
            )

    def __len__(self) -> int:
        return len(self.units)

    @cached_property
    def quad(self) -> np.ndarray:
        return _frozen([u.quad for u in self.units])

    @cached_property
    def lin(self) -> np.ndarray:
        return _frozen([u.lin for u in self.units])

    @cached_property
    def fixed(self) -> np.ndarray:
        return _frozen([u.fixed for u in self.units])

    @cached_property
    def p_min(self) -> np.ndarray:
        return _frozen([u.p_min for u in self.units])

    @cached_property
    def p_max(self) -> np.ndarray:
        return _frozen([u.p_max for u in self.units])

    def search_space(self) -> SearchSpace:
        return SearchSpace(self.p_min, self.p_max)


@dataclass(frozen=True)
class PenaltyConfig:
    weight: float = DEFAULT_PENALTY_WEIGHT

    def __post_init__(self):
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise DispatchError(f"penalty weight must be positive and finite, got {self.weight}")


@dataclass(frozen=True)
class DispatchSolution:
    outputs: np.ndarray
    cost: float
    residual: float


def _outputs(problem: DispatchProblem, outputs) -> np.ndarray:
    p = np.asarray(outputs, dtype=float)
    if p.shape[-1:] != (len(problem),):
        raise DispatchError(
            f"expected {len(problem)} unit outputs, got shape {p.shape}"
        )
    return p


def total_cost(problem: DispatchProblem, outputs):
    """Total fuel cost in Rs/h. Accepts one dispatch or a batch ``(m, units)``."""
    p = _outputs(problem, outputs)
    per_unit = problem.fixed + problem.lin * p + problem.quad * p * p
    out = per_unit.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def balance_residual(problem: DispatchProblem, outputs):
    """Signed power mismatch ``sum(outputs) - demand`` in MW."""
    p = _outputs(problem, outputs)
    out = p.sum(axis=-1) - problem.demand
    return float(out) if out.ndim == 0 else out


def penalized_objective(problem: DispatchProblem, penalty: PenaltyConfig, outputs):
    residual = balance_residual(problem, outputs)
    return total_cost(problem, outputs) + penalty.weight * residual * residual


def validate_solution(
    problem: DispatchProblem, outputs, residual_tol: float = DEFAULT_RESIDUAL_TOL
) -> DispatchSolution:
    p = _outputs(problem, outputs)
    if p.ndim != 1:
        raise DispatchError("validate_solution takes a single dispatch")
    for i, (u, pi) in enumerate(zip(problem.units, p)):
        if pi < u.p_min:
            raise LimitViolationError(
                f"unit {i + 1} output {pi} MW is below p_min {u.p_min} MW"
            )
        if pi > u.p_max:
            raise LimitViolationError(
                f"unit {i + 1} output {pi} MW is above p_max {u.p_max} MW"
            )
    residual = balance_residual(problem, p)
    if not abs(residual) <= residual_tol:
        raise ResidualViolationError(
            f"balance residual {residual:.6g} MW exceeds tolerance {residual_tol} MW"
        )
    return DispatchSolution(outputs=p.copy(), cost=total_cost(problem, p), residual=residual)


# -- problem files ---------------------------------------------------------

_UNIT_KEYS = ("quad", "lin", "fixed", "p_min", "p_max")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(f"{where}: expected a number, got {value!r}")
    return float(value)


def parse_problem(text: str, source: str = "<string>") -> DispatchProblem:
    """Parse a JSON problem document.

    Expected shape::

        {"demand_mw": 800,
         "units": [{"quad": 0.004, "lin": 5.3, "fixed": 500,
                    "p_min": 350, "p_max": 450}, ...]}

    Feasibility errors from :class:`DispatchProblem` propagate unchanged.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(
            f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ProblemFileError(f"{source}: top level must be an object")
    if "demand_mw" not in doc:
        raise ProblemFileError(f"{source}: missing field 'demand_mw'")
    if "units" not in doc:
        raise ProblemFileError(f"{source}: missing field 'units'")
    demand = _number(doc["demand_mw"], f"{source}: field 'demand_mw'")
    raw_units = doc["units"]
    if not isinstance(raw_units, list):
        raise ProblemFileError(f"{source}: field 'units' must be an array")
    units = []
    for i, raw in enumerate(raw_units):
        where = f"{source}: units[{i}]"
        if not isinstance(raw, dict):
            raise ProblemFileError(f"{where}: expected an object")
        missing = [k for k in _UNIT_KEYS if k not in raw]
        if missing:
            raise ProblemFileError(f"{where}: missing field '{missing[0]}'")
        values = {k: _number(raw[k], f"{where}.{k}") for k in _UNIT_KEYS}
        try:
            units.append(GeneratorUnit(**values))
        except DispatchError as exc:
            raise ProblemFileError(f"{where}: {exc}") from None
    return DispatchProblem(units=tuple(units), demand=demand)


def dump_problem(problem: DispatchProblem) -> str:
    doc = {
        "demand_mw": problem.demand,
        "units": [{k: getattr(u, k) for k in _UNIT_KEYS} for u in problem.units],
    }
    return json.dumps(doc, indent=2) + "\n"


def bundled_problem(name: str) -> DispatchProblem:
    """Load one of the shipped test systems (``problem1`` or ``problem2``)."""
    if name not in BUNDLED:
        raise ProblemFileError(f"unknown bundled problem {name!r}; choose from {BUNDLED}")
    text = resources.files("appa.data").joinpath(f"{name}.json").read_text()
    return parse_problem(text, source=name)


def load_problem(path: str | Path) -> DispatchProblem:
    """Load a problem file; a bare bundled name such as ``problem1`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        return bundled_problem(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ProblemFileError(f"{path}: cannot read problem file ({exc.strerror})") from None
    return parse_problem(text, source=str(path))


def make_problem(units: Sequence[dict], demand: float) -> DispatchProblem:
    return DispatchProblem(units=tuple(GeneratorUnit(**u) for u in units), demand=demand)

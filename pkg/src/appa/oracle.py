"""Reference dispatch solvers used to check the metaheuristic.

``solve_lambda`` is the classical equal-incremental-cost dispatch: find the
system marginal cost lambda at which the limit-clamped unit outputs add up to
the demand. ``brute_force_check`` grids the feasible set directly and shares
no code with it beyond the cost function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import DispatchError, DispatchProblem, InfeasibleDemandError, total_cost

__all__ = [
    "BALANCE_TOL",
    "OracleSolution",
    "UnsupportedInstanceError",
    "brute_force_check",
    "solve_lambda",
]

BALANCE_TOL = 1e-6
MAX_BISECTIONS = 200


class UnsupportedInstanceError(DispatchError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    outputs: np.ndarray
    lam: float
    cost: float
    binding: tuple[str, ...]  # "at-lower" | "at-upper" | "interior"


def _dispatch_at(lam, quad, lin, lo, hi):
    return np.clip((lam - lin) / (2.0 * quad), lo, hi)


def _binding_tags(p, lo, hi) -> tuple[str, ...]:
    return tuple(
        "at-lower" if pi <= l else "at-upper" if pi >= h else "interior"
        for pi, l, h in zip(p, lo, hi)
    )


def solve_lambda(problem: DispatchProblem, balance_tol: float = BALANCE_TOL) -> OracleSolution:
    """Equal-incremental-cost dispatch by bisection on lambda.

    Total output is monotone non-decreasing in lambda, so bisection over
    ``[min incr(p_min), max incr(p_max)]`` always converges. Once the
    residual is within ``balance_tol`` the units that are strictly inside
    their limits are re-solved in closed form, which removes the leftover
    bisection error from lambda and the outputs.
    """
    quad, lin = problem.quad, problem.lin
    lo, hi = problem.p_min, problem.p_max
    if np.any(quad <= 0):
        i = int(np.flatnonzero(quad <= 0)[0])
        raise UnsupportedInstanceError(
            f"unit {i + 1} has quad coefficient {quad[i]}; only strictly convex units are supported"
        )
    demand = problem.demand
    if demand < lo.sum():
        raise InfeasibleDemandError(f"demand {demand} MW is below the total lower limit {lo.sum()} MW")
    if demand > hi.sum():
        raise InfeasibleDemandError(f"demand {demand} MW exceeds the total upper limit {hi.sum()} MW")

    incr_lo = lin + 2 * quad * lo
    incr_hi = lin + 2 * quad * hi
    if demand == lo.sum():
        p = lo.copy()
        lam = float(incr_lo.min())
        return OracleSolution(p, lam, total_cost(problem, p), ("at-lower",) * len(p))
    if demand == hi.sum():
        p = hi.copy()
        lam = float(incr_hi.max())
        return OracleSolution(p, lam, total_cost(problem, p), ("at-upper",) * len(p))

    lam_lo, lam_hi = float(incr_lo.min()), float(incr_hi.max())
    lam = 0.5 * (lam_lo + lam_hi)
    for _ in range(MAX_BISECTIONS):
        lam = 0.5 * (lam_lo + lam_hi)
        mismatch = _dispatch_at(lam, quad, lin, lo, hi).sum() - demand
        if abs(mismatch) <= balance_tol:
            break
        if mismatch < 0:
            lam_lo = lam
        else:
            lam_hi = lam
    else:
        raise RuntimeError(f"lambda bisection did not converge in {MAX_BISECTIONS} steps")

    p = _dispatch_at(lam, quad, lin, lo, hi)
    free = (p > lo) & (p < hi)
    if free.any():
        fixed_mw = p[~free].sum()
        inv = 1.0 / (2.0 * quad[free])
        lam_exact = (demand - fixed_mw + (lin[free] * inv).sum()) / inv.sum()
        p_exact = p.copy()
        p_exact[free] = (lam_exact - lin[free]) * inv
        # keep the refinement only if it leaves the binding set unchanged
        if np.all((p_exact[free] >= lo[free]) & (p_exact[free] <= hi[free])):
            p, lam = p_exact, float(lam_exact)
    return OracleSolution(
        outputs=p,
        lam=float(lam),
        cost=total_cost(problem, p),
        binding=_binding_tags(p, lo, hi),
    )


def brute_force_check(
    problem: DispatchProblem,
    grid_step: float,
    max_points: int = 200_000_000,
) -> tuple[np.ndarray, float]:
    """Exhaustive grid search over the feasible dispatch set.

    Every unit except the last is gridded over its limits at ``grid_step``
    (the upper limit is always included); the last unit takes up
    ``demand - sum(others)``, and points that push it outside its own
    limits are discarded. Returns the cheapest feasible grid point and its
    cost.
    """
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    if len(problem) == 1:
        p = np.array([problem.demand])
        return p, total_cost(problem, p)

    units = problem.units
    axes = []
    for u in units[:-1]:
        n = int(np.floor((u.p_max - u.p_min) / grid_step + 1e-9))
        ax = np.minimum(u.p_min + grid_step * np.arange(n + 1), u.p_max)
        if ax[-1] < u.p_max:
            ax = np.append(ax, u.p_max)
        axes.append(ax)
    sizes = [a.size for a in axes]
    if np.prod(sizes, dtype=np.float64) > max_points:
        raise ValueError(
            f"grid has {np.prod(sizes, dtype=np.float64):.0f} points, above the limit of "
            f"{max_points}; use a coarser step"
        )

    # costs are separable: tabulate MW and cost over every axis but the first
    rest_mw = np.zeros(1)
    rest_cost = np.zeros(1)
    for u, ax in zip(units[1:-1], axes[1:]):
        rest_mw = np.add.outer(rest_mw, ax).ravel()
        rest_cost = np.add.outer(rest_cost, u.cost(ax)).ravel()

    last = units[-1]
    best_cost = np.inf
    best = None
    for i, p0 in enumerate(axes[0]):
        p_last = problem.demand - p0 - rest_mw
        ok = (p_last >= last.p_min) & (p_last <= last.p_max)
        if not ok.any():
            continue
        cost = np.where(ok, units[0].cost(p0) + rest_cost + last.cost(p_last), np.inf)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = float(cost[k])
            best = (i, k)
    if best is None:
        raise InfeasibleDemandError(
            f"no feasible grid point at step {grid_step} MW for demand {problem.demand} MW"
        )
    i, k = best
    rest_idx = np.unravel_index(k, sizes[1:]) if len(sizes) > 1 else ()
    p = np.array(
        [axes[0][i]]
        + [ax[j] for ax, j in zip(axes[1:], rest_idx)]
        + [0.0]
    )
    p[-1] = problem.demand - p[:-1].sum()
    return p, total_cost(problem, p)

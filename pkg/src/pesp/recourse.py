"""First-stage feasibility/cost and second-stage revenue evaluation.

The second-stage program maximizes revenue from serving assigned demand
subject to per-facility capacity.  Because each customer is served from a
single facility and revenue is a flat rate per unit, the linear program
collapses per facility to r * min(capacity, assigned demand); the closed
form is the production evaluator and the LP is kept only as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleFirstStage
from .instance import Instance, ScenarioSet
from .mipmodel import MIPModel
from .work import WorkCounter


@dataclass(frozen=True)
class FirstStageSolution:
    """Configuration choice per facility (None = closed) and assignment per
    customer (None = unassigned)."""

    y: tuple[int | None, ...]
    u: tuple[int | None, ...]

    def open_facilities(self) -> list[int]:
        return [i for i, c in enumerate(self.y) if c is not None]


ALL_CLOSED = FirstStageSolution


def all_closed(inst: Instance) -> FirstStageSolution:
    return FirstStageSolution(
        y=(None,) * inst.n_facilities, u=(None,) * inst.n_customers
    )


def validate_solution(inst: Instance, sol: FirstStageSolution) -> None:
    if len(sol.y) != inst.n_facilities or len(sol.u) != inst.n_customers:
        raise InfeasibleFirstStage("solution dimensions do not match the instance")
    for i, c in enumerate(sol.y):
        if c is not None and not 0 <= c < len(inst.facilities[i].configs):
            raise InfeasibleFirstStage(f"facility {i} has no configuration {c}")
    for j, i in enumerate(sol.u):
        if i is None:
            continue
        if not 0 <= i < inst.n_facilities:
            raise InfeasibleFirstStage(f"customer {j} assigned to unknown facility {i}")
        if sol.y[i] is None:
            raise InfeasibleFirstStage(f"customer {j} assigned to closed facility {i}")


def first_stage_cost(inst: Instance, sol: FirstStageSolution) -> float:
    """Total opening plus assignment cost (nonnegative; the objective
    subtracts it)."""
    validate_solution(inst, sol)
    cost = 0.0
    for i, c in enumerate(sol.y):
        if c is not None:
            cost += inst.facilities[i].configs[c].open_cost
    for j, i in enumerate(sol.u):
        if i is not None:
            cost += inst.customers[j].assign_costs[i]
    return cost


def capacities_of(inst: Instance, sol: FirstStageSolution) -> np.ndarray:
    return np.array(
        [
            inst.facilities[i].configs[c].capacity if c is not None else 0.0
            for i, c in enumerate(sol.y)
        ]
    )


def recourse_value(
    inst: Instance,
    sol: FirstStageSolution,
    demand: np.ndarray,
    work: WorkCounter | None = None,
) -> float:
    """Optimal second-stage revenue for one demand vector."""
    validate_solution(inst, sol)
    if work is not None:
        work.charge_recourse(1)
    demand = np.asarray(demand, dtype=float)
    total = 0.0
    for i, c in enumerate(sol.y):
        if c is None:
            continue
        load = 0.0
        for j, fac in enumerate(sol.u):
            if fac == i:
                load += demand[j]
        total += min(inst.facilities[i].configs[c].capacity, load)
    return inst.revenue_rate * total


def recourse_values(
    inst: Instance,
    sol: FirstStageSolution,
    demands: np.ndarray,
    work: WorkCounter | None = None,
) -> np.ndarray:
    """Vectorized recourse over rows of a (N, J) demand array."""
    demands = np.atleast_2d(np.asarray(demands, dtype=float))
    if work is not None:
        work.charge_recourse(demands.shape[0])
    out = np.zeros(demands.shape[0])
    for i, c in enumerate(sol.y):
        if c is None:
            continue
        cols = [j for j, fac in enumerate(sol.u) if fac == i]
        if not cols:
            continue
        loads = demands[:, cols].sum(axis=1)
        out += np.minimum(inst.facilities[i].configs[c].capacity, loads)
    return inst.revenue_rate * out


def objective_value(
    inst: Instance,
    sol: FirstStageSolution,
    scenarios: ScenarioSet,
    work: WorkCounter | None = None,
) -> float:
    """-first_stage_cost + weighted expected recourse."""
    values = recourse_values(inst, sol, scenarios.demands, work)
    return float(-first_stage_cost(inst, sol) + scenarios.weights @ values)


def emit_extensive_form(inst: Instance, scenarios: ScenarioSet) -> MIPModel:
    """Deterministic-equivalent model over a finite scenario set.

    Binaries y_i_c / u_i_j, per-scenario flows f_i_j_k, objective
    -open -assign + sum_k weight_k * r * flow_k.
    """
    if len(scenarios) < 1:
        raise ValueError("need at least one scenario")
    model = MIPModel(name="two_stage_extensive")
    nI, nJ = inst.n_facilities, inst.n_customers
    r = inst.revenue_rate

    y_idx: dict[tuple[int, int], int] = {}
    for i, fac in enumerate(inst.facilities):
        for c, cfg in enumerate(fac.configs):
            y_idx[i, c] = model.add_variable(
                f"y_{i}_{c}", ub=1.0, is_integer=True, obj=-cfg.open_cost
            )
    u_idx: dict[tuple[int, int], int] = {}
    for i in range(nI):
        for j in range(nJ):
            u_idx[i, j] = model.add_variable(
                f"u_{i}_{j}", ub=1.0, is_integer=True,
                obj=-inst.customers[j].assign_costs[i],
            )
    f_idx: dict[tuple[int, int, int], int] = {}
    for k, wk in enumerate(scenarios.weights):
        for i in range(nI):
            for j in range(nJ):
                f_idx[i, j, k] = model.add_variable(
                    f"f_{i}_{j}_{k}", obj=r * float(wk)
                )

    for i, fac in enumerate(inst.facilities):
        model.add_constraint(
            f"cfg_{i}", [(y_idx[i, c], 1.0) for c in range(len(fac.configs))], "L", 1.0
        )
    for i, fac in enumerate(inst.facilities):
        for j in range(nJ):
            coeffs = [(u_idx[i, j], 1.0)]
            coeffs += [(y_idx[i, c], -1.0) for c in range(len(fac.configs))]
            model.add_constraint(f"opn_{i}_{j}", coeffs, "L", 0.0)
    for j in range(nJ):
        model.add_constraint(
            f"one_{j}", [(u_idx[i, j], 1.0) for i in range(nI)], "L", 1.0
        )
    for k in range(len(scenarios)):
        for i, fac in enumerate(inst.facilities):
            coeffs = [(f_idx[i, j, k], 1.0) for j in range(nJ)]
            coeffs += [
                (y_idx[i, c], -cfg.capacity) for c, cfg in enumerate(fac.configs)
            ]
            model.add_constraint(f"cap_{i}_{k}", coeffs, "L", 0.0)
        for i in range(nI):
            for j in range(nJ):
                d = float(scenarios.demands[k, j])
                coeffs = [(f_idx[i, j, k], 1.0)]
                if d > 0.0:
                    coeffs.append((u_idx[i, j], -d))
                model.add_constraint(f"dem_{i}_{j}_{k}", coeffs, "L", 0.0)
    return model


def solution_from_binaries(
    inst: Instance, values: dict[str, float], tol: float = 1e-4
) -> FirstStageSolution:
    """Recover a first-stage solution from named y/u variable values."""
    y: list[int | None] = [None] * inst.n_facilities
    u: list[int | None] = [None] * inst.n_customers
    for i, fac in enumerate(inst.facilities):
        for c in range(len(fac.configs)):
            if values.get(f"y_{i}_{c}", 0.0) > 1.0 - tol:
                y[i] = c
    for i in range(inst.n_facilities):
        for j in range(inst.n_customers):
            if values.get(f"u_{i}_{j}", 0.0) > 1.0 - tol:
                u[j] = i
    return FirstStageSolution(y=tuple(y), u=tuple(u))

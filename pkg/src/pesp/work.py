"""Machine-independent work accounting.

One work unit per recourse evaluation plus scenario-count units per
two-stage solve.  Budgets can cap any counter, the combined unit total, or
wall-clock time; exhausting a budget is a normal termination status.
"""

from __future__ import annotations

import time
from dataclasses import dataclass


@dataclass(frozen=True)
class WorkBudget:
    max_nodes: int | None = None
    max_f_evals: int | None = None
    max_subproblem_solves: int | None = None
    max_recourse_evals: int | None = None
    max_work_units: float | None = None
    max_wall_seconds: float | None = None

    def to_dict(self) -> dict:
        return {
            "max_nodes": self.max_nodes,
            "max_f_evals": self.max_f_evals,
            "max_subproblem_solves": self.max_subproblem_solves,
            "max_recourse_evals": self.max_recourse_evals,
            "max_work_units": self.max_work_units,
            "max_wall_seconds": self.max_wall_seconds,
        }

    @staticmethod
    def from_dict(doc: dict | None) -> "WorkBudget":
        if not doc:
            return WorkBudget()
        return WorkBudget(**{k: doc.get(k) for k in WorkBudget().to_dict()})


class WorkCounter:
    """Monotone counters for one computation."""

    __slots__ = ("nodes", "f_evals", "subproblem_solves", "solve_calls",
                 "recourse_evals", "memo_hits", "memo_misses", "_start")

    def __init__(self) -> None:
        self.nodes = 0
        self.f_evals = 0
        self.subproblem_solves = 0.0  # scenario-weighted
        self.solve_calls = 0
        self.recourse_evals = 0
        self.memo_hits = 0
        self.memo_misses = 0
        self._start = time.monotonic()

    def charge_solve(self, n_scenarios: int) -> None:
        self.subproblem_solves += n_scenarios
        self.solve_calls += 1

    def charge_recourse(self, n: int = 1) -> None:
        self.recourse_evals += n

    def charge_node(self) -> None:
        self.nodes += 1

    def charge_f_eval(self) -> None:
        self.f_evals += 1

    @property
    def work_units(self) -> float:
        return self.subproblem_solves + self.recourse_evals

    @property
    def wall_seconds(self) -> float:
        return time.monotonic() - self._start

    def merge(self, other: "WorkCounter") -> None:
        self.nodes += other.nodes
        self.f_evals += other.f_evals
        self.subproblem_solves += other.subproblem_solves
        self.solve_calls += other.solve_calls
        self.recourse_evals += other.recourse_evals
        self.memo_hits += other.memo_hits
        self.memo_misses += other.memo_misses

    def exceeded(self, budget: WorkBudget) -> str | None:
        """Name of the first exhausted limit, or None."""
        if budget.max_nodes is not None and self.nodes >= budget.max_nodes:
            return "nodes"
        if budget.max_f_evals is not None and self.f_evals >= budget.max_f_evals:
            return "f_evals"
        if (budget.max_subproblem_solves is not None
                and self.subproblem_solves >= budget.max_subproblem_solves):
            return "subproblem_solves"
        if (budget.max_recourse_evals is not None
                and self.recourse_evals >= budget.max_recourse_evals):
            return "recourse_evals"
        if budget.max_work_units is not None and self.work_units >= budget.max_work_units:
            return "work_units"
        if (budget.max_wall_seconds is not None
                and self.wall_seconds >= budget.max_wall_seconds):
            return "wall_seconds"
        return None

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "f_evals": self.f_evals,
            "subproblem_solves": self.subproblem_solves,
            "solve_calls": self.solve_calls,
            "recourse_evals": self.recourse_evals,
            "work_units": self.work_units,
            "memo_hits": self.memo_hits,
            "memo_misses": self.memo_misses,
        }

"""Probing cost, exact expected conditional recourse, and node bounds.

A search node restricts the admissible probe sets either by a pair
(never-probe set, must-probe set) or by a never-probe set plus disjoint
"probe at least one" groups.  Both bound formulas share one evaluation of
the expected conditional recourse over the unexcluded coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import PespError
from .instance import (
    Instance,
    enumerate_conditional_support,
    enumerate_support_projection,
)
from .stochprog import ExternalSolverConfig, solve_two_stage
from .work import WorkCounter

SINGLE = "single"
MULTI = "multi"


@dataclass(frozen=True)
class ProbeState:
    """Probing restrictions at a search node."""

    n: int
    s0: frozenset[int] = frozenset()
    s1: frozenset[int] = frozenset()
    groups: tuple[frozenset[int], ...] = ()
    mode: str = SINGLE

    def validate(self) -> None:
        if self.mode not in (SINGLE, MULTI):
            raise ValueError(f"unknown probing mode {self.mode!r}")
        universe = set(range(self.n))
        parts: list[frozenset[int]] = [self.s0]
        if self.mode == SINGLE:
            if self.groups:
                raise ValueError("single-element states carry no groups")
            parts.append(self.s1)
        else:
            if self.s1:
                raise ValueError("multi-element states carry no must-probe set")
            if any(not g for g in self.groups):
                raise ValueError("groups must be nonempty")
            parts.extend(self.groups)
        seen: set[int] = set()
        for part in parts:
            if not part <= universe:
                raise ValueError("state indices out of range")
            if part & seen:
                raise ValueError("state parts must be pairwise disjoint")
            seen |= part

    @property
    def free_set(self) -> frozenset[int]:
        """Coordinates not excluded from probing."""
        return frozenset(range(self.n)) - self.s0

    def is_leaf(self) -> bool:
        """True when exactly one probe set remains admissible."""
        if self.mode == SINGLE:
            return len(self.s0) + len(self.s1) == self.n
        covered = len(self.s0) + sum(len(g) for g in self.groups)
        return covered == self.n and all(len(g) == 1 for g in self.groups)

    def admits(self, probe_set: frozenset[int]) -> bool:
        """Whether a concrete probe set satisfies the node restrictions."""
        if probe_set & self.s0:
            return False
        if self.mode == SINGLE:
            return self.s1 <= probe_set
        return all(probe_set & g for g in self.groups)


@dataclass(frozen=True)
class BoundEstimate:
    mean: float
    stderr: float = 0.0
    batches: int = 1
    mode: str = "exact"  # "exact" | "statistical"

    def __post_init__(self) -> None:
        if self.mode == "exact" and self.stderr != 0.0:
            raise ValueError("exact estimates carry zero standard error")
        if self.stderr < 0.0:
            raise ValueError("standard error must be nonnegative")


@dataclass
class FEvalResult:
    """One expected-conditional-recourse evaluation plus the per-outcome or
    per-sample-point artifacts needed for branching scores."""

    estimate: BoundEstimate
    indices: tuple[int, ...]  # sorted coordinates the etas columns refer to
    etas: np.ndarray  # (m, len(indices)) observed probe-coordinate values
    weights: np.ndarray  # (m,) probabilities or sample weights, sum 1
    values: np.ndarray  # (m,) conditional-recourse values


FEvaluator = Callable[[frozenset, int], FEvalResult]


# ---------------------------------------------------------------------------
# probing cost


def alpha(inst: Instance, probe_set: Iterable[int]) -> float:
    """Modular cost of probing a set: the sum of per-customer probe costs."""
    costs = inst.probe_costs
    return float(sum(costs[j] for j in set(probe_set)))


# ---------------------------------------------------------------------------
# exact F


def f_exact_detailed(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    backend: str = "auto",
    *,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
) -> FEvalResult:
    """Exact expected conditional recourse over a finite-support instance.

    Enumerates the probed coordinates' outcomes; for each, solves the
    conditional two-stage program exactly and weights by its probability.
    """
    probe_set = frozenset(probe_set)
    outcomes = enumerate_support_projection(inst, probe_set)
    indices = tuple(sorted(probe_set))
    etas = np.zeros((len(outcomes), len(indices)))
    weights = np.zeros(len(outcomes))
    values = np.zeros(len(outcomes))
    for row, (observed, prob) in enumerate(outcomes):
        scenarios = enumerate_conditional_support(inst, observed)
        result = solve_two_stage(
            inst, scenarios, backend, work=work, external=external
        )
        etas[row] = [observed[j] for j in indices]
        weights[row] = prob
        values[row] = result.value
    mean = float(weights @ values)
    return FEvalResult(
        estimate=BoundEstimate(mean=mean, stderr=0.0, batches=1, mode="exact"),
        indices=indices,
        etas=etas,
        weights=weights,
        values=values,
    )


def f_exact(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    backend: str = "auto",
    *,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
) -> BoundEstimate:
    return f_exact_detailed(
        inst, probe_set, backend, work=work, external=external
    ).estimate


class ExactEvaluator:
    """Caching exact F evaluator; shared across a whole search tree."""

    mode = "exact"

    def __init__(
        self,
        inst: Instance,
        backend: str = "auto",
        *,
        work: WorkCounter | None = None,
        external: ExternalSolverConfig | None = None,
    ):
        self.inst = inst
        self.backend = backend
        self.work = work
        self.external = external
        self._cache: dict[frozenset, FEvalResult] = {}

    def __call__(self, probe_set: frozenset, stream: int = 0) -> FEvalResult:
        probe_set = frozenset(probe_set)
        if probe_set not in self._cache:
            if self.work is not None:
                self.work.charge_f_eval()
            self._cache[probe_set] = f_exact_detailed(
                self.inst,
                probe_set,
                self.backend,
                work=self.work,
                external=self.external,
            )
        return self._cache[probe_set]


# ---------------------------------------------------------------------------
# node bounds


def _estimate_pair(
    f_result: BoundEstimate, lb_shift: float, ub_shift: float
) -> tuple[BoundEstimate, BoundEstimate]:
    lb = BoundEstimate(
        mean=f_result.mean - lb_shift,
        stderr=f_result.stderr,
        batches=f_result.batches,
        mode=f_result.mode,
    )
    ub = BoundEstimate(
        mean=f_result.mean - ub_shift,
        stderr=f_result.stderr,
        batches=f_result.batches,
        mode=f_result.mode,
    )
    return lb, ub


def node_bounds_single(
    inst: Instance, state: ProbeState, f_eval: Callable[[frozenset], BoundEstimate]
) -> tuple[BoundEstimate, BoundEstimate]:
    """Bounds for a (never-probe, must-probe) node.

    lb = F(free) - alpha(free); ub = F(free) - alpha(must-probe); the F
    evaluation over the unexcluded coordinates is done once and shared.
    """
    state.validate()
    if state.mode != SINGLE:
        raise PespError("node_bounds_single requires a single-element state")
    free = state.free_set
    f_result = f_eval(free)
    return _estimate_pair(f_result, alpha(inst, free), alpha(inst, state.s1))


def node_bounds_multi(
    inst: Instance, state: ProbeState, f_eval: Callable[[frozenset], BoundEstimate]
) -> tuple[BoundEstimate, BoundEstimate]:
    """Bounds for a (never-probe, probe-at-least-one groups) node.

    The upper-bound probing credit charges each group its cheapest member,
    which is valid because probing costs are modular.
    """
    state.validate()
    if state.mode != MULTI:
        raise PespError("node_bounds_multi requires a multi-element state")
    free = state.free_set
    f_result = f_eval(free)
    costs = inst.probe_costs
    credit = float(sum(min(costs[j] for j in group) for group in state.groups))
    return _estimate_pair(f_result, alpha(inst, free), credit)

"""Best-bound search over probe sets.

Exact and fixed-sample modes fathom by bound and terminate with a proven
optimum or a budget-limited gap.  The internal-sampling mode never fathoms
(bounds are statistical): it explores by largest statistical upper bound
until the budget runs out, then aggregates a confidence upper bound over
the remaining leaves and reports candidate probe sets for later
certification.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    MULTI,
    SINGLE,
    BoundEstimate,
    ExactEvaluator,
    FEvalResult,
    ProbeState,
    alpha,
)
from .errors import PespError
from .instance import Instance, ScenarioSet
from .rng import stream_rng
from .sampling import (
    InternalEvaluator,
    InternalSamplingConfig,
    NodeStatBound,
    SaaEvaluator,
    global_stat_ub,
)
from .stochprog import ExternalSolverConfig, RMemo
from .work import WorkBudget, WorkCounter

_FATHOM_EPS = 1e-9
_BRANCH_STREAM = 0xB7


# ---------------------------------------------------------------------------
# modes


@dataclass(frozen=True)
class ExactMode:
    backend: str = "auto"

    kind = "exact"


@dataclass(frozen=True)
class ExternalSampleMode:
    sample: ScenarioSet
    backend: str = "auto"
    memo_capacity: int = RMemo.DEFAULT_CAPACITY
    use_memo: bool = True

    kind = "external"


@dataclass(frozen=True)
class InternalSampleMode:
    config: InternalSamplingConfig = field(default_factory=InternalSamplingConfig)
    backend: str = "auto"
    priority_spread: float = 2.0  # frontier priority mu + spread * stderr

    kind = "internal"


# ---------------------------------------------------------------------------
# nodes and report


@dataclass
class Node:
    id: int
    parent: int | None
    depth: int
    state: ProbeState
    credit: float  # probing-cost credit so that ub = F(free) + credit
    detail: FEvalResult
    lb: BoundEstimate
    ub: BoundEstimate

    @property
    def free_set(self) -> frozenset[int]:
        return self.state.free_set


def _encode_set(s: frozenset[int]) -> str:
    return ";".join(str(j) for j in sorted(s))


def _encode_groups(groups: tuple[frozenset[int], ...]) -> str:
    return "|".join(",".join(str(j) for j in sorted(g)) for g in groups)


@dataclass
class NodeRecord:
    id: int
    parent: int | None
    depth: int
    s0: str
    s1: str
    groups: str
    ub_mean: float
    ub_stderr: float
    lb_mean: float
    fresh_f_eval: bool
    work_units: float
    wall_seconds: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class LeafRecord:
    s0: str
    groups_or_s1: str
    credit: float
    mu: float
    stderr: float
    batches: int

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class SearchReport:
    status: str  # "optimal" | "budget_exhausted"
    budget_reason: str | None
    mode: str
    branching: str
    seed: int
    incumbent_set: frozenset[int] | None
    incumbent_value: float
    incumbent_certified: bool
    upper_bound: float
    confidence: float | None
    gap: float
    counters: WorkCounter
    node_log: list[NodeRecord]
    leaves: list[LeafRecord]
    candidates: list[tuple[frozenset[int], float]]
    memo_hit_rate: float | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "budget_reason": self.budget_reason,
            "mode": self.mode,
            "branching": self.branching,
            "seed": self.seed,
            "incumbent_set": sorted(self.incumbent_set)
            if self.incumbent_set is not None
            else None,
            "incumbent_value": self.incumbent_value,
            "incumbent_certified": self.incumbent_certified,
            "upper_bound": self.upper_bound,
            "confidence": self.confidence,
            "gap": self.gap,
            "counters": self.counters.to_dict(),
            "memo_hit_rate": self.memo_hit_rate,
            "node_count": len(self.node_log),
            "candidates": [
                {"set": sorted(s), "estimate": v} for s, v in self.candidates
            ],
        }


# ---------------------------------------------------------------------------
# branching scores


def score_candidates(
    inst: Instance,
    state: ProbeState,
    detail: FEvalResult,
    candidates: list[int],
    option: str = "covariance",
) -> tuple[dict[int, float], int]:
    """Importance score per candidate and the argmax (lowest index wins ties).

    The probing-side score is the upper-bound change from forcing the probe
    (minus the probe cost under modularity).  The exclusion-side score
    estimates the bound impact of never probing, from the artifacts of this
    node's F evaluation: either the high/low conditional value difference
    (two-point demands) or the sample covariance between the coordinate and
    the conditional value.  Both are min-max normalized; degenerate spreads
    normalize to zero.
    """
    if not candidates:
        raise ValueError("no candidates to score")
    costs = inst.probe_costs
    delta_plus = {j: -float(costs[j]) for j in candidates}

    col = {j: detail.indices.index(j) for j in candidates}
    w = detail.weights
    v = detail.values
    total_w = float(w.sum())
    fbar = float(w @ v) / total_w if total_w > 0 else 0.0
    delta_minus: dict[int, float] = {}
    for j in candidates:
        eta_j = detail.etas[:, col[j]]
        if option == "difference":
            high = eta_j > 0.0
            w_high = float(w[high].sum())
            w_low = float(w[~high].sum())
            if w_high == 0.0 or w_low == 0.0:
                delta_minus[j] = 0.0
            else:
                delta_minus[j] = float(w[high] @ v[high]) / w_high - float(
                    w[~high] @ v[~high]
                ) / w_low
        else:
            m_j = float(w @ eta_j) / total_w
            delta_minus[j] = float(w @ ((eta_j - m_j) * (v - fbar))) / total_w

    def normalize(scores: dict[int, float]) -> dict[int, float]:
        vals = list(scores.values())
        lo, hi = min(vals), max(vals)
        if hi - lo <= 0.0:
            return {j: 0.0 for j in scores}
        return {j: (s - lo) / (hi - lo) for j, s in scores.items()}

    zeta_plus = normalize(delta_plus)
    zeta_minus = normalize(delta_minus)
    psi = {j: zeta_plus[j] + zeta_minus[j] for j in candidates}
    j_star = min(candidates)
    for j in sorted(candidates):
        if psi[j] > psi[j_star]:
            j_star = j
    return psi, j_star


def partition_group(group: frozenset[int], psi: dict[int, float]) -> frozenset[int]:
    """Odd-ranked elements of the group sorted by score descending (index
    ascending on ties); balances the two sides' total importance."""
    if len(group) < 2:
        raise ValueError("cannot partition a group of fewer than two elements")
    ordered = sorted(group, key=lambda j: (-psi.get(j, 0.0), j))
    return frozenset(ordered[0::2])


def select_group(groups: tuple[frozenset[int], ...]) -> frozenset[int]:
    """Largest group; ties broken by smallest member index."""
    return max(groups, key=lambda g: (len(g), -min(g)))


# ---------------------------------------------------------------------------
# the search


def _branch_children_single(
    state: ProbeState, j: int
) -> tuple[ProbeState, ProbeState]:
    child_plus = ProbeState(
        n=state.n, s0=state.s0, s1=state.s1 | {j}, mode=SINGLE
    )
    child_minus = ProbeState(
        n=state.n, s0=state.s0 | {j}, s1=state.s1, mode=SINGLE
    )
    return child_plus, child_minus


def branch_single(state: ProbeState, j: int) -> tuple[ProbeState, ProbeState]:
    """(probe child, no-probe child) for a single-element node."""
    if j in state.s0 or j in state.s1:
        raise ValueError(f"index {j} is already fixed at this node")
    return _branch_children_single(state, j)


def branch_multi(
    state: ProbeState, target: frozenset[int], part: frozenset[int]
) -> tuple[ProbeState, ProbeState, ProbeState]:
    """Trichotomy children for splitting one group by a proper subset."""
    if target not in state.groups:
        raise ValueError("target is not a group of this node")
    if not part or part >= target:
        raise ValueError("the partition part must be a proper nonempty subset")
    rest = tuple(g for g in state.groups if g != target)
    other = target - part
    child1 = ProbeState(n=state.n, s0=state.s0 | part, groups=rest + (other,), mode=MULTI)
    child2 = ProbeState(n=state.n, s0=state.s0 | other, groups=rest + (part,), mode=MULTI)
    child3 = ProbeState(n=state.n, s0=state.s0, groups=rest + (part, other), mode=MULTI)
    return child1, child2, child3


def _credit(inst: Instance, state: ProbeState) -> float:
    """Probing-cost credit added to F(free) to form the node upper bound."""
    if state.mode == SINGLE:
        return -alpha(inst, state.s1)
    costs = inst.probe_costs
    return -float(sum(min(costs[j] for j in g) for g in state.groups))


def run_bnb(
    inst: Instance,
    mode: ExactMode | ExternalSampleMode | InternalSampleMode,
    branching: str = "single",
    budget: WorkBudget = WorkBudget(),
    seed: int = 0,
    *,
    score_option: str = "auto",
    confidence: float = 0.95,
    external: ExternalSolverConfig | None = None,
    workers: int = 1,
    work: WorkCounter | None = None,
    evaluator=None,
) -> SearchReport:
    """Branch-and-bound over probe sets; maximizes F(S) - alpha(S).

    An F evaluator may be passed in to share its cache across runs on the
    same instance (and, for fixed-sample searches, the same sample).
    """
    if branching not in ("random", "single", "multi"):
        raise ValueError(f"unknown branching {branching!r}")
    inst.validate()
    n = inst.n_customers
    counters = work if work is not None else WorkCounter()
    start = time.monotonic()

    memo: RMemo | None = None
    if evaluator is not None:
        memo = getattr(evaluator, "memo", None)
    elif mode.kind == "exact":
        evaluator = ExactEvaluator(
            inst, mode.backend, work=counters, external=external
        )
    elif mode.kind == "external":
        memo = RMemo(mode.memo_capacity) if mode.use_memo else None
        evaluator = SaaEvaluator(
            inst, mode.sample, memo, mode.backend, work=counters, external=external
        )
    else:
        evaluator = InternalEvaluator(
            inst,
            mode.config,
            mode.backend,
            seed=seed,
            work=counters,
            external=external,
            workers=workers,
        )
    statistical = mode.kind == "internal"
    structure = MULTI if branching == "multi" else SINGLE

    if score_option == "auto":
        all_bernoulli = all(c.distribution.is_finite for c in inst.customers)
        score_option = (
            "difference" if (all_bernoulli and not statistical) else "covariance"
        )

    node_log: list[NodeRecord] = []
    incumbent_set: frozenset[int] | None = None
    incumbent_value = -np.inf
    candidates: dict[frozenset[int], float] = {}
    terminal_leaves: list[Node] = []
    frontier: list[tuple[float, int, Node]] = []
    next_id = 0

    def make_node(
        parent: Node | None, state: ProbeState, reuse_detail: FEvalResult | None
    ) -> Node:
        nonlocal next_id, incumbent_set, incumbent_value
        state.validate()
        detail = (
            reuse_detail
            if reuse_detail is not None
            else evaluator(state.free_set, next_id)
        )
        credit = _credit(inst, state)
        est = detail.estimate
        lb = BoundEstimate(
            mean=est.mean - alpha(inst, state.free_set),
            stderr=est.stderr, batches=est.batches, mode=est.mode,
        )
        ub = BoundEstimate(
            mean=est.mean + credit,
            stderr=est.stderr, batches=est.batches, mode=est.mode,
        )
        node = Node(
            id=next_id,
            parent=parent.id if parent else None,
            depth=0 if parent is None else parent.depth + 1,
            state=state,
            credit=credit,
            detail=detail,
            lb=lb,
            ub=ub,
        )
        next_id += 1
        counters.charge_node()
        candidate = state.free_set
        if statistical:
            prev = candidates.get(candidate)
            if prev is None or lb.mean > prev:
                candidates[candidate] = lb.mean
            if lb.mean > incumbent_value:
                incumbent_value = lb.mean
                incumbent_set = candidate
        elif lb.mean > incumbent_value + 1e-15:
            incumbent_value = lb.mean
            incumbent_set = candidate
        node_log.append(
            NodeRecord(
                id=node.id,
                parent=node.parent,
                depth=node.depth,
                s0=_encode_set(state.s0),
                s1=_encode_set(state.s1),
                groups=_encode_groups(state.groups),
                ub_mean=ub.mean,
                ub_stderr=ub.stderr,
                lb_mean=lb.mean,
                fresh_f_eval=reuse_detail is None,
                work_units=counters.work_units,
                wall_seconds=time.monotonic() - start,
            )
        )
        return node

    def push(node: Node) -> None:
        if node.state.is_leaf():
            terminal_leaves.append(node)
            return
        priority = node.ub.mean
        if statistical:
            priority += mode.priority_spread * node.ub.stderr
        heapq.heappush(frontier, (-priority, node.id, node))

    root_state = ProbeState(n=n, mode=structure)
    root = make_node(None, root_state, None)
    push(root)

    budget_reason = counters.exceeded(budget)
    while frontier and budget_reason is None:
        _, _, node = heapq.heappop(frontier)
        if not statistical and node.ub.mean <= incumbent_value + _FATHOM_EPS:
            continue  # fathomed by bound

        state = node.state
        if structure == SINGLE:
            cand = sorted(state.free_set - state.s1)
            if branching == "random":
                rng = stream_rng(seed, _BRANCH_STREAM, node.id)
                j = int(rng.choice(cand))
            else:
                _, j = score_candidates(
                    inst, state, node.detail, cand, score_option
                )
            plus_state, minus_state = _branch_children_single(state, j)
            # the probe child reuses the parent's F evaluation: only the
            # probing-cost term of its bound changes
            push(make_node(node, plus_state, node.detail))
            push(make_node(node, minus_state, None))
        else:
            if not state.groups and not state.s0:
                # root dichotomy: probe nothing, or probe at least one
                none_state = ProbeState(
                    n=n, s0=frozenset(range(n)), mode=MULTI
                )
                all_state = ProbeState(
                    n=n, groups=(frozenset(range(n)),), mode=MULTI
                )
                push(make_node(node, none_state, None))
                push(make_node(node, all_state, node.detail))
            else:
                target = select_group(state.groups)
                cand = sorted(target)
                if branching == "random":
                    rng = stream_rng(seed, _BRANCH_STREAM, node.id)
                    perm = rng.permutation(len(cand))
                    psi = {j: float(len(cand) - p) for j, p in zip(cand, perm)}
                else:
                    psi, _ = score_candidates(
                        inst, state, node.detail, cand, score_option
                    )
                part = partition_group(target, psi)
                child1, child2, child3 = branch_multi(state, target, part)
                push(make_node(node, child1, None))
                push(make_node(node, child2, None))
                push(make_node(node, child3, node.detail))
        budget_reason = counters.exceeded(budget)

    # -- wrap up -------------------------------------------------------------
    open_nodes = [entry[2] for entry in frontier]
    status = "optimal" if budget_reason is None else "budget_exhausted"

    if statistical:
        leaf_nodes = open_nodes + terminal_leaves
        leaves = [
            LeafRecord(
                s0=_encode_set(p.state.s0),
                groups_or_s1=(
                    _encode_groups(p.state.groups)
                    if p.state.mode == MULTI
                    else _encode_set(p.state.s1)
                ),
                credit=p.credit,
                mu=p.detail.estimate.mean,
                stderr=p.detail.estimate.stderr,
                batches=p.detail.estimate.batches,
            )
            for p in leaf_nodes
        ]
        stat_leaves = [
            (
                p.credit,
                NodeStatBound(
                    mu=p.detail.estimate.mean,
                    stderr=p.detail.estimate.stderr,
                    batches=max(2, p.detail.estimate.batches),
                ),
            )
            for p in leaf_nodes
        ]
        upper = global_stat_ub(stat_leaves, confidence)
        ranked = sorted(candidates.items(), key=lambda kv: (-kv[1], sorted(kv[0])))
        return SearchReport(
            status=status,
            budget_reason=budget_reason,
            mode=mode.kind,
            branching=branching,
            seed=seed,
            incumbent_set=incumbent_set,
            incumbent_value=float(incumbent_value),
            incumbent_certified=False,
            upper_bound=float(upper),
            confidence=confidence,
            gap=float(upper - incumbent_value),
            counters=counters,
            node_log=node_log,
            leaves=leaves,
            candidates=ranked,
            memo_hit_rate=None,
        )

    open_ub = max((p.ub.mean for p in open_nodes), default=-np.inf)
    upper = max(incumbent_value, open_ub)
    hit_rate = memo.hit_rate if memo is not None else None
    return SearchReport(
        status=status,
        budget_reason=budget_reason,
        mode=mode.kind,
        branching=branching,
        seed=seed,
        incumbent_set=incumbent_set,
        incumbent_value=float(incumbent_value),
        incumbent_certified=True,
        upper_bound=float(upper),
        confidence=None,
        gap=float(upper - incumbent_value),
        counters=counters,
        node_log=node_log,
        leaves=[],
        candidates=[],
        memo_hit_rate=hit_rate,
    )

"""Greedy probing heuristic with computation reuse.

Each iteration scores every candidate addition from one precomputed matrix
of recourse values over a joint conditional sample, so scanning the
candidates solves no optimization problems: adding a coordinate is modeled
as the ability to distinguish clusters of its sampled values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import alpha
from .instance import Instance, SampleSpec, sample_conditional
from .recourse import FirstStageSolution, first_stage_cost, recourse_values
from .rng import stream_rng
from .sampling import LowerBoundResult, stat_lb
from .stochprog import ExternalSolverConfig, solve_two_stage
from .work import WorkCounter

_GREEDY_STREAM = 0x6E


@dataclass(frozen=True)
class GreedySpec:
    n_outer: int = 20  # outer sample / solution pool size per iteration
    n_inner: int = 20  # joint conditional sample per outer point
    n_select: int = 50  # scenarios per solution-selection solve
    clusters: int = 4
    weighted_clusters: bool = False  # weight clusters by size instead of 1/K

    def validate(self) -> None:
        if min(self.n_outer, self.n_inner, self.n_select, self.clusters) < 1:
            raise ValueError("greedy sample sizes must be >= 1")


@dataclass
class GreedyIterate:
    probe_set: frozenset[int]
    f_estimate: float
    net_value: float  # f_estimate - alpha(probe_set)
    chosen: int | None  # coordinate added after this iterate


@dataclass
class GreedyCache:
    """Reusable evaluation state of the last iterate (kept for inspection)."""

    solutions: list[FirstStageSolution]
    joint_demands: np.ndarray  # (n_outer, n_inner, J)
    q_matrix: np.ndarray  # (n_solutions, n_outer, n_inner)


@dataclass
class CandidatePool:
    iterates: list[GreedyIterate]
    cache: GreedyCache | None = None

    def __len__(self) -> int:
        return len(self.iterates)


def kmeans_1d(
    values: np.ndarray | list[float], k: int, seed: int = 0
) -> list[np.ndarray]:
    """Lloyd's algorithm on scalars with quantile initialization.

    Returns index arrays partitioning the input; empty clusters are dropped,
    and the result is an interval partition of the sorted values.  The seed
    is accepted for interface stability; the quantile initialization makes
    the procedure deterministic.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("values must be nonempty")
    if k < 1:
        raise ValueError("cluster count must be >= 1")
    distinct = np.unique(values)
    if len(distinct) <= k:
        return [np.where(values == d)[0] for d in distinct]

    centers = np.quantile(values, [(2 * i + 1) / (2 * k) for i in range(k)])
    assignment = None
    for _ in range(100):
        dist = np.abs(values[:, None] - centers[None, :])
        new_assignment = dist.argmin(axis=1)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(len(centers)):
            members = values[assignment == c]
            if members.size:
                centers[c] = members.mean()
    labels = [c for c in range(len(centers)) if np.any(assignment == c)]
    return [np.where(assignment == c)[0] for c in labels]


def greedy_run(
    inst: Instance,
    spec: GreedySpec | None = None,
    seed: int = 0,
    backend: str = "auto",
    *,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
    workers: int = 1,
) -> CandidatePool:
    """Grow the probe set one coordinate at a time, keeping every iterate.

    Per iterate: draw outer observations of the current set, build a pool of
    first-stage solutions from selection-sized conditional solves, draw a
    joint conditional sample, precompute all solution-by-scenario recourse
    values, and estimate the current set's value as the average over outer
    points of the best pooled solution.  Candidate additions reuse the same
    matrix with the candidate's sampled values clustered into at most K
    groups the probe would let us distinguish.
    """
    spec = spec or GreedySpec()
    spec.validate()
    inst.validate()
    n = inst.n_customers
    n1, n2 = spec.n_outer, spec.n_inner
    costs = inst.probe_costs

    current: frozenset[int] = frozenset()
    iterates: list[GreedyIterate] = []
    cache: GreedyCache | None = None
    pending_estimate: float | None = None  # Eq-22-style value for the final set

    for t in range(n):
        indices = sorted(current)

        def build_point(k: int):
            rng = stream_rng(seed, _GREEDY_STREAM, t, k)
            observed = {}
            for j in indices:
                observed[j] = float(
                    inst.customers[j].distribution.sample(rng, 1)[0]
                )
            select = sample_conditional(
                inst,
                observed,
                SampleSpec(n_outer=1, n_inner=spec.n_select, mode="mc", seed=seed),
                stream=(_GREEDY_STREAM, t, k, 0),
            )
            y_hat = solve_two_stage(
                inst, select, backend, work=work, external=external
            ).solution
            joint = sample_conditional(
                inst,
                observed,
                SampleSpec(n_outer=1, n_inner=n2, mode="mc", seed=seed),
                stream=(_GREEDY_STREAM, t, k, 1),
            )
            return y_hat, joint.demands

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                built = list(pool.map(build_point, range(n1)))
        else:
            built = [build_point(k) for k in range(n1)]
        solutions = [b[0] for b in built]
        joint = np.stack([b[1] for b in built])  # (n1, n2, J)

        flat = joint.reshape(n1 * n2, n)
        fs_cost = np.array([first_stage_cost(inst, y) for y in solutions])
        q_matrix = np.stack(
            [recourse_values(inst, y, flat, work).reshape(n1, n2) for y in solutions]
        )  # (n1 solutions, n1 outer, n2)

        # value of the current set: best pooled solution per outer point
        point_vals = (-fs_cost[:, None] + q_matrix.mean(axis=2)).max(axis=0)
        f_here = float(point_vals.mean())
        iterates.append(
            GreedyIterate(
                probe_set=current,
                f_estimate=f_here,
                net_value=f_here - alpha(inst, current),
                chosen=None,
            )
        )

        remaining = sorted(set(range(n)) - current)
        best_j = None
        best_z = -np.inf
        best_f = None
        for j in remaining:
            per_point = np.empty(n1)
            for k in range(n1):
                clusters = kmeans_1d(joint[k, :, j], spec.clusters, seed)
                cluster_vals = np.empty(len(clusters))
                weights = np.empty(len(clusters))
                for pos, members in enumerate(clusters):
                    cluster_mean = q_matrix[:, k, members].mean(axis=1)
                    cluster_vals[pos] = float((-fs_cost + cluster_mean).max())
                    weights[pos] = len(members)
                if spec.weighted_clusters:
                    per_point[k] = float(
                        (weights / weights.sum()) @ cluster_vals
                    )
                else:
                    per_point[k] = float(cluster_vals.mean())
            f_with_j = float(per_point.mean())
            z_j = f_with_j - alpha(inst, current | {j})
            if z_j > best_z:
                best_z, best_j, best_f = z_j, j, f_with_j
        iterates[-1].chosen = best_j
        current = current | {best_j}
        pending_estimate = best_f
        cache = GreedyCache(
            solutions=solutions, joint_demands=joint, q_matrix=q_matrix
        )

    # the full set enters the pool with its candidate-scan estimate: the loop
    # ends once every coordinate is probed, without re-sampling
    iterates.append(
        GreedyIterate(
            probe_set=current,
            f_estimate=float(pending_estimate),
            net_value=float(pending_estimate) - alpha(inst, current),
            chosen=None,
        )
    )
    return CandidatePool(iterates=iterates, cache=cache)


@dataclass
class FinalizedCandidate:
    probe_set: frozenset[int]
    lb: LowerBoundResult
    net_mean: float
    net_ci_lower: float

    def to_dict(self) -> dict:
        return {
            "set": sorted(self.probe_set),
            "f_mean": self.lb.estimate.mean,
            "f_stderr": self.lb.estimate.stderr,
            "f_ci_lower": self.lb.ci_lower,
            "net_mean": self.net_mean,
            "net_ci_lower": self.net_ci_lower,
            "alpha": self.lb.alpha,
        }


def finalize_candidates(
    inst: Instance,
    pool: CandidatePool,
    top: int = 10,
    lb_spec: SampleSpec | None = None,
    backend: str = "auto",
    *,
    seed: int = 0,
    alpha_level: float = 0.05,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
    workers: int = 1,
) -> list[FinalizedCandidate]:
    """Re-evaluate the most promising iterates with large-sample lower
    bounds; duplicates are evaluated once.  Best net estimate first."""
    if not pool.iterates:
        raise ValueError("empty candidate pool")
    lb_spec = lb_spec or SampleSpec(
        n_outer=25, n_inner=2000, n_select=100, mode="mc", seed=seed
    )
    ranked = sorted(pool.iterates, key=lambda it: -it.net_value)
    chosen: list[frozenset[int]] = []
    for it in ranked:
        if it.probe_set not in chosen:
            chosen.append(it.probe_set)
        if len(chosen) >= top:
            break

    results = []
    for pos, probe_set in enumerate(chosen):
        lb = stat_lb(
            inst,
            probe_set,
            lb_spec,
            backend,
            seed=seed + 7919 * pos,
            alpha=alpha_level,
            work=work,
            external=external,
            workers=workers,
        )
        cost = alpha(inst, probe_set)
        results.append(
            FinalizedCandidate(
                probe_set=probe_set,
                lb=lb,
                net_mean=lb.estimate.mean - cost,
                net_ci_lower=lb.ci_lower - cost,
            )
        )
    results.sort(key=lambda r: -r.net_mean)
    return results

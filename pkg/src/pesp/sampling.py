"""Statistical estimators: external SAA with replications, internal nested
conditional sampling (generic and small-support enumerated), the global
statistical upper bound over tree leaves, and statistical lower bounds for
candidate probe sets."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .bounds import BoundEstimate, FEvalResult
from .errors import InfiniteSupport
from .instance import (
    Instance,
    SampleSpec,
    ScenarioSet,
    _lhs_uniforms,
    enumerate_support_projection,
    sample_conditional,
    sample_joint,
)
from .rng import stream_rng
from .stats import normal_cdf, normal_ppf, t_upper_critical
from .stochprog import (
    ExternalSolverConfig,
    RMemo,
    TwoStageResult,
    make_memo_key,
    solve_two_stage,
)
from .recourse import first_stage_cost, recourse_values
from .work import WorkCounter

_OUTER_STREAM = 0x5E
_SELECT_STREAM = 0x5F
_EVAL_STREAM = 0x60


# ---------------------------------------------------------------------------
# external sampling (fixed-sample estimates)


def saa_f_detailed(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    sample: ScenarioSet,
    memo: RMemo | None = None,
    backend: str = "auto",
    *,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
) -> FEvalResult:
    """Fixed-sample estimate of the expected conditional recourse.

    Partitions the sample by equality of the probed-coordinate projection,
    solves each class as an equally weighted two-stage program (through the
    memo when one is supplied), and averages with class frequencies.
    """
    indices = tuple(sorted(probe_set))
    n = len(sample)
    groups: dict[tuple, list[int]] = {}
    for k in range(n):
        key = tuple(float(sample.demands[k, j]) for j in indices)
        groups.setdefault(key, []).append(k)

    etas = np.zeros((len(groups), len(indices)))
    weights = np.zeros(len(groups))
    values = np.zeros(len(groups))
    for row, (key, members) in enumerate(groups.items()):
        subset = sample.subset(members)

        def thunk() -> TwoStageResult:
            return solve_two_stage(
                inst, subset, backend, work=work, external=external
            )

        if memo is not None:
            result, hit = memo.lookup_or_solve(make_memo_key(members, n), thunk)
            if work is not None:
                if hit:
                    work.memo_hits += 1
                else:
                    work.memo_misses += 1
        else:
            result = thunk()
            if work is not None:
                work.memo_misses += 1
        etas[row] = key
        weights[row] = len(members) / n
        values[row] = result.value
    mean = float(weights @ values)
    return FEvalResult(
        estimate=BoundEstimate(mean=mean, stderr=0.0, batches=1, mode="exact"),
        indices=indices,
        etas=etas,
        weights=weights,
        values=values,
    )


def saa_f(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    sample: ScenarioSet,
    memo: RMemo | None = None,
    backend: str = "auto",
    *,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
) -> BoundEstimate:
    return saa_f_detailed(
        inst, probe_set, sample, memo, backend, work=work, external=external
    ).estimate


class SaaEvaluator:
    """Fixed-sample F evaluator with subset memoization, for tree search."""

    mode = "external"

    def __init__(
        self,
        inst: Instance,
        sample: ScenarioSet,
        memo: RMemo | None = None,
        backend: str = "auto",
        *,
        work: WorkCounter | None = None,
        external: ExternalSolverConfig | None = None,
    ):
        self.inst = inst
        self.sample = sample
        self.memo = memo
        self.backend = backend
        self.work = work
        self.external = external
        self._cache: dict[frozenset, FEvalResult] = {}

    def __call__(self, probe_set: frozenset, stream: int = 0) -> FEvalResult:
        probe_set = frozenset(probe_set)
        if probe_set not in self._cache:
            if self.work is not None:
                self.work.charge_f_eval()
            self._cache[probe_set] = saa_f_detailed(
                self.inst,
                probe_set,
                self.sample,
                self.memo,
                self.backend,
                work=self.work,
                external=self.external,
            )
        return self._cache[probe_set]


@dataclass
class ReplicationSummary:
    """Replicated sampled-problem values and their aggregate statistics."""

    values: list[float]
    sample_size: int
    mode: str
    seed: int
    alpha: float
    statuses: list[str] = field(default_factory=list)
    work_units: list[float] = field(default_factory=list)

    @property
    def replications(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def stddev(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1))

    @property
    def ci_upper(self) -> float:
        L = len(self.values)
        if L < 2:
            return self.mean
        return self.mean + t_upper_critical(L - 1, self.alpha) * self.stddev / np.sqrt(L)

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "sample_size": self.sample_size,
            "replications": self.replications,
            "mode": self.mode,
            "seed": self.seed,
            "alpha": self.alpha,
            "mean": self.mean,
            "stddev": self.stddev,
            "ci_upper": self.ci_upper,
            "statuses": list(self.statuses),
            "work_units": list(self.work_units),
        }


#: solve_fn(sample, replication_index) -> (value, status, work_units)
SampledSolveFn = Callable[[ScenarioSet, int], tuple[float, str, float]]


def saa_replicate(
    inst: Instance,
    n: int,
    replications: int,
    solve_fn: SampledSolveFn,
    seed: int,
    *,
    mode: str = "lhs",
    alpha: float = 0.05,
    workers: int = 1,
) -> ReplicationSummary:
    """Draw independent batches, solve the sampled problem per batch, and
    aggregate the replication mean, spread, and confidence upper bound.

    A budget-limited replication contributes its tree's best upper bound,
    which keeps the aggregate a valid statistical upper bound.
    """
    if replications < 2:
        raise ValueError("need at least two replications")
    spec = SampleSpec(n_outer=n, mode=mode, seed=seed)

    def run(ell: int) -> tuple[float, str, float]:
        sample = sample_joint(inst, spec, stream=(ell,))
        return solve_fn(sample, ell)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(replications)))
    else:
        results = [run(ell) for ell in range(replications)]
    values = [r[0] for r in results]
    statuses = [r[1] for r in results]
    work_units = [r[2] for r in results]
    return ReplicationSummary(
        values=values,
        sample_size=n,
        mode=mode,
        seed=seed,
        alpha=alpha,
        statuses=statuses,
        work_units=work_units,
    )


# ---------------------------------------------------------------------------
# internal sampling


@dataclass(frozen=True)
class NodeStatBound:
    """Statistical upper-bound estimate at a node: mean, batch-mean standard
    error, and batch count."""

    mu: float
    stderr: float
    batches: int

    def __post_init__(self) -> None:
        if self.stderr < 0.0:
            raise ValueError("standard error must be nonnegative")
        if self.stderr > 0.0 and self.batches < 2:
            raise ValueError("nonzero standard error needs at least two batches")


def _sample_eta(
    inst: Instance,
    indices: Sequence[int],
    count: int,
    rng: np.random.Generator,
    mode: str,
) -> np.ndarray:
    """(count, len(indices)) sample of the probed coordinates' marginals."""
    out = np.empty((count, len(indices)))
    if not indices:
        return out
    if mode == "lhs":
        u = _lhs_uniforms(rng, count, len(indices))
        for pos, j in enumerate(indices):
            out[:, pos] = np.asarray(
                inst.customers[j].distribution.ppf(u[:, pos]), dtype=float
            )
    else:
        for pos, j in enumerate(indices):
            out[:, pos] = inst.customers[j].distribution.sample(rng, count)
    return out


def internal_ub(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    spec: SampleSpec,
    backend: str = "auto",
    *,
    stream: tuple[int, ...] = (),
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
    workers: int = 1,
) -> tuple[NodeStatBound, FEvalResult]:
    """Nested-sampling upper-bound estimate of F over the probed set.

    Outer points are drawn in independent batches (LHS within a batch);
    each outer point is scored by solving a conditional sampled two-stage
    program.  The standard error comes from the batch averages.
    """
    spec.validate()
    indices = tuple(sorted(probe_set))
    batches = spec.batches
    if batches < 2:
        raise ValueError("need at least two batches for a standard error")
    if spec.n_outer % batches != 0:
        raise ValueError("outer sample size must be divisible by the batch count")
    per_batch = spec.n_outer // batches

    etas_list = []
    for b in range(batches):
        rng = stream_rng(spec.seed, _OUTER_STREAM, *stream, b)
        etas_list.append(_sample_eta(inst, indices, per_batch, rng, spec.mode))
    etas = np.vstack(etas_list) if indices else np.empty((spec.n_outer, 0))

    def solve_point(k: int) -> float:
        observed = {j: float(etas[k, pos]) for pos, j in enumerate(indices)}
        cond = sample_conditional(
            inst,
            observed,
            SampleSpec(n_outer=1, n_inner=spec.n_inner, mode="mc", seed=spec.seed),
            stream=(*stream, k),
        )
        return solve_two_stage(
            inst, cond, backend, work=work, external=external
        ).value

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.array(list(pool.map(solve_point, range(spec.n_outer))))
    else:
        values = np.array([solve_point(k) for k in range(spec.n_outer)])

    mu = float(values.mean())
    batch_means = values.reshape(batches, per_batch).mean(axis=1)
    stderr = float(np.std(batch_means, ddof=1) / np.sqrt(batches))
    bound = NodeStatBound(mu=mu, stderr=stderr, batches=batches)
    detail = FEvalResult(
        estimate=BoundEstimate(
            mean=mu, stderr=stderr, batches=batches, mode="statistical"
        ),
        indices=indices,
        etas=etas,
        weights=np.full(spec.n_outer, 1.0 / spec.n_outer),
        values=values,
    )
    return bound, detail


def internal_ub_enumerated(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    m_batches: int,
    n_inner: int,
    backend: str = "auto",
    *,
    seed: int = 0,
    stream: tuple[int, ...] = (),
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
    workers: int = 1,
) -> tuple[NodeStatBound, FEvalResult]:
    """Small-support variant: enumerate the probed outcomes exactly and
    estimate each conditional value with independent batches.

    mu = sum_k p_k * mean_i Rhat_{k,i};
    stderr = sqrt(sum_k p_k^2 * var(Rhat_k) / M).
    """
    if m_batches < 2:
        raise ValueError("need at least two batches")
    indices = tuple(sorted(probe_set))
    outcomes = enumerate_support_projection(inst, frozenset(probe_set))

    def solve_outcome(args: tuple[int, dict]) -> np.ndarray:
        k, observed = args
        vals = np.empty(m_batches)
        for i in range(m_batches):
            cond = sample_conditional(
                inst,
                observed,
                SampleSpec(n_outer=1, n_inner=n_inner, mode="mc", seed=seed),
                stream=(*stream, k, i),
            )
            vals[i] = solve_two_stage(
                inst, cond, backend, work=work, external=external
            ).value
        return vals

    tasks = [(k, observed) for k, (observed, _) in enumerate(outcomes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batch_vals = list(pool.map(solve_outcome, tasks))
    else:
        batch_vals = [solve_outcome(t) for t in tasks]

    probs = np.array([p for _, p in outcomes])
    means = np.array([v.mean() for v in batch_vals])
    variances = np.array([v.var(ddof=1) for v in batch_vals])
    mu = float(probs @ means)
    stderr = float(np.sqrt(probs @ (probs * variances) / m_batches))
    etas = np.array(
        [[observed[j] for j in indices] for observed, _ in outcomes]
    ).reshape(len(outcomes), len(indices))
    bound = NodeStatBound(mu=mu, stderr=stderr, batches=m_batches)
    detail = FEvalResult(
        estimate=BoundEstimate(
            mean=mu, stderr=stderr, batches=m_batches, mode="statistical"
        ),
        indices=indices,
        etas=etas,
        weights=probs,
        values=means,
    )
    return bound, detail


@dataclass(frozen=True)
class InternalSamplingConfig:
    """Per-node internal sampling parameters.

    The enumerated variant is used when every probed coordinate has finite
    support and both caps pass: set cap on the number of probed
    coordinates, support cap on the number of enumerated outcomes.
    """

    n_outer: int = 300
    outer_batches: int = 30
    n_inner: int = 100
    enum_batches: int = 30
    enum_set_cap: int = 8
    enum_support_cap: int = 256
    mode: str = "lhs"


class InternalEvaluator:
    """Fresh conditional sampling per node; estimates carry standard errors."""

    mode = "internal"

    def __init__(
        self,
        inst: Instance,
        config: InternalSamplingConfig,
        backend: str = "auto",
        *,
        seed: int = 0,
        work: WorkCounter | None = None,
        external: ExternalSolverConfig | None = None,
        workers: int = 1,
    ):
        self.inst = inst
        self.config = config
        self.backend = backend
        self.seed = seed
        self.work = work
        self.external = external
        self.workers = workers

    def _enumerable(self, probe_set: frozenset) -> bool:
        cfg = self.config
        if len(probe_set) > cfg.enum_set_cap:
            return False
        if any(
            not self.inst.customers[j].distribution.is_finite for j in probe_set
        ):
            return False
        return 2 ** len(probe_set) <= cfg.enum_support_cap

    def __call__(self, probe_set: frozenset, stream: int = 0) -> FEvalResult:
        probe_set = frozenset(probe_set)
        if self.work is not None:
            self.work.charge_f_eval()
        cfg = self.config
        if self._enumerable(probe_set):
            _, detail = internal_ub_enumerated(
                self.inst,
                probe_set,
                cfg.enum_batches,
                cfg.n_inner,
                self.backend,
                seed=self.seed,
                stream=(stream,),
                work=self.work,
                external=self.external,
                workers=self.workers,
            )
            return detail
        spec = SampleSpec(
            n_outer=cfg.n_outer,
            n_inner=cfg.n_inner,
            batches=cfg.outer_batches,
            mode=cfg.mode,
            seed=self.seed,
        )
        _, detail = internal_ub(
            self.inst,
            probe_set,
            spec,
            self.backend,
            stream=(stream,),
            work=self.work,
            external=self.external,
            workers=self.workers,
        )
        return detail


# ---------------------------------------------------------------------------
# global statistical upper bound


def global_stat_ub(
    leaves: Sequence[tuple[float, NodeStatBound]],
    confidence: float = 0.95,
    *,
    tol_scale: float = 1e-6,
) -> float:
    """Smallest u such that the product over leaves of P(leaf bound <= u)
    reaches the confidence level; leaves with zero spread act as point
    masses.  Solved by bisection with a guaranteed bracket."""
    if not leaves:
        raise ValueError("need at least one leaf")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    centers = np.array([c + b.mu for c, b in leaves])
    spreads = np.array([b.stderr for _, b in leaves])

    if np.all(spreads == 0.0):
        return float(centers.max())

    def coverage(u: float) -> float:
        prod = 1.0
        for center, s in zip(centers, spreads):
            if s == 0.0:
                if u < center:
                    return 0.0
                continue
            prod *= normal_cdf((u - center) / s)
            if prod == 0.0:
                return 0.0
        return prod

    if len(leaves) == 1 and spreads[0] > 0.0:
        return float(centers[0] + spreads[0] * normal_ppf(confidence))

    smax = float(spreads.max())
    lo = float(centers.min() - 10.0 * smax)
    hi = float(centers.max() + 10.0 * smax)
    while coverage(hi) < confidence:
        span = hi - lo
        hi += span
    tol = tol_scale * max(1.0, abs(lo), abs(hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if coverage(mid) >= confidence:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# statistical lower bound


@dataclass(frozen=True)
class LowerBoundResult:
    """Sampled lower-bound estimate of F over a candidate probe set."""

    estimate: BoundEstimate
    ci_lower: float
    alpha: float
    n_outer: int

    def to_dict(self) -> dict:
        return {
            "mean": self.estimate.mean,
            "stderr": self.estimate.stderr,
            "ci_lower": self.ci_lower,
            "alpha": self.alpha,
            "n_outer": self.n_outer,
        }


def stat_lb(
    inst: Instance,
    probe_set: frozenset[int] | set[int],
    spec: SampleSpec,
    backend: str = "auto",
    *,
    seed: int | None = None,
    alpha: float = 0.05,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
    workers: int = 1,
) -> LowerBoundResult:
    """Statistical lower bound on F for a candidate probe set.

    Per outer draw of the probed coordinates: pick a first-stage solution
    from a selection-sized conditional sample, then score that solution on
    an independent conditional sample with the closed-form recourse.  Any
    feasible selection keeps the estimate a valid lower bound; optimizing
    the selection just tightens it.
    """
    if spec.n_outer < 2:
        raise ValueError("need at least two outer draws for a confidence bound")
    indices = tuple(sorted(probe_set))
    the_seed = spec.seed if seed is None else seed

    def run_point(k: int) -> float:
        rng = stream_rng(the_seed, _OUTER_STREAM, 2, k)
        eta = _sample_eta(inst, indices, 1, rng, "mc")[0]
        observed = {j: float(eta[pos]) for pos, j in enumerate(indices)}
        select = sample_conditional(
            inst,
            observed,
            SampleSpec(n_outer=1, n_inner=spec.n_select, mode="mc", seed=the_seed),
            stream=(_SELECT_STREAM, k),
        )
        y_hat = solve_two_stage(
            inst, select, backend, work=work, external=external
        ).solution
        evaluate = sample_conditional(
            inst,
            observed,
            SampleSpec(n_outer=1, n_inner=spec.n_inner, mode="mc", seed=the_seed),
            stream=(_EVAL_STREAM, k),
        )
        vals = recourse_values(inst, y_hat, evaluate.demands, work)
        return float(-first_stage_cost(inst, y_hat) + vals.mean())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.array(list(pool.map(run_point, range(spec.n_outer))))
    else:
        values = np.array([run_point(k) for k in range(spec.n_outer)])

    mean = float(values.mean())
    stderr = float(np.std(values, ddof=1) / np.sqrt(spec.n_outer))
    ci = mean - t_upper_critical(spec.n_outer - 1, alpha) * stderr
    return LowerBoundResult(
        estimate=BoundEstimate(
            mean=mean, stderr=stderr, batches=spec.n_outer, mode="statistical"
        ),
        ci_lower=float(ci),
        alpha=alpha,
        n_outer=spec.n_outer,
    )

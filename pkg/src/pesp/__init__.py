"""Probing-enhanced stochastic programming: solver library, HTTP service,
and thin-client CLI for two-stage facility location with costly demand
probing."""

from .bounds import (
    BoundEstimate,
    ProbeState,
    alpha,
    f_exact,
    node_bounds_multi,
    node_bounds_single,
)
from .bnb import (
    ExactMode,
    ExternalSampleMode,
    InternalSampleMode,
    SearchReport,
    run_bnb,
)
from .heuristic import CandidatePool, GreedySpec, finalize_candidates, greedy_run, kmeans_1d
from .instance import (
    Bernoulli,
    Customer,
    Facility,
    FacilityConfig,
    Instance,
    MixedTriangular,
    SampleSpec,
    Scenario,
    ScenarioSet,
    enumerate_conditional_support,
    enumerate_support_projection,
    generate_instance,
    sample_conditional,
    sample_joint,
)
from .mipgen import build_na_mip, first_stage_ranges
from .recourse import (
    FirstStageSolution,
    emit_extensive_form,
    first_stage_cost,
    recourse_value,
)
from .sampling import (
    InternalSamplingConfig,
    LowerBoundResult,
    NodeStatBound,
    ReplicationSummary,
    global_stat_ub,
    internal_ub,
    internal_ub_enumerated,
    saa_f,
    saa_replicate,
    stat_lb,
)
from .stochprog import (
    ExternalSolverConfig,
    RMemo,
    TwoStageResult,
    make_memo_key,
    solve_two_stage,
)
from .work import WorkBudget, WorkCounter

__version__ = "0.1.0"

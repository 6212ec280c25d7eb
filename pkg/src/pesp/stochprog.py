"""Exact two-stage solvers over finite scenario sets, plus memoization.

Backends:

* ``enumerate`` -- pruned enumeration of configuration vectors x assignments;
  the simple oracle for tiny instances.
* ``hybrid`` -- enumerate configuration vectors ordered by an optimistic
  bound; accept the capacity-unconstrained greedy assignment when it is
  provably optimal, otherwise solve a small per-configuration MILP
  (LP relaxation first, both for a shortcut and for bound pruning).
* ``milp`` -- one monolithic MILP via scipy/HiGHS.
* ``external`` -- write MPS, run a configured solver command, parse its
  solution file.
* ``auto`` -- ``enumerate`` when the pruned search is tiny, else ``hybrid``.

All backends recompute the reported value from the recovered first-stage
solution with the closed-form recourse, so a result is exact for its
solution by construction.
"""

from __future__ import annotations

import hashlib
import itertools
import os
import re
import subprocess
import tempfile
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable

import warnings

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import csc_array

from .errors import BackendUnavailable, SizeLimitExceeded, SolverFailure
from .instance import Instance, ScenarioSet
from .mipmodel import MIPModel
from .recourse import (
    FirstStageSolution,
    all_closed,
    emit_extensive_form,
    first_stage_cost,
    objective_value,
    solution_from_binaries,
)
from .work import WorkCounter

BACKENDS = ("auto", "enumerate", "hybrid", "milp", "external")

#: pruned-enumeration node cap for the ``enumerate`` backend
ENUMERATE_NODE_CAP = 10_000_000

#: ``auto`` switches from enumerate to hybrid above this many combinations
_AUTO_ENUMERATE_LIMIT = 20_000

_HIGHS_OPTS = {"mip_rel_gap": 0.0, "mip_abs_gap": 0.0}


def _milp(*args, **kwargs):
    # scipy warns about HiGHS options outside its whitelist; they are
    # forwarded verbatim and honored
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Unrecognized options")
        return milp(*args, **kwargs)


@dataclass(frozen=True)
class TwoStageResult:
    value: float
    solution: FirstStageSolution
    scenario_count: int
    backend: str


@dataclass(frozen=True)
class ExternalSolverConfig:
    """Subprocess MIP solver: command template with {mps} and {sol}
    placeholders, a per-variable solution line regex, and a value check
    tolerance."""

    command: str | None = None
    solution_regex: str = r"^(\S+)\s+(-?[0-9.eE+-]+)\s*$"
    tolerance: float = 1e-5

    @staticmethod
    def from_env() -> "ExternalSolverConfig":
        return ExternalSolverConfig(command=os.environ.get("PESP_SOLVER_CMD"))


# ---------------------------------------------------------------------------
# generic MIPModel -> scipy bridge


def solve_mip_model(model: MIPModel) -> tuple[float, dict[str, float]]:
    """Solve an in-memory model with HiGHS; returns (objective, values)."""
    n = model.n_variables
    sign = -1.0 if model.sense == "max" else 1.0
    c = np.zeros(n)
    for idx, coef in model.objective.items():
        c[idx] = sign * coef
    lb = np.array([v.lb for v in model.variables])
    ub = np.array([v.ub for v in model.variables])
    integrality = np.array([1 if v.is_integer else 0 for v in model.variables])

    rows, cols, vals = [], [], []
    clo, chi = [], []
    for r, con in enumerate(model.constraints):
        for idx, coef in con.coeffs:
            rows.append(r)
            cols.append(idx)
            vals.append(coef)
        if con.sense == "L":
            clo.append(-np.inf)
            chi.append(con.rhs)
        elif con.sense == "G":
            clo.append(con.rhs)
            chi.append(np.inf)
        else:
            clo.append(con.rhs)
            chi.append(con.rhs)
    a = csc_array((vals, (rows, cols)), shape=(len(model.constraints), n))
    res = _milp(
        c,
        constraints=LinearConstraint(a, np.array(clo), np.array(chi)),
        integrality=integrality,
        bounds=Bounds(lb, ub),
        options=dict(_HIGHS_OPTS),
    )
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"HiGHS failed on model {model.name}: {res.message}")
    values = {v.name: float(res.x[i]) for i, v in enumerate(model.variables)}
    return sign * float(res.fun), values


# ---------------------------------------------------------------------------
# enumerate backend


def _config_vectors(inst: Instance) -> list[tuple[int | None, ...]]:
    options = [
        [None] + list(range(len(fac.configs))) for fac in inst.facilities
    ]
    return list(itertools.product(*options))


def _enumerate_backend(
    inst: Instance, scenarios: ScenarioSet, node_cap: int
) -> FirstStageSolution:
    demands, weights = scenarios.demands, scenarios.weights
    r = inst.revenue_rate
    dbar = weights @ demands
    assign = inst.assign_cost_matrix  # (I, J)
    nI, nJ = inst.n_facilities, inst.n_customers

    best_val = 0.0
    best = all_closed(inst)
    visited = 0
    for cfg in _config_vectors(inst):
        open_idx = [i for i, c in enumerate(cfg) if c is not None]
        open_cost = sum(
            inst.facilities[i].configs[c].open_cost
            for i, c in enumerate(cfg)
            if c is not None
        )
        theta = np.array(
            [
                inst.facilities[i].configs[cfg[i]].capacity if cfg[i] is not None else 0.0
                for i in range(nI)
            ]
        )
        # dominance pruning: assigning j to i can never pay off when the
        # assignment cost covers the largest possible expected revenue
        choices: list[list[int | None]] = []
        for j in range(nJ):
            opts: list[int | None] = [None]
            opts += [i for i in open_idx if assign[i, j] < r * dbar[j]]
            choices.append(opts)
        combos = 1
        for opts in choices:
            combos *= len(opts)
        visited += combos
        if visited > node_cap:
            raise SizeLimitExceeded(
                f"pruned enumeration exceeds the {node_cap} node cap"
            )
        for combo in itertools.product(*choices):
            cost = open_cost
            revenue = np.zeros(len(weights))
            for i in open_idx:
                cols = [j for j in range(nJ) if combo[j] == i]
                if cols:
                    cost += assign[i, cols].sum()
                    loads = demands[:, cols].sum(axis=1)
                    revenue += np.minimum(theta[i], loads)
            val = -cost + r * float(weights @ revenue)
            if val > best_val + 1e-15:
                best_val = val
                best = FirstStageSolution(y=tuple(cfg), u=tuple(combo))
    return best


# ---------------------------------------------------------------------------
# hybrid backend


def _per_config_arrays(
    inst: Instance,
    open_idx: list[int],
    theta: np.ndarray,
    demands: np.ndarray,
    weights: np.ndarray,
    active: list[int],
):
    """Sparse arrays for the fixed-configuration assignment MILP."""
    assign = inst.assign_cost_matrix
    r = inst.revenue_rate
    m, nj, nk = len(open_idx), len(active), demands.shape[0]
    nu, ns = m * nj, m * nk
    c = np.zeros(nu + ns)
    for a, i in enumerate(open_idx):
        c[a * nj:(a + 1) * nj] = assign[i, active]
    for a in range(m):
        c[nu + a * nk:nu + (a + 1) * nk] = -r * weights
    rows, cols, vals, hi = [], [], [], []
    rr = 0
    for pos in range(nj):
        for a in range(m):
            rows.append(rr)
            cols.append(a * nj + pos)
            vals.append(1.0)
        hi.append(1.0)
        rr += 1
    for a, i in enumerate(open_idx):
        for k in range(nk):
            rows.append(rr)
            cols.append(nu + a * nk + k)
            vals.append(1.0)
            hi.append(float(theta[i]))
            rr += 1
            rows.append(rr)
            cols.append(nu + a * nk + k)
            vals.append(1.0)
            for pos, j in enumerate(active):
                d = demands[k, j]
                if d > 0.0:
                    rows.append(rr)
                    cols.append(a * nj + pos)
                    vals.append(-float(d))
            hi.append(0.0)
            rr += 1
    a_mat = csc_array((vals, (rows, cols)), shape=(rr, nu + ns))
    var_ub = np.concatenate([np.ones(nu), np.full(ns, np.inf)])
    return c, a_mat, np.array(hi), var_ub, nu


def _assignment_from_u(
    inst: Instance, open_idx: list[int], active: list[int], u_flat: np.ndarray
) -> tuple[int | None, ...]:
    nj = len(active)
    u: list[int | None] = [None] * inst.n_customers
    for a, i in enumerate(open_idx):
        for pos, j in enumerate(active):
            if u_flat[a * nj + pos] > 0.5:
                u[j] = i
    return tuple(u)


def _hybrid_backend(inst: Instance, scenarios: ScenarioSet) -> FirstStageSolution:
    demands, weights = scenarios.demands, scenarios.weights
    r = inst.revenue_rate
    dbar = weights @ demands
    assign = inst.assign_cost_matrix
    nI, nJ = inst.n_facilities, inst.n_customers

    configs = _config_vectors(inst)
    entries = []
    for ci, cfg in enumerate(configs):
        open_mask = np.array([c is not None for c in cfg])
        if not open_mask.any():
            continue
        open_cost = sum(
            inst.facilities[i].configs[c].open_cost
            for i, c in enumerate(cfg)
            if c is not None
        )
        theta_sum = sum(
            inst.facilities[i].configs[c].capacity
            for i, c in enumerate(cfg)
            if c is not None
        )
        gains = np.maximum(0.0, (r * dbar[None, :] - assign[open_mask]).max(axis=0))
        ub = -open_cost + min(float(gains.sum()), r * theta_sum)
        entries.append((ub, ci))
    entries.sort(key=lambda e: (-e[0], e[1]))

    best_val = 0.0
    best_sol = all_closed(inst)
    for ub, ci in entries:
        if ub <= best_val + 1e-12:
            break
        cfg = configs[ci]
        open_idx = [i for i, c in enumerate(cfg) if c is not None]
        open_cost = sum(
            inst.facilities[i].configs[cfg[i]].open_cost for i in open_idx
        )
        theta = np.zeros(nI)
        for i in open_idx:
            theta[i] = inst.facilities[i].configs[cfg[i]].capacity

        # capacity-unconstrained greedy: provably optimal when its loads fit
        net = r * dbar[None, :] - assign
        mask = np.full((nI, nJ), -np.inf)
        mask[open_idx, :] = 0.0
        net = net + mask
        a_best = net.argmax(axis=0)
        take = net[a_best, np.arange(nJ)] > 0.0
        loads = np.zeros((nI, demands.shape[0]))
        for j in np.where(take)[0]:
            loads[a_best[j]] += demands[:, j]
        if np.all(loads.max(axis=1) <= theta + 0.0):
            val = -open_cost + float(net[a_best, np.arange(nJ)][take].sum())
            if val > best_val + 1e-15:
                u = tuple(
                    int(a_best[j]) if take[j] else None for j in range(nJ)
                )
                best_val = val
                best_sol = FirstStageSolution(y=tuple(cfg), u=u)
            continue

        # customers that can never pay off at any open facility stay out
        active = [j for j in range(nJ) if net[:, j].max() > 0.0]
        if not active:
            val = -open_cost
            if val > best_val + 1e-15:
                best_val = val
                best_sol = FirstStageSolution(
                    y=tuple(cfg), u=(None,) * nJ
                )
            continue
        c, a_mat, hi, var_ub, nu = _per_config_arrays(
            inst, open_idx, theta, demands, weights, active
        )
        lp = linprog(
            c,
            A_ub=a_mat,
            b_ub=hi,
            bounds=np.stack([np.zeros_like(var_ub), var_ub], axis=1),
            method="highs",
        )
        if lp.status != 0:
            raise SolverFailure(f"LP relaxation failed: {lp.message}")
        lp_val = -float(lp.fun) - open_cost
        if lp_val <= best_val + 1e-9:
            continue
        u_part = lp.x[:nu]
        if np.all(np.minimum(np.abs(u_part), np.abs(1.0 - u_part)) < 1e-9):
            u = _assignment_from_u(inst, open_idx, active, np.round(u_part))
            sol = FirstStageSolution(y=tuple(cfg), u=u)
            val = objective_value(inst, sol, scenarios)
            if val > best_val + 1e-15:
                best_val, best_sol = val, sol
            continue
        integrality = np.concatenate(
            [np.ones(nu), np.zeros(len(var_ub) - nu)]
        )
        res = _milp(
            c,
            constraints=LinearConstraint(a_mat, np.full(len(hi), -np.inf), hi),
            integrality=integrality,
            bounds=Bounds(np.zeros_like(var_ub), var_ub),
            options=dict(_HIGHS_OPTS),
        )
        if res.status != 0 or res.x is None:
            raise SolverFailure(f"per-configuration MILP failed: {res.message}")
        u = _assignment_from_u(inst, open_idx, active, res.x[:nu])
        sol = FirstStageSolution(y=tuple(cfg), u=u)
        val = objective_value(inst, sol, scenarios)
        if val > best_val + 1e-15:
            best_val, best_sol = val, sol
    return best_sol


# ---------------------------------------------------------------------------
# monolithic MILP backend


def _milp_backend(inst: Instance, scenarios: ScenarioSet) -> FirstStageSolution:
    demands, weights = scenarios.demands, scenarios.weights
    r = inst.revenue_rate
    nI, nJ, nK = inst.n_facilities, inst.n_customers, demands.shape[0]
    ny = sum(len(f.configs) for f in inst.facilities)
    nu, ns = nI * nJ, nI * nK
    n = ny + nu + ns

    y_off: list[int] = []
    pos = 0
    for fac in inst.facilities:
        y_off.append(pos)
        pos += len(fac.configs)

    c = np.zeros(n)
    pos = 0
    for fac in inst.facilities:
        for cfg in fac.configs:
            c[pos] = cfg.open_cost
            pos += 1
    for i in range(nI):
        c[ny + i * nJ:ny + (i + 1) * nJ] = inst.assign_cost_matrix[i]
    for k in range(nK):
        c[ny + nu + k * nI:ny + nu + (k + 1) * nI] = -r * weights[k]

    rows, cols, vals, hi = [], [], [], []
    rr = 0
    for i, fac in enumerate(inst.facilities):
        for cc in range(len(fac.configs)):
            rows.append(rr)
            cols.append(y_off[i] + cc)
            vals.append(1.0)
        hi.append(1.0)
        rr += 1
    for i, fac in enumerate(inst.facilities):
        for j in range(nJ):
            rows.append(rr)
            cols.append(ny + i * nJ + j)
            vals.append(1.0)
            for cc in range(len(fac.configs)):
                rows.append(rr)
                cols.append(y_off[i] + cc)
                vals.append(-1.0)
            hi.append(0.0)
            rr += 1
    for j in range(nJ):
        for i in range(nI):
            rows.append(rr)
            cols.append(ny + i * nJ + j)
            vals.append(1.0)
        hi.append(1.0)
        rr += 1
    for k in range(nK):
        for i, fac in enumerate(inst.facilities):
            rows.append(rr)
            cols.append(ny + nu + k * nI + i)
            vals.append(1.0)
            for cc, cfg in enumerate(fac.configs):
                rows.append(rr)
                cols.append(y_off[i] + cc)
                vals.append(-cfg.capacity)
            hi.append(0.0)
            rr += 1
            rows.append(rr)
            cols.append(ny + nu + k * nI + i)
            vals.append(1.0)
            for j in range(nJ):
                d = demands[k, j]
                if d > 0.0:
                    rows.append(rr)
                    cols.append(ny + i * nJ + j)
                    vals.append(-float(d))
            hi.append(0.0)
            rr += 1
    a_mat = csc_array((vals, (rows, cols)), shape=(rr, n))
    integrality = np.concatenate([np.ones(ny + nu), np.zeros(ns)])
    bounds = Bounds(
        np.zeros(n), np.concatenate([np.ones(ny + nu), np.full(ns, np.inf)])
    )
    res = _milp(
        c,
        constraints=LinearConstraint(a_mat, np.full(rr, -np.inf), hi),
        integrality=integrality,
        bounds=bounds,
        options=dict(_HIGHS_OPTS),
    )
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"extensive-form MILP failed: {res.message}")
    x = res.x
    y: list[int | None] = [None] * nI
    for i, fac in enumerate(inst.facilities):
        for cc in range(len(fac.configs)):
            if x[y_off[i] + cc] > 0.5:
                y[i] = cc
    u: list[int | None] = [None] * nJ
    for i in range(nI):
        for j in range(nJ):
            if x[ny + i * nJ + j] > 0.5:
                u[j] = i
    return FirstStageSolution(y=tuple(y), u=tuple(u))


# ---------------------------------------------------------------------------
# external backend


def _external_backend(
    inst: Instance, scenarios: ScenarioSet, config: ExternalSolverConfig
) -> FirstStageSolution:
    if not config.command:
        raise BackendUnavailable(
            "no external solver configured (set PESP_SOLVER_CMD or solver.command)"
        )
    model = emit_extensive_form(inst, scenarios)
    with tempfile.TemporaryDirectory(prefix="pesp_mip_") as tmp:
        mps_path = os.path.join(tmp, "model.mps")
        sol_path = os.path.join(tmp, "model.sol")
        with open(mps_path, "w") as f:
            f.write(model.to_mps())
        cmd = config.command.format(mps=mps_path, sol=sol_path)
        proc = subprocess.run(
            cmd, shell=True, capture_output=True, text=True, timeout=3600
        )
        if proc.returncode != 0:
            raise SolverFailure(
                f"solver command failed with exit {proc.returncode}",
                stdout=proc.stdout,
                stderr=proc.stderr,
            )
        if not os.path.exists(sol_path):
            raise SolverFailure(
                "solver produced no solution file", stdout=proc.stdout,
                stderr=proc.stderr,
            )
        with open(sol_path) as f:
            text = f.read()
    values: dict[str, float] = {}
    objective = None
    pattern = re.compile(config.solution_regex, re.MULTILINE)
    obj_pattern = re.compile(r"(?im)^\s*objective\s+(-?[0-9.eE+-]+)\s*$")
    m = obj_pattern.search(text)
    if m:
        objective = float(m.group(1))
    for name, value in pattern.findall(text):
        if name.lower() == "objective":
            continue
        values[name] = float(value)
    if not values:
        raise SolverFailure("no variable values parsed from solution file")
    sol = solution_from_binaries(inst, values)
    val = objective_value(inst, sol, scenarios)
    if objective is not None and abs(objective - val) > config.tolerance * max(
        1.0, abs(val)
    ):
        raise SolverFailure(
            f"solver objective {objective} disagrees with recomputed value {val}"
        )
    return sol


# ---------------------------------------------------------------------------
# entry point


def _enumeration_estimate(inst: Instance, n_scenarios: int) -> float:
    cfg_count = 1.0
    for fac in inst.facilities:
        cfg_count *= 1 + len(fac.configs)
    per_customer = 1 + inst.n_facilities
    return cfg_count * float(per_customer) ** inst.n_customers


def solve_two_stage(
    inst: Instance,
    scenarios: ScenarioSet,
    backend: str = "auto",
    *,
    work: WorkCounter | None = None,
    external: ExternalSolverConfig | None = None,
    node_cap: int = ENUMERATE_NODE_CAP,
) -> TwoStageResult:
    """Exact maximum of -first_stage_cost + E[recourse] over the scenarios."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if len(scenarios) < 1:
        raise ValueError("need at least one scenario")
    if work is not None:
        work.charge_solve(len(scenarios))
    chosen = backend
    if backend == "auto":
        chosen = (
            "enumerate"
            if _enumeration_estimate(inst, len(scenarios)) <= _AUTO_ENUMERATE_LIMIT
            else "hybrid"
        )
    if chosen == "enumerate":
        sol = _enumerate_backend(inst, scenarios, node_cap)
    elif chosen == "hybrid":
        sol = _hybrid_backend(inst, scenarios)
    elif chosen == "milp":
        sol = _milp_backend(inst, scenarios)
    else:
        sol = _external_backend(
            inst, scenarios, external or ExternalSolverConfig.from_env()
        )
    value = objective_value(inst, sol, scenarios)
    return TwoStageResult(
        value=value, solution=sol, scenario_count=len(scenarios), backend=chosen
    )


# ---------------------------------------------------------------------------
# memoization


MemoKey = "int | bytes"


def make_memo_key(indices: Iterable[int], n_total: int) -> int | bytes:
    """Canonical key for a scenario index subset: a bitmask when the sample
    has at most 64 points, else a 128-bit digest of the sorted index list."""
    idx = sorted(int(i) for i in indices)
    if n_total <= 64:
        key = 0
        for i in idx:
            key |= 1 << i
        return key
    arr = np.asarray(idx, dtype=np.uint32)
    return hashlib.blake2b(arr.tobytes(), digest_size=16).digest()


class RMemo:
    """Bounded LRU cache of solved subproblem values keyed by scenario
    subset; thread-safe, duplicate concurrent solves are permitted."""

    DEFAULT_CAPACITY = 10_000

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("memo capacity must be >= 1")
        self.capacity = capacity
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def lookup_or_solve(
        self, key: int | bytes, thunk: Callable[[], TwoStageResult]
    ) -> tuple[TwoStageResult, bool]:
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key], True
        result = thunk()
        with self._lock:
            self.misses += 1
            if key in self._data:
                # a concurrent solve won the race; keep the stored result so
                # repeated lookups stay bit-identical
                self._data.move_to_end(key)
                return self._data[key], False
            self._data[key] = result
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)
        return result, False

    def __len__(self) -> int:
        return len(self._data)

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

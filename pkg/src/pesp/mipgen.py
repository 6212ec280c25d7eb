"""Nonanticipative big-M formulation over the full finite outcome space.

This is the comparison baseline: probe indicators x_j plus a copy of the
first-stage variables per outcome, with two linking constraints for every
pair of distinct outcomes and every first-stage variable.  The big-M value
for a pair is the variable range divided by the smallest nonzero coordinate
difference of the pair, so probing any distinguishing coordinate
deactivates the equality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContinuousUnsupported, SupportTooLarge
from .instance import Instance
from .mipmodel import MIPModel

#: refuse to build beyond this many positive-probability outcomes
DEFAULT_SUPPORT_CAP = 2 ** 12


def first_stage_ranges(inst: Instance) -> np.ndarray:
    """Range of each first-stage variable: all binary here, so all ones.

    Order: configuration indicators facility-major, then assignment
    indicators facility-major (matching the per-outcome variable layout).
    """
    p = sum(len(f.configs) for f in inst.facilities)
    p += inst.n_facilities * inst.n_customers
    return np.ones(p)


def _joint_support(inst: Instance, cap: int) -> list[tuple[np.ndarray, float]]:
    supports = []
    for cust in inst.customers:
        if not cust.distribution.is_finite:
            raise ContinuousUnsupported(
                "the nonanticipative formulation needs finite demand support"
            )
        entries = [(v, p) for v, p in cust.distribution.support() if p > 0.0]
        supports.append(entries)
    count = math.prod(len(s) for s in supports)
    if count > cap:
        raise SupportTooLarge(
            f"joint support has {count} outcomes, above the cap of {cap}"
        )
    outcomes = []
    for combo in itertools.product(*supports):
        vec = np.array([v for v, _ in combo])
        prob = math.prod(p for _, p in combo)
        outcomes.append((vec, prob))
    return outcomes


@dataclass
class NaMipMetadata:
    n_outcomes: int
    n_pairs: int
    n_first_stage: int
    n_variables: int
    n_constraints: int
    n_linking_constraints: int
    big_m_min: float
    big_m_max: float
    variable_names: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "n_outcomes": self.n_outcomes,
            "n_pairs": self.n_pairs,
            "n_first_stage": self.n_first_stage,
            "n_variables": self.n_variables,
            "n_constraints": self.n_constraints,
            "n_linking_constraints": self.n_linking_constraints,
            "big_m_min": self.big_m_min,
            "big_m_max": self.big_m_max,
            "variable_names": self.variable_names,
        }


def build_na_mip(
    inst: Instance, support_cap: int = DEFAULT_SUPPORT_CAP
) -> tuple[MIPModel, NaMipMetadata]:
    """Big-M model whose optimum is the best net probing value.

    Probing costs are subtracted in the objective, consistent with the
    net-value problem the search solves.
    """
    inst.validate()
    outcomes = _joint_support(inst, support_cap)
    nI, nJ = inst.n_facilities, inst.n_customers
    r = inst.revenue_rate
    model = MIPModel(name="nonanticipative_bigm")

    x_idx = [
        model.add_variable(f"x_{j}", ub=1.0, is_integer=True,
                           obj=-inst.customers[j].probe_cost)
        for j in range(nJ)
    ]

    y_idx: dict[tuple[int, int, int], int] = {}
    u_idx: dict[tuple[int, int, int], int] = {}
    f_idx: dict[tuple[int, int, int], int] = {}
    for h, (_, prob) in enumerate(outcomes):
        for i, fac in enumerate(inst.facilities):
            for c, cfg in enumerate(fac.configs):
                y_idx[i, c, h] = model.add_variable(
                    f"y_{i}_{c}_h{h}", ub=1.0, is_integer=True,
                    obj=-prob * cfg.open_cost,
                )
        for i in range(nI):
            for j in range(nJ):
                u_idx[i, j, h] = model.add_variable(
                    f"u_{i}_{j}_h{h}", ub=1.0, is_integer=True,
                    obj=-prob * inst.customers[j].assign_costs[i],
                )
        for i in range(nI):
            for j in range(nJ):
                f_idx[i, j, h] = model.add_variable(
                    f"f_{i}_{j}_h{h}", obj=prob * r
                )

    for h, (demand, _) in enumerate(outcomes):
        for i, fac in enumerate(inst.facilities):
            model.add_constraint(
                f"cfg_{i}_h{h}",
                [(y_idx[i, c, h], 1.0) for c in range(len(fac.configs))],
                "L", 1.0,
            )
            for j in range(nJ):
                coeffs = [(u_idx[i, j, h], 1.0)]
                coeffs += [
                    (y_idx[i, c, h], -1.0) for c in range(len(fac.configs))
                ]
                model.add_constraint(f"opn_{i}_{j}_h{h}", coeffs, "L", 0.0)
        for j in range(nJ):
            model.add_constraint(
                f"one_{j}_h{h}",
                [(u_idx[i, j, h], 1.0) for i in range(nI)],
                "L", 1.0,
            )
        for i, fac in enumerate(inst.facilities):
            coeffs = [(f_idx[i, j, h], 1.0) for j in range(nJ)]
            coeffs += [
                (y_idx[i, c, h], -cfg.capacity)
                for c, cfg in enumerate(fac.configs)
            ]
            model.add_constraint(f"cap_{i}_h{h}", coeffs, "L", 0.0)
            for j in range(nJ):
                coeffs = [(f_idx[i, j, h], 1.0)]
                if demand[j] > 0.0:
                    coeffs.append((u_idx[i, j, h], -float(demand[j])))
                model.add_constraint(f"dem_{i}_{j}_h{h}", coeffs, "L", 0.0)

    # first-stage variable list per outcome, in the documented range order
    def first_stage_vars(h: int) -> list[int]:
        out = []
        for i, fac in enumerate(inst.facilities):
            out += [y_idx[i, c, h] for c in range(len(fac.configs))]
        for i in range(nI):
            out += [u_idx[i, j, h] for j in range(nJ)]
        return out

    ranges = first_stage_ranges(inst)
    n_linking = 0
    big_ms: list[float] = []
    pairs = list(itertools.combinations(range(len(outcomes)), 2))
    for h1, h2 in pairs:
        d1, d2 = outcomes[h1][0], outcomes[h2][0]
        diff = np.abs(d1 - d2)
        nonzero = diff[diff > 0.0]
        eps = float(nonzero.min())
        vars1, vars2 = first_stage_vars(h1), first_stage_vars(h2)
        probe_terms = [
            (x_idx[j], -float(diff[j]))
            for j in range(nJ)
            if diff[j] > 0.0
        ]
        for pos, (v1, v2) in enumerate(zip(vars1, vars2)):
            big_m = float(ranges[pos]) / eps
            big_ms.append(big_m)
            scaled = [(xj, coef * big_m) for xj, coef in probe_terms]
            model.add_constraint(
                f"na_{h1}_{h2}_{pos}_a",
                [(v1, 1.0), (v2, -1.0)] + scaled,
                "L", 0.0,
            )
            model.add_constraint(
                f"na_{h1}_{h2}_{pos}_b",
                [(v1, -1.0), (v2, 1.0)] + scaled,
                "L", 0.0,
            )
            n_linking += 2

    names = {"probe": "x_j", "config": "y_i_c_h", "assign": "u_i_j_h", "flow": "f_i_j_h"}
    meta = NaMipMetadata(
        n_outcomes=len(outcomes),
        n_pairs=len(pairs),
        n_first_stage=len(ranges),
        n_variables=model.n_variables,
        n_constraints=len(model.constraints),
        n_linking_constraints=n_linking,
        big_m_min=min(big_ms) if big_ms else 0.0,
        big_m_max=max(big_ms) if big_ms else 0.0,
        variable_names=names,
    )
    return model, meta


def fix_probe_set(model: MIPModel, probe_set: frozenset[int] | set[int]) -> MIPModel:
    """Copy of the model with the probe indicators pinned to a given set."""
    import copy

    fixed = copy.deepcopy(model)
    for idx, var in enumerate(fixed.variables):
        if var.name.startswith("x_"):
            j = int(var.name[2:])
            value = 1.0 if j in probe_set else 0.0
            fixed.variables[idx] = type(var)(
                name=var.name, lb=value, ub=value, is_integer=var.is_integer
            )
    return fixed

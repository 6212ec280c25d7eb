"""Facility-location instance model, demand distributions, and sampling.

Demands are mutually independent across customers.  Probing a customer
reveals that customer's demand before first-stage decisions; conditioning on
a set of observed demands therefore fixes those coordinates and leaves the
rest at their marginals.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import InfiniteSupport, ObservationOutOfSupport, SizeLimitExceeded
from .rng import stream_rng

FORMAT_VERSION = 1

#: refuse conditional-support enumerations beyond this many scenarios
ENUMERATION_CAP = 2 ** 22

_SUPPORT_TOL = 1e-9


# ---------------------------------------------------------------------------
# demand distributions


@dataclass(frozen=True)
class Bernoulli:
    """Two-point demand: 0 with probability rho, else the nominal value."""

    rho: float
    nominal: float

    kind = "bernoulli"
    is_finite = True

    def validate(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        if self.nominal <= 0.0:
            raise ValueError(f"nominal demand must be positive, got {self.nominal}")

    def mean(self) -> float:
        return (1.0 - self.rho) * self.nominal

    def support(self) -> list[tuple[float, float]]:
        """(value, probability) pairs, low outcome first."""
        return [(0.0, self.rho), (self.nominal, 1.0 - self.rho)]

    def in_support(self, x: float) -> bool:
        if abs(x) <= _SUPPORT_TOL:
            return self.rho > 0.0
        if abs(x - self.nominal) <= _SUPPORT_TOL * max(1.0, self.nominal):
            return self.rho < 1.0
        return False

    def ppf(self, u: np.ndarray | float) -> np.ndarray | float:
        return np.where(np.asarray(u) < self.rho, 0.0, self.nominal)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.ppf(rng.random(n)), dtype=float)

    def params(self) -> dict:
        return {"rho": self.rho, "nominal": self.nominal}


def _tri_cdf(x: np.ndarray, a: float, m: float, b: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if b <= a:
        return np.where(x >= a, 1.0, 0.0)
    out = np.zeros_like(x)
    left = (x > a) & (x <= m)
    if m > a:
        out[left] = (x[left] - a) ** 2 / ((b - a) * (m - a))
    right = (x > m) & (x < b)
    out[right] = 1.0 - (b - x[right]) ** 2 / ((b - a) * (b - m))
    out[x >= b] = 1.0
    return out


def _tri_ppf(u: np.ndarray, a: float, m: float, b: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if b <= a:
        return np.full_like(u, a)
    fm = (m - a) / (b - a)
    lo = u <= fm
    out = np.empty_like(u)
    if m > a:
        out[lo] = a + np.sqrt(u[lo] * (b - a) * (m - a))
    else:
        out[lo] = a
    out[~lo] = b - np.sqrt((1.0 - u[~lo]) * (b - a) * (b - m))
    return out


@dataclass(frozen=True)
class MixedTriangular:
    """Mixture demand: with probability rho a low triangular(0, 0, low_max)
    draw, otherwise a high triangular(high_min, high_mode, high_max) draw."""

    rho: float
    low_max: float
    high_min: float
    high_mode: float
    high_max: float

    kind = "mixed_triangular"
    is_finite = False

    def validate(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        if self.low_max <= 0.0:
            raise ValueError(f"low_max must be positive, got {self.low_max}")
        if not self.high_min <= self.high_mode <= self.high_max:
            raise ValueError(
                "high branch requires high_min <= high_mode <= high_max, got "
                f"({self.high_min}, {self.high_mode}, {self.high_max})"
            )
        if self.high_min < 0.0:
            raise ValueError("high_min must be nonnegative")

    def mean(self) -> float:
        low = self.low_max / 3.0
        high = (self.high_min + self.high_mode + self.high_max) / 3.0
        return self.rho * low + (1.0 - self.rho) * high

    def support(self) -> list[tuple[float, float]]:
        raise InfiniteSupport("mixed-triangular demand has continuous support")

    def in_support(self, x: float) -> bool:
        tol = _SUPPORT_TOL * max(1.0, self.high_max)
        in_low = -tol <= x <= self.low_max + tol
        in_high = self.high_min - tol <= x <= self.high_max + tol
        return (in_low and self.rho > 0.0) or (in_high and self.rho < 1.0)

    def cdf(self, x: np.ndarray | float) -> np.ndarray:
        lo = _tri_cdf(x, 0.0, 0.0, self.low_max)
        hi = _tri_cdf(x, self.high_min, self.high_mode, self.high_max)
        return self.rho * lo + (1.0 - self.rho) * hi

    def ppf(self, u: np.ndarray | float) -> np.ndarray:
        """Inverse of the composite mixture CDF.

        Closed form when the branch supports do not overlap; bisection to
        machine precision otherwise.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.low_max <= self.high_min or self.rho in (0.0, 1.0):
            out = np.empty_like(u)
            lo = u < self.rho
            if self.rho > 0.0:
                out[lo] = _tri_ppf(u[lo] / self.rho, 0.0, 0.0, self.low_max)
            if self.rho < 1.0:
                out[~lo] = _tri_ppf(
                    (u[~lo] - self.rho) / (1.0 - self.rho),
                    self.high_min, self.high_mode, self.high_max,
                )
            return out
        a = np.zeros_like(u)
        b = np.full_like(u, self.high_max)
        for _ in range(80):
            mid = 0.5 * (a + b)
            below = self.cdf(mid) < u
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        return 0.5 * (a + b)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        branch = rng.random(n) < self.rho
        value_u = rng.random(n)
        out = np.empty(n)
        out[branch] = _tri_ppf(value_u[branch], 0.0, 0.0, self.low_max)
        out[~branch] = _tri_ppf(
            value_u[~branch], self.high_min, self.high_mode, self.high_max
        )
        return out

    def params(self) -> dict:
        return {
            "rho": self.rho,
            "low_max": self.low_max,
            "high_min": self.high_min,
            "high_mode": self.high_mode,
            "high_max": self.high_max,
        }


DemandDistribution = Union[Bernoulli, MixedTriangular]

_DIST_KINDS = {"bernoulli": Bernoulli, "mixed_triangular": MixedTriangular}


def distribution_from_json(doc: Mapping) -> DemandDistribution:
    kind = doc.get("kind")
    if kind not in _DIST_KINDS:
        raise ValueError(f"unknown distribution kind {kind!r}")
    dist = _DIST_KINDS[kind](**doc["params"])
    dist.validate()
    return dist


# ---------------------------------------------------------------------------
# instance data


@dataclass(frozen=True)
class FacilityConfig:
    capacity: float
    open_cost: float


@dataclass(frozen=True)
class Facility:
    id: int
    configs: tuple[FacilityConfig, ...]


@dataclass(frozen=True)
class Customer:
    id: int
    assign_costs: tuple[float, ...]  # one per facility
    probe_cost: float
    distribution: DemandDistribution


@dataclass(frozen=True)
class Instance:
    facilities: tuple[Facility, ...]
    customers: tuple[Customer, ...]
    revenue_rate: float
    name: str = "instance"
    seed: int | None = None

    def validate(self) -> None:
        if not self.facilities:
            raise ValueError("instance needs at least one facility")
        if not self.customers:
            raise ValueError("instance needs at least one customer")
        if self.revenue_rate <= 0.0:
            raise ValueError("revenue_rate must be positive")
        for fac in self.facilities:
            if not fac.configs:
                raise ValueError(f"facility {fac.id} has no configurations")
            for cfg in fac.configs:
                if cfg.capacity < 0.0 or cfg.open_cost < 0.0:
                    raise ValueError(f"facility {fac.id} has negative capacity/cost")
        for cust in self.customers:
            if len(cust.assign_costs) != len(self.facilities):
                raise ValueError(
                    f"customer {cust.id} has {len(cust.assign_costs)} assignment "
                    f"costs for {len(self.facilities)} facilities"
                )
            if any(c < 0.0 for c in cust.assign_costs):
                raise ValueError(f"customer {cust.id} has a negative assignment cost")
            if cust.probe_cost < 0.0:
                raise ValueError(f"customer {cust.id} has a negative probe cost")
            cust.distribution.validate()

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    def all_customers(self) -> frozenset[int]:
        return frozenset(range(self.n_customers))

    @cached_property
    def assign_cost_matrix(self) -> np.ndarray:
        """(I, J) assignment cost array."""
        mat = np.array([c.assign_costs for c in self.customers], dtype=float).T
        mat.setflags(write=False)
        return mat

    @cached_property
    def probe_costs(self) -> np.ndarray:
        arr = np.array([c.probe_cost for c in self.customers], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def mean_demand(self) -> np.ndarray:
        arr = np.array([c.distribution.mean() for c in self.customers], dtype=float)
        arr.setflags(write=False)
        return arr

    @property
    def is_finite_support(self) -> bool:
        return all(c.distribution.is_finite for c in self.customers)

    # -- JSON wire format --------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "facilities": [
                {
                    "id": f.id,
                    "configs": [
                        {"capacity": c.capacity, "open_cost": c.open_cost}
                        for c in f.configs
                    ],
                }
                for f in self.facilities
            ],
            "customers": [
                {
                    "id": c.id,
                    "assign_costs": list(c.assign_costs),
                    "probe_cost": c.probe_cost,
                    "distribution": {
                        "kind": c.distribution.kind,
                        "params": c.distribution.params(),
                    },
                }
                for c in self.customers
            ],
            "revenue_rate": self.revenue_rate,
            "meta": {"name": self.name, "seed": self.seed},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json_dict(doc: Mapping) -> "Instance":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported instance format_version {version!r}")
        facilities = tuple(
            Facility(
                id=int(f["id"]),
                configs=tuple(
                    FacilityConfig(float(c["capacity"]), float(c["open_cost"]))
                    for c in f["configs"]
                ),
            )
            for f in doc["facilities"]
        )
        customers = tuple(
            Customer(
                id=int(c["id"]),
                assign_costs=tuple(float(a) for a in c["assign_costs"]),
                probe_cost=float(c["probe_cost"]),
                distribution=distribution_from_json(c["distribution"]),
            )
            for c in doc["customers"]
        )
        meta = doc.get("meta", {})
        inst = Instance(
            facilities=facilities,
            customers=customers,
            revenue_rate=float(doc["revenue_rate"]),
            name=str(meta.get("name", "instance")),
            seed=meta.get("seed"),
        )
        inst.validate()
        return inst

    @staticmethod
    def loads(text: str) -> "Instance":
        return Instance.from_json_dict(json.loads(text))


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    demand: np.ndarray
    weight: float


class ScenarioSet:
    """Weighted collection of demand vectors, stored as dense arrays."""

    def __init__(self, demands: np.ndarray, weights: np.ndarray):
        demands = np.atleast_2d(np.asarray(demands, dtype=float))
        weights = np.asarray(weights, dtype=float)
        if demands.shape[0] != weights.shape[0]:
            raise ValueError("demand rows and weights disagree")
        total = weights.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"scenario weights sum to {total}, expected 1")
        self.demands = demands
        self.weights = weights

    def __len__(self) -> int:
        return self.demands.shape[0]

    def __iter__(self) -> Iterator[Scenario]:
        for k in range(len(self)):
            yield Scenario(self.demands[k], float(self.weights[k]))

    def __getitem__(self, k: int) -> Scenario:
        return Scenario(self.demands[k], float(self.weights[k]))

    @staticmethod
    def equal_weights(demands: np.ndarray) -> "ScenarioSet":
        demands = np.atleast_2d(np.asarray(demands, dtype=float))
        n = demands.shape[0]
        return ScenarioSet(demands, np.full(n, 1.0 / n))

    @staticmethod
    def from_scenarios(scenarios: Sequence[Scenario]) -> "ScenarioSet":
        return ScenarioSet(
            np.stack([s.demand for s in scenarios]),
            np.array([s.weight for s in scenarios]),
        )

    def subset(self, indices: Sequence[int]) -> "ScenarioSet":
        """Sub-collection with renormalized weights."""
        idx = np.asarray(indices, dtype=int)
        w = self.weights[idx]
        return ScenarioSet(self.demands[idx], w / w.sum())


# ---------------------------------------------------------------------------
# sample specification


@dataclass(frozen=True)
class SampleSpec:
    """Sample-size bundle shared by the sampling estimators.

    n_outer doubles as the plain sample size for single-level sampling;
    batches is the replication count L or the batch count for batched
    standard errors.
    """

    n_outer: int = 100
    n_inner: int = 100
    n_select: int = 100
    batches: int = 30
    mode: str = "lhs"  # "mc" | "lhs"
    seed: int = 0

    def validate(self) -> None:
        if min(self.n_outer, self.n_inner, self.n_select) < 1:
            raise ValueError("sample sizes must be >= 1")
        if self.batches < 1:
            raise ValueError("batch count must be >= 1")
        if self.mode not in ("mc", "lhs"):
            raise ValueError(f"sampling mode must be 'mc' or 'lhs', got {self.mode!r}")


# ---------------------------------------------------------------------------
# instance generation

_GEN_STREAM = 0xFAC


def generate_instance(
    n_facilities: int,
    n_configs: int,
    n_customers: int,
    distribution_kind: str = "bernoulli",
    seed: int = 0,
    probe_cost_scale: float = 1.0,
    nominal_range: tuple[float, float] = (2.0, 10.0),
    name: str | None = None,
) -> Instance:
    """Random instance with documented parameter ranges.

    Capacities are uniform on [20, 100], sorted ascending within each
    facility so configurations are increasing.  Open costs are proportional
    to capacity with multiplicative noise on [0.3, 0.5].  Assignment costs
    are uniform on [1, 10], probe costs uniform on [5, 50] (times
    probe_cost_scale), and zero-demand probabilities uniform on [0.2, 0.8].
    Nominal demand magnitudes default to [2, 10]; small test instances use
    a higher range so that opening facilities stays worthwhile.
    """
    if min(n_facilities, n_configs, n_customers) < 1:
        raise ValueError("all counts must be >= 1")
    if distribution_kind not in _DIST_KINDS:
        raise ValueError(f"unknown distribution kind {distribution_kind!r}")
    nom_lo, nom_hi = nominal_range
    if not 0.0 < nom_lo <= nom_hi:
        raise ValueError("nominal_range must be positive and ordered")
    rng = stream_rng(seed, _GEN_STREAM)

    facilities = []
    for i in range(n_facilities):
        caps = np.sort(rng.uniform(20.0, 100.0, n_configs))
        costs = caps * rng.uniform(0.3, 0.5, n_configs)
        facilities.append(
            Facility(
                id=i,
                configs=tuple(
                    FacilityConfig(float(c), float(o)) for c, o in zip(caps, costs)
                ),
            )
        )

    customers = []
    for j in range(n_customers):
        assign = rng.uniform(1.0, 10.0, n_facilities)
        probe = float(rng.uniform(5.0, 50.0)) * probe_cost_scale
        rho = float(rng.uniform(0.2, 0.8))
        if distribution_kind == "bernoulli":
            dist: DemandDistribution = Bernoulli(
                rho=rho, nominal=float(rng.uniform(nom_lo, nom_hi))
            )
        else:
            scale = (nom_lo + nom_hi) / 12.0
            low_max = float(rng.uniform(2.0, 6.0)) * scale
            high_min = float(rng.uniform(4.0, 8.0)) * scale
            high_max = high_min + float(rng.uniform(4.0, 10.0)) * scale
            high_mode = float(rng.uniform(high_min, high_max))
            dist = MixedTriangular(rho, low_max, high_min, high_mode, high_max)
        customers.append(
            Customer(
                id=j,
                assign_costs=tuple(float(a) for a in assign),
                probe_cost=probe,
                distribution=dist,
            )
        )

    inst = Instance(
        facilities=tuple(facilities),
        customers=tuple(customers),
        revenue_rate=2.0,
        name=name or f"{distribution_kind}_I{n_facilities}C{n_configs}J{n_customers}_s{seed}",
        seed=seed,
    )
    inst.validate()
    return inst


# ---------------------------------------------------------------------------
# sampling

_JOINT_STREAM = 0x10A


def _lhs_uniforms(rng: np.random.Generator, n: int, n_coords: int) -> np.ndarray:
    """(n, n_coords) stratified uniforms: one point per equiprobable stratum
    per coordinate, strata permuted independently per coordinate."""
    u = np.empty((n, n_coords))
    for j in range(n_coords):
        perm = rng.permutation(n)
        u[:, j] = (perm + rng.random(n)) / n
    return u


def sample_joint(
    inst: Instance, spec: SampleSpec, *, stream: tuple[int, ...] = ()
) -> ScenarioSet:
    """Joint demand sample of size spec.n_outer with weights 1/N.

    MC mode draws i.i.d. from the product of marginals; LHS mode stratifies
    each coordinate's composite marginal CDF into N equiprobable strata.
    """
    spec.validate()
    rng = stream_rng(spec.seed, _JOINT_STREAM, *stream)
    n, nj = spec.n_outer, inst.n_customers
    demands = np.empty((n, nj))
    if spec.mode == "lhs":
        u = _lhs_uniforms(rng, n, nj)
        for j, cust in enumerate(inst.customers):
            demands[:, j] = np.asarray(cust.distribution.ppf(u[:, j]), dtype=float)
    else:
        for j, cust in enumerate(inst.customers):
            demands[:, j] = cust.distribution.sample(rng, n)
    return ScenarioSet.equal_weights(demands)


def sample_conditional(
    inst: Instance,
    observed: Mapping[int, float],
    spec: SampleSpec,
    *,
    n: int | None = None,
    stream: tuple[int, ...] = (),
) -> ScenarioSet:
    """Conditional sample: observed coordinates fixed, the rest sampled from
    their marginals (demands are independent across customers)."""
    spec.validate()
    for j, value in observed.items():
        if not 0 <= j < inst.n_customers:
            raise ValueError(f"observed index {j} out of range")
        if not inst.customers[j].distribution.in_support(value):
            raise ObservationOutOfSupport(
                f"value {value} impossible for customer {j}"
            )
    count = spec.n_inner if n is None else n
    rng = stream_rng(spec.seed, _JOINT_STREAM, 1, *stream)
    free = [j for j in range(inst.n_customers) if j not in observed]
    demands = np.empty((count, inst.n_customers))
    for j, value in observed.items():
        demands[:, j] = value
    if free:
        if spec.mode == "lhs":
            u = _lhs_uniforms(rng, count, len(free))
            for pos, j in enumerate(free):
                demands[:, j] = np.asarray(
                    inst.customers[j].distribution.ppf(u[:, pos]), dtype=float
                )
        else:
            for j in free:
                demands[:, j] = inst.customers[j].distribution.sample(rng, count)
    return ScenarioSet.equal_weights(demands)


# ---------------------------------------------------------------------------
# finite-support enumeration


def enumerate_support_projection(
    inst: Instance, probe_set: frozenset[int] | set[int]
) -> list[tuple[dict[int, float], float]]:
    """All outcomes of the probed coordinates with product probabilities."""
    indices = sorted(probe_set)
    for j in indices:
        if not inst.customers[j].distribution.is_finite:
            raise InfiniteSupport(f"customer {j} has continuous demand")
    if 2 ** len(indices) > ENUMERATION_CAP:
        raise SizeLimitExceeded(
            f"projection over {len(indices)} coordinates exceeds the enumeration cap"
        )
    supports = [inst.customers[j].distribution.support() for j in indices]
    outcomes = []
    for combo in itertools.product(*supports):
        prob = math.prod(p for _, p in combo)
        values = {j: v for j, (v, _) in zip(indices, combo)}
        outcomes.append((values, prob))
    return outcomes


def enumerate_conditional_support(
    inst: Instance, observed: Mapping[int, float]
) -> ScenarioSet:
    """All demand vectors consistent with the observations, with conditional
    probabilities as weights."""
    free = [j for j in range(inst.n_customers) if j not in observed]
    for j in free:
        if not inst.customers[j].distribution.is_finite:
            raise InfiniteSupport(f"customer {j} has continuous demand")
    for j, value in observed.items():
        if not inst.customers[j].distribution.in_support(value):
            raise ObservationOutOfSupport(f"value {value} impossible for customer {j}")
    count = 2 ** len(free)
    if count > ENUMERATION_CAP:
        raise SizeLimitExceeded(
            f"conditional support of {count} scenarios exceeds the enumeration cap"
        )
    base = np.zeros(inst.n_customers)
    for j, value in observed.items():
        base[j] = value
    demands = np.tile(base, (count, 1))
    weights = np.ones(count)
    supports = [inst.customers[j].distribution.support() for j in free]
    for row, combo in enumerate(itertools.product(*supports)):
        for j, (value, prob) in zip(free, combo):
            demands[row, j] = value
            weights[row] *= prob
    return ScenarioSet(demands, weights)

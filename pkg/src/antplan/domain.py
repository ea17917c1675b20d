"""Core data model: machines, VMs, capacity vectors, placements, plans, state.

Capacity and demand vectors are plain float64 numpy arrays with one entry per
resource dimension (CPU then memory by default).  All vectors of one problem
share the same dimension, and feasibility comparisons are exact element-wise
`<=` with no epsilon; external data should be pre-rounded.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import (
    EmptyPlanError,
    InfeasiblePlanError,
    InvalidProblemError,
    UnknownIdError,
)

#: Alias for the resource-vector carrier type.
CapacityVector = np.ndarray

DEFAULT_UTILIZATION_THRESHOLD = 0.8
DEFAULT_DIMENSION = 2


def as_capacity(components: Sequence[float] | np.ndarray,
                dimension: int | None = None) -> CapacityVector:
    """Validate raw components and return them as a float64 vector."""
    vec = np.asarray(components, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise InvalidProblemError(
            f"capacity vector must be 1-d and non-empty, got shape {vec.shape}")
    if dimension is not None and vec.size != dimension:
        raise InvalidProblemError(
            f"expected {dimension} resource dimensions, got {vec.size}")
    if not np.all(np.isfinite(vec)) or np.any(vec < 0):
        raise InvalidProblemError(
            f"capacity components must be finite and non-negative: {vec.tolist()}")
    return vec


@dataclass(frozen=True, eq=False)
class PhysicalMachine:
    """A server with a strictly positive capacity vector and a neighborhood tag."""

    id: str
    capacity: CapacityVector
    neighborhood: str

    def __post_init__(self) -> None:
        cap = as_capacity(self.capacity)
        if np.any(cap <= 0):
            raise InvalidProblemError(
                f"PM {self.id!r}: every capacity component must be > 0, got {cap.tolist()}")
        object.__setattr__(self, "capacity", cap)


@dataclass(frozen=True, eq=False)
class VirtualMachine:
    """A workload unit with a demand vector, hosted on one PM."""

    id: str
    demand: CapacityVector
    host: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "demand", as_capacity(self.demand))


class MigrationTuple(NamedTuple):
    """One candidate action: move `vm` from PM `source` to PM `dest`."""

    source: str
    vm: str
    dest: str


@dataclass(frozen=True)
class MigrationPlan:
    """An ordered sequence of migrations; each VM appears at most once."""

    migrations: tuple[MigrationTuple, ...] = ()

    def __post_init__(self) -> None:
        moved = [m.vm for m in self.migrations]
        if len(moved) != len(set(moved)):
            raise InvalidProblemError("a VM may appear in at most one migration per plan")
        for m in self.migrations:
            if m.source == m.dest:
                raise InvalidProblemError(f"migration {m} has source == dest")

    def __len__(self) -> int:
        return len(self.migrations)

    def __bool__(self) -> bool:
        return bool(self.migrations)

    @property
    def num_migrations(self) -> int:
        return len(self.migrations)


class ConsolidationProblem:
    """PMs with capacities and neighborhoods, VMs with demands and hosts."""

    def __init__(self,
                 pms: Iterable[PhysicalMachine],
                 vms: Iterable[VirtualMachine],
                 utilization_threshold: float = DEFAULT_UTILIZATION_THRESHOLD,
                 dimension: int | None = None):
        self.pms: dict[str, PhysicalMachine] = {}
        for pm in pms:
            if pm.id in self.pms:
                raise InvalidProblemError(f"duplicate PM id {pm.id!r}")
            self.pms[pm.id] = pm
        self.vms: dict[str, VirtualMachine] = {}
        for vm in vms:
            if vm.id in self.vms:
                raise InvalidProblemError(f"duplicate VM id {vm.id!r}")
            self.vms[vm.id] = vm
        self.utilization_threshold = float(utilization_threshold)
        if dimension is None:
            dimension = next(iter(self.pms.values())).capacity.size if self.pms else DEFAULT_DIMENSION
        self.dimension = int(dimension)
        self.validate()

    def validate(self) -> None:
        if not 0 < self.utilization_threshold <= 1:
            raise InvalidProblemError(
                f"utilization threshold must be in (0, 1], got {self.utilization_threshold}")
        for pm in self.pms.values():
            as_capacity(pm.capacity, self.dimension)
        totals = {pm_id: np.zeros(self.dimension) for pm_id in self.pms}
        for vm in self.vms.values():
            as_capacity(vm.demand, self.dimension)
            if vm.host not in self.pms:
                raise InvalidProblemError(f"VM {vm.id!r} hosted on unknown PM {vm.host!r}")
            totals[vm.host] += vm.demand
        for pm_id, used in totals.items():
            cap = self.pms[pm_id].capacity
            if np.any(used > cap):
                raise InvalidProblemError(
                    f"PM {pm_id!r} over capacity: used {used.tolist()} > {cap.tolist()}")

    def pm_order(self) -> list[str]:
        """Canonical (sorted) PM id order shared by all array-backed views."""
        return sorted(self.pms)

    def vm_order(self) -> list[str]:
        return sorted(self.vms)

    def vms_on(self, pm_id: str) -> list[str]:
        if pm_id not in self.pms:
            raise UnknownIdError(pm_id)
        return sorted(v.id for v in self.vms.values() if v.host == pm_id)

    def neighborhoods(self) -> dict[str, list[str]]:
        """Mutually exclusive, exhaustive grouping of PM ids by neighborhood."""
        groups: dict[str, list[str]] = {}
        for pm_id in self.pm_order():
            groups.setdefault(self.pms[pm_id].neighborhood, []).append(pm_id)
        return groups


def aggregate_used(problem: ConsolidationProblem, pm_id: str) -> CapacityVector:
    """Element-wise sum of demands of the VMs hosted on `pm_id`."""
    if pm_id not in problem.pms:
        raise UnknownIdError(pm_id)
    total = np.zeros(problem.dimension, dtype=np.float64)
    for vm in problem.vms.values():
        if vm.host == pm_id:
            total += vm.demand
    return total


def is_well_utilized(used: CapacityVector, capacity: CapacityVector,
                     threshold: float) -> bool:
    """True when at least one dimension is at or above the threshold ratio."""
    return bool(np.any(used >= threshold * capacity))


class SimulatedState:
    """Array-backed, single-owner mutable placement state.

    Rows follow the canonical sorted id order of the problem the state was
    built from.  Each ant and each colony works on its own copy.
    """

    __slots__ = ("pm_ids", "pm_index", "vm_ids", "vm_index",
                 "capacity", "demand", "used", "host", "vm_count")

    def __init__(self, pm_ids: list[str], vm_ids: list[str],
                 capacity: np.ndarray, demand: np.ndarray,
                 used: np.ndarray, host: np.ndarray, vm_count: np.ndarray):
        self.pm_ids = pm_ids
        self.pm_index = {p: i for i, p in enumerate(pm_ids)}
        self.vm_ids = vm_ids
        self.vm_index = {v: i for i, v in enumerate(vm_ids)}
        self.capacity = capacity
        self.demand = demand
        self.used = used
        self.host = host
        self.vm_count = vm_count

    @classmethod
    def from_problem(cls, problem: ConsolidationProblem) -> "SimulatedState":
        pm_ids = problem.pm_order()
        vm_ids = problem.vm_order()
        pm_index = {p: i for i, p in enumerate(pm_ids)}
        d = problem.dimension
        capacity = np.stack([problem.pms[p].capacity for p in pm_ids]) if pm_ids \
            else np.zeros((0, d))
        demand = np.stack([problem.vms[v].demand for v in vm_ids]) if vm_ids \
            else np.zeros((0, d))
        used = np.zeros((len(pm_ids), d), dtype=np.float64)
        host = np.zeros(len(vm_ids), dtype=np.intp)
        vm_count = np.zeros(len(pm_ids), dtype=np.intp)
        for j, v in enumerate(vm_ids):
            i = pm_index[problem.vms[v].host]
            host[j] = i
            used[i] += demand[j]
            vm_count[i] += 1
        return cls(pm_ids, vm_ids, capacity, demand, used, host, vm_count)

    def copy(self) -> "SimulatedState":
        clone = SimulatedState.__new__(SimulatedState)
        clone.pm_ids = self.pm_ids
        clone.pm_index = self.pm_index
        clone.vm_ids = self.vm_ids
        clone.vm_index = self.vm_index
        clone.capacity = self.capacity
        clone.demand = self.demand
        clone.used = self.used.copy()
        clone.host = self.host.copy()
        clone.vm_count = self.vm_count.copy()
        return clone

    def fits(self, vm_idx: int, pm_idx: int) -> bool:
        return bool(np.all(self.used[pm_idx] + self.demand[vm_idx] <= self.capacity[pm_idx]))

    def move(self, vm_idx: int, dest_idx: int) -> None:
        """Relocate one VM; the caller is responsible for feasibility checks."""
        src = self.host[vm_idx]
        dem = self.demand[vm_idx]
        self.used[src] -= dem
        self.used[dest_idx] += dem
        self.vm_count[src] -= 1
        self.vm_count[dest_idx] += 1
        self.host[vm_idx] = dest_idx

    def num_empty(self) -> int:
        return int(np.count_nonzero(self.vm_count == 0))

    def empty_pm_ids(self) -> set[str]:
        return {self.pm_ids[i] for i in np.nonzero(self.vm_count == 0)[0]}

    @property
    def used_by_id(self) -> dict[str, CapacityVector]:
        return {p: self.used[i].copy() for p, i in self.pm_index.items()}

    @property
    def host_of(self) -> dict[str, str]:
        return {v: self.pm_ids[self.host[i]] for v, i in self.vm_index.items()}


def released_set(state: SimulatedState, pm_ids: Iterable[str] | None = None) -> set[str]:
    """PMs among `pm_ids` (default: all) that host zero VMs in `state`."""
    empty = state.empty_pm_ids()
    if pm_ids is None:
        return empty
    return empty & set(pm_ids)


def replay_plan(problem: ConsolidationProblem, plan: MigrationPlan) -> SimulatedState:
    """Apply a plan in order from the problem's initial state.

    Raises InfeasiblePlanError if any migration references a VM not at its
    stated source or would overload the destination.
    """
    state = SimulatedState.from_problem(problem)
    for m in plan.migrations:
        if m.vm not in state.vm_index:
            raise UnknownIdError(m.vm)
        if m.source not in state.pm_index or m.dest not in state.pm_index:
            raise UnknownIdError(m.source if m.source not in state.pm_index else m.dest)
        v = state.vm_index[m.vm]
        src = state.pm_index[m.source]
        dst = state.pm_index[m.dest]
        if state.host[v] != src:
            raise InfeasiblePlanError(
                f"VM {m.vm!r} is on {state.pm_ids[state.host[v]]!r}, not {m.source!r}")
        if not state.fits(v, dst):
            raise InfeasiblePlanError(
                f"migrating {m.vm!r} onto {m.dest!r} would overload it")
        state.move(v, dst)
    return state


@dataclass(frozen=True)
class RoundRecord:
    """Outcome of one consolidation round after enforcement."""

    plan: MigrationPlan
    released: tuple[str, ...]
    migrations: int
    f_score: int
    g_score: float  # 1/nM, or 0.0 for an empty plan


@dataclass(frozen=True)
class CoordinatorEvent:
    """One candidate-vs-incumbent decision taken by the plan coordinator."""

    round_index: int
    candidate: str  # "pr" or "nm"
    f_new: float
    g_new: float
    f_old: float
    g_old: float
    incumbent_empty: bool
    replaced: bool


@dataclass
class ConsolidationResult:
    """Per-round logs plus totals for one full consolidation run."""

    rounds: list[RoundRecord] = field(default_factory=list)
    coordinator_log: list[CoordinatorEvent] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def total_released(self) -> int:
        return sum(len(r.released) for r in self.rounds)

    @property
    def total_migrations(self) -> int:
        return sum(r.migrations for r in self.rounds)

    def all_migrations(self) -> list[MigrationTuple]:
        return [m for r in self.rounds for m in r.plan.migrations]

    def all_released(self) -> list[str]:
        return [p for r in self.rounds for p in r.released]

    def plan_json(self) -> dict:
        """Deterministic plan document: migrations, released PMs, nM."""
        return {
            "migrations": [{"source": m.source, "vm": m.vm, "dest": m.dest}
                           for m in self.all_migrations()],
            "released": self.all_released(),
            "nM": self.total_migrations,
        }

    def metrics(self) -> dict:
        return {
            "released": self.total_released,
            "migrations": self.total_migrations,
            "rounds": len(self.rounds),
            "wall_ms": round(self.wall_time * 1000.0, 3),
        }


# --- JSON interchange -------------------------------------------------------

def problem_to_json(problem: ConsolidationProblem,
                    metadata: Mapping | None = None) -> dict:
    doc = {
        "dimension": problem.dimension,
        "threshold": problem.utilization_threshold,
        "pms": [{"id": p.id,
                 "capacity": p.capacity.tolist(),
                 "neighborhood": p.neighborhood}
                for p in (problem.pms[i] for i in problem.pm_order())],
        "vms": [{"id": v.id,
                 "demand": v.demand.tolist(),
                 "host": v.host}
                for v in (problem.vms[i] for i in problem.vm_order())],
    }
    if metadata:
        doc["metadata"] = dict(metadata)
    return doc


def problem_from_json(doc: Mapping) -> ConsolidationProblem:
    try:
        pms = [PhysicalMachine(str(p["id"]), as_capacity(p["capacity"]),
                               str(p["neighborhood"]))
               for p in doc["pms"]]
        vms = [VirtualMachine(str(v["id"]), as_capacity(v["demand"]), str(v["host"]))
               for v in doc["vms"]]
        return ConsolidationProblem(
            pms, vms,
            utilization_threshold=float(doc.get("threshold", DEFAULT_UTILIZATION_THRESHOLD)),
            dimension=int(doc["dimension"]),
        )
    except KeyError as exc:
        raise InvalidProblemError(f"problem document missing key {exc}") from exc


def dump_json(doc: Mapping, path) -> None:
    """Serialize with stable key order so identical runs emit identical bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)

"""Factorial benchmark scenarios: homogeneous PMs, random homogeneous VMs.

Four stock scenarios cross two CPU demand levels with two memory demand
levels.  Scenario 1 runs 1000 VMs against 100 PMs; scenarios 2-4 run 1000
VMs against 200 PMs; neighborhoods group 5 PMs each.  Demand ranges are
fractions of the unit PM capacity and can be overridden per call; the ranges
actually used are recorded in the emitted problem metadata.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .domain import ConsolidationProblem, PhysicalMachine, VirtualMachine
from .exceptions import GenerationError
from .seeding import STREAM_WORKLOAD, substream

PM_CAPACITY = (1.0, 1.0)

#: Demand level -> uniform range, as a fraction of PM capacity.  The low and
#: small levels follow the 10-VMs-per-PM scenario; the high and large levels
#: are sized so 5 VMs per PM stays packable (mean 0.15 -> ~75% average load)
#: while leaving only modest consolidation headroom.
CPU_RANGES = {"low": (0.01, 0.10), "high": (0.08, 0.22)}
MEM_RANGES = {"small": (0.01, 0.10), "large": (0.08, 0.22)}


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the factorial design."""

    id: int
    num_vms: int
    num_pms: int
    neighborhood_size: int = 5
    cpu_level: str = "low"
    mem_level: str = "small"
    runs: int = 10

    def __post_init__(self) -> None:
        if self.num_vms < 1 or self.num_pms < 1 or self.neighborhood_size < 1:
            raise ValueError("scenario sizes must be >= 1")
        if self.cpu_level not in CPU_RANGES:
            raise ValueError(f"unknown cpu level {self.cpu_level!r}")
        if self.mem_level not in MEM_RANGES:
            raise ValueError(f"unknown mem level {self.mem_level!r}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @classmethod
    def table_defaults(cls, scenario_id: int) -> "ScenarioSpec":
        """The four stock scenarios of the factorial design."""
        levels = {
            1: ("low", "small", 100),
            2: ("high", "large", 200),
            3: ("high", "small", 200),
            4: ("low", "large", 200),
        }
        if scenario_id not in levels:
            raise ValueError(f"scenario id must be 1..4, got {scenario_id}")
        cpu, mem, pms = levels[scenario_id]
        return cls(id=scenario_id, num_vms=1000, num_pms=pms,
                   neighborhood_size=5, cpu_level=cpu, mem_level=mem, runs=10)

    def resize(self, num_vms: int, num_pms: int) -> "ScenarioSpec":
        return replace(self, num_vms=num_vms, num_pms=num_pms)

    def to_mapping(self) -> dict:
        return {"id": self.id, "num_vms": self.num_vms, "num_pms": self.num_pms,
                "neighborhood_size": self.neighborhood_size,
                "cpu_level": self.cpu_level, "mem_level": self.mem_level,
                "runs": self.runs}

    @classmethod
    def from_mapping(cls, doc) -> "ScenarioSpec":
        return cls(**{k: doc[k] for k in ("id", "num_vms", "num_pms",
                                          "neighborhood_size", "cpu_level",
                                          "mem_level", "runs") if k in doc})


def assign_neighborhoods(pm_ids: list[str], size: int,
                         rng: np.random.Generator) -> dict[str, str]:
    """Random partition of PMs into groups of `size` (last group may be smaller)."""
    if size < 1:
        raise ValueError(f"neighborhood size must be >= 1, got {size}")
    shuffled = list(pm_ids)
    rng.shuffle(shuffled)
    mapping = {}
    for i, pm_id in enumerate(shuffled):
        mapping[pm_id] = f"nbr-{i // size:04d}"
    return mapping


def generate_scenario(spec: ScenarioSpec, seed: int,
                      cpu_range: tuple[float, float] | None = None,
                      mem_range: tuple[float, float] | None = None
                      ) -> ConsolidationProblem:
    """Sample one scenario instance: demands, neighborhoods, initial placement.

    VMs are placed in random order, each onto a random PM with element-wise
    room, scanning at most |P| PMs; a VM that fits nowhere raises
    GenerationError (the demand ranges are too hot for the fleet).
    Deterministic in (spec, seed, ranges).
    """
    cpu_range = cpu_range or CPU_RANGES[spec.cpu_level]
    mem_range = mem_range or MEM_RANGES[spec.mem_level]
    rng = substream(seed, STREAM_WORKLOAD, spec.id)

    pm_ids = [f"pm-{i:05d}" for i in range(spec.num_pms)]
    vm_ids = [f"vm-{i:06d}" for i in range(spec.num_vms)]
    neighborhoods = assign_neighborhoods(pm_ids, spec.neighborhood_size, rng)

    cpu = rng.uniform(cpu_range[0], cpu_range[1], spec.num_vms)
    mem = rng.uniform(mem_range[0], mem_range[1], spec.num_vms)
    demands = np.column_stack([cpu, mem])

    capacity = np.asarray(PM_CAPACITY, dtype=np.float64)
    used = np.zeros((spec.num_pms, 2), dtype=np.float64)
    hosts = np.full(spec.num_vms, -1, dtype=np.intp)
    for v in rng.permutation(spec.num_vms):
        placed = False
        for p in rng.permutation(spec.num_pms):
            if np.all(used[p] + demands[v] <= capacity):
                used[p] += demands[v]
                hosts[v] = p
                placed = True
                break
        if not placed:
            raise GenerationError(
                f"no PM can host VM {vm_ids[v]} (demand {demands[v].tolist()}); "
                f"ranges cpu={cpu_range} mem={mem_range} are too hot for "
                f"{spec.num_pms} PMs")

    pms = [PhysicalMachine(pm_id, capacity.copy(), neighborhoods[pm_id])
           for pm_id in pm_ids]
    vms = [VirtualMachine(vm_ids[v], demands[v], pm_ids[hosts[v]])
           for v in range(spec.num_vms)]
    return ConsolidationProblem(pms, vms)


def scenario_metadata(spec: ScenarioSpec, seed: int,
                      cpu_range: tuple[float, float] | None = None,
                      mem_range: tuple[float, float] | None = None) -> dict:
    """Provenance block recorded alongside generated problems."""
    return {
        "scenario": spec.to_mapping(),
        "seed": seed,
        "cpu_range": list(cpu_range or CPU_RANGES[spec.cpu_level]),
        "mem_range": list(mem_range or MEM_RANGES[spec.mem_level]),
        "pm_capacity": list(PM_CAPACITY),
    }

"""Construction of the constrained migration search space.

A candidate migration (source PM, VM, destination PM) enters the space only
when: the source is under-utilized, the destination is under-utilized, and the
destination lies in the source's neighborhood -- unless the source is alone in
its neighborhood, in which case any under-utilized PM anywhere is a valid
destination.  Utilization is judged against the placement the space is built
from; mid-plan changes are handled by feasibility checks during ant walks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (
    ConsolidationProblem,
    MigrationTuple,
    SimulatedState,
    is_well_utilized,
)


@dataclass(frozen=True, eq=False)
class TupleSpace:
    """Immutable, ordinal-indexed set of candidate migrations.

    `src`, `vm` and `dst` are per-ordinal row indices into the canonical
    (sorted-id) PM/VM ordering of the problem the space was built from, and
    `by_dest[p]` lists the ordinals whose destination is PM row `p`.
    """

    tuples: tuple[MigrationTuple, ...]
    index: dict[MigrationTuple, int]
    src: np.ndarray
    vm: np.ndarray
    dst: np.ndarray
    by_dest: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.tuples)

    def ordinals_of(self, plan_tuples) -> list[int]:
        return [self.index[t] for t in plan_tuples]


def under_utilized_pms(problem: ConsolidationProblem,
                       state: SimulatedState | None = None) -> list[str]:
    """PM ids below the utilization threshold in every dimension."""
    if state is None:
        state = SimulatedState.from_problem(problem)
    theta = problem.utilization_threshold
    out = []
    for pm_id in state.pm_ids:
        i = state.pm_index[pm_id]
        if not is_well_utilized(state.used[i], state.capacity[i], theta):
            out.append(pm_id)
    return out


def build_tuple_space(problem: ConsolidationProblem) -> TupleSpace:
    """Enumerate all candidate migrations satisfying the three reduction rules.

    Tuples are ordered lexicographically by (source id, vm id, dest id) so
    that runs are reproducible given a seed.  An empty space is a valid
    result meaning there is nothing to consolidate.
    """
    state = SimulatedState.from_problem(problem)
    under = under_utilized_pms(problem, state)
    under_set = set(under)
    groups = problem.neighborhoods()

    tuples: list[MigrationTuple] = []
    for src_id in sorted(under_set):
        hosted = problem.vms_on(src_id)
        if not hosted:
            continue
        neighborhood = groups[problem.pms[src_id].neighborhood]
        if len(neighborhood) == 1:
            dest_pool = [p for p in under if p != src_id]
        else:
            dest_pool = [p for p in neighborhood if p != src_id and p in under_set]
        dest_pool = sorted(dest_pool)
        for vm_id in hosted:
            for dst_id in dest_pool:
                tuples.append(MigrationTuple(src_id, vm_id, dst_id))

    index = {t: i for i, t in enumerate(tuples)}
    n_pms = len(state.pm_ids)
    src = np.fromiter((state.pm_index[t.source] for t in tuples), dtype=np.intp,
                      count=len(tuples))
    vm = np.fromiter((state.vm_index[t.vm] for t in tuples), dtype=np.intp,
                     count=len(tuples))
    dst = np.fromiter((state.pm_index[t.dest] for t in tuples), dtype=np.intp,
                      count=len(tuples))
    order = np.argsort(dst, kind="stable")
    dst_sorted = dst[order]
    lo = np.searchsorted(dst_sorted, np.arange(n_pms), side="left")
    hi = np.searchsorted(dst_sorted, np.arange(n_pms), side="right")
    by_dest = tuple(order[lo[p]:hi[p]] for p in range(n_pms))
    return TupleSpace(tuple(tuples), index, src, vm, dst, by_dest)


def max_tuple_count(num_pms: int, num_vms: int, neighborhood_size: int) -> int:
    """Worst-case tuple count for uniform neighborhoods: |P| * |V| * (|N| - 1)."""
    for name, value in (("num_pms", num_pms), ("num_vms", num_vms),
                        ("neighborhood_size", neighborhood_size)):
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")
    return num_pms * num_vms * (neighborhood_size - 1)

"""Shared builders and independent oracles for the test suite."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from antplan import ConsolidationProblem, PhysicalMachine, VirtualMachine


def make_problem(pm_specs, vm_specs, threshold=0.8):
    """pm_specs: {id: (capacity, neighborhood)}; vm_specs: {id: (demand, host)}."""
    pms = [PhysicalMachine(pid, np.asarray(cap, dtype=float), nbr)
           for pid, (cap, nbr) in pm_specs.items()]
    vms = [VirtualMachine(vid, np.asarray(dem, dtype=float), host)
           for vid, (dem, host) in vm_specs.items()]
    return ConsolidationProblem(pms, vms, utilization_threshold=threshold)


@pytest.fixture
def three_pm_problem():
    """Capacities (1,1); v1, v2 = (0.3, 0.3); v3 = (0.6, 0.6); optimum f = 1."""
    return make_problem(
        {"pm-1": ((1, 1), "n0"), "pm-2": ((1, 1), "n0"), "pm-3": ((1, 1), "n0")},
        {"v1": ((0.3, 0.3), "pm-1"), "v2": ((0.3, 0.3), "pm-2"),
         "v3": ((0.6, 0.6), "pm-3")},
    )


@pytest.fixture
def four_pm_problem():
    """Four PMs, one 0.2-demand VM each; all fit on one PM (f = 3, nM = 3)."""
    return make_problem(
        {f"pm-{i}": ((1, 1), "n0") for i in range(1, 5)},
        {f"v{i}": ((0.2, 0.2), f"pm-{i}") for i in range(1, 5)},
    )


def random_tiny_problem(rng, max_pms=4, max_vms=8, demand_range=(0.1, 0.6),
                        single_neighborhood=True, threshold=0.8, max_tries=200):
    """Random feasible instance small enough for exhaustive oracles."""
    for _ in range(max_tries):
        n_pms = int(rng.integers(2, max_pms + 1))
        n_vms = int(rng.integers(2, max_vms + 1))
        demands = rng.uniform(demand_range[0], demand_range[1], size=(n_vms, 2))
        used = np.zeros((n_pms, 2))
        hosts = np.full(n_vms, -1)
        ok = True
        for v in range(n_vms):
            order = rng.permutation(n_pms)
            for p in order:
                if np.all(used[p] + demands[v] <= 1.0):
                    used[p] += demands[v]
                    hosts[v] = p
                    break
            else:
                ok = False
                break
        if not ok:
            continue
        if single_neighborhood:
            nbr = {p: "n0" for p in range(n_pms)}
        else:
            nbr = {p: f"n{int(rng.integers(0, 2))}" for p in range(n_pms)}
        pm_specs = {f"pm-{p}": ((1.0, 1.0), nbr[p]) for p in range(n_pms)}
        vm_specs = {f"vm-{v}": (tuple(demands[v]), f"pm-{hosts[v]}")
                    for v in range(n_vms)}
        return make_problem(pm_specs, vm_specs, threshold=threshold)
    raise RuntimeError("could not generate a feasible tiny instance")


def exhaustive_assignment_oracle(problem):
    """Brute force over all VM->PM assignments with capacity checks.

    Returns (max_releases, min_moves_at_max) where moves counts VMs whose
    final host differs from the initial one among assignments achieving the
    maximal number of empty PMs.
    """
    pm_ids = problem.pm_order()
    vm_ids = problem.vm_order()
    n_pms, n_vms = len(pm_ids), len(vm_ids)
    cap = np.stack([problem.pms[p].capacity for p in pm_ids])
    dem = np.stack([problem.vms[v].demand for v in vm_ids])
    initial = np.array([pm_ids.index(problem.vms[v].host) for v in vm_ids])

    assignments = np.array(list(itertools.product(range(n_pms), repeat=n_vms)),
                           dtype=np.int8)
    feasible = np.ones(len(assignments), dtype=bool)
    releases = np.zeros(len(assignments), dtype=np.int64)
    for p in range(n_pms):
        mask = assignments == p
        load = mask.astype(np.float64) @ dem
        feasible &= np.all(load <= cap[p], axis=1)
        releases += ~mask.any(axis=1)
    releases = np.where(feasible, releases, -1)
    best = int(releases.max())
    at_best = assignments[releases == best]
    moves = (at_best != initial).sum(axis=1)
    return best, int(moves.min())

"""Search-space construction against brute-force triple enumeration."""
import numpy as np
import pytest

from antplan import MigrationTuple, build_tuple_space, max_tuple_count
from antplan.domain import aggregate_used, is_well_utilized

from conftest import make_problem, random_tiny_problem


def brute_force_tuples(problem):
    """Independent oracle: enumerate all triples, then filter the three rules."""
    theta = problem.utilization_threshold
    well = set()
    for pm_id, pm in problem.pms.items():
        if is_well_utilized(aggregate_used(problem, pm_id), pm.capacity, theta):
            well.add(pm_id)
    under = set(problem.pms) - well
    groups = problem.neighborhoods()
    out = set()
    for src in problem.pms:
        for vm in problem.vms.values():
            if vm.host != src:
                continue
            for dst in problem.pms:
                if dst == src:
                    continue
                if src in well or dst in well:
                    continue
                same_nbr = problem.pms[src].neighborhood == problem.pms[dst].neighborhood
                singleton = len(groups[problem.pms[src].neighborhood]) == 1
                if not same_nbr and not singleton:
                    continue
                out.add(MigrationTuple(src, vm.id, dst))
    return out


class TestBuildTupleSpace:
    def test_all_well_utilized_gives_empty_space(self):
        prob = make_problem(
            {"a": ((1, 1), "n0"), "b": ((1, 1), "n0")},
            {"v1": ((0.9, 0.2), "a"), "v2": ((0.85, 0.1), "b")},
        )
        assert len(build_tuple_space(prob)) == 0

    def test_two_pm_example(self):
        prob = make_problem(
            {"PM1": ((1, 1), "n0"), "PM2": ((1, 1), "n0")},
            {"v1": ((0.1, 0.1), "PM1"), "v2": ((0.1, 0.1), "PM1"),
             "v3": ((0.1, 0.1), "PM2")},
        )
        space = build_tuple_space(prob)
        assert set(space.tuples) == {
            MigrationTuple("PM1", "v1", "PM2"),
            MigrationTuple("PM1", "v2", "PM2"),
            MigrationTuple("PM2", "v3", "PM1"),
        }
        assert len(space) == 3

    def test_singleton_neighborhood_reaches_everywhere(self):
        # a lone PM's VMs may move to any under-utilized PM in any neighborhood
        prob = make_problem(
            {"PM1": ((1, 1), "solo"), "PM2": ((1, 1), "n1"), "PM3": ((1, 1), "n1")},
            {"v1": ((0.1, 0.1), "PM1")},
        )
        space = build_tuple_space(prob)
        assert MigrationTuple("PM1", "v1", "PM2") in space.tuples
        assert MigrationTuple("PM1", "v1", "PM3") in space.tuples

    def test_non_singleton_stays_in_neighborhood(self):
        prob = make_problem(
            {"PM1": ((1, 1), "n0"), "PM2": ((1, 1), "n0"), "PM3": ((1, 1), "n1"),
             "PM4": ((1, 1), "n1")},
            {"v1": ((0.1, 0.1), "PM1")},
        )
        space = build_tuple_space(prob)
        assert set(space.tuples) == {MigrationTuple("PM1", "v1", "PM2")}

    def test_well_utilized_destination_excluded(self):
        prob = make_problem(
            {"a": ((1, 1), "n0"), "b": ((1, 1), "n0"), "c": ((1, 1), "n0")},
            {"v1": ((0.2, 0.2), "a"), "v2": ((0.9, 0.1), "b"),
             "v3": ((0.1, 0.1), "c")},
        )
        space = build_tuple_space(prob)
        dests = {t.dest for t in space.tuples}
        sources = {t.source for t in space.tuples}
        assert "b" not in dests
        assert "b" not in sources

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            prob = random_tiny_problem(rng, max_pms=5, max_vms=10,
                                       single_neighborhood=False,
                                       demand_range=(0.05, 0.5))
            space = build_tuple_space(prob)
            assert set(space.tuples) == brute_force_tuples(prob)

    def test_ordering_is_lexicographic_and_duplicate_free(self):
        rng = np.random.default_rng(5)
        prob = random_tiny_problem(rng, max_pms=5, max_vms=10)
        space = build_tuple_space(prob)
        assert list(space.tuples) == sorted(set(space.tuples))
        assert len(set(space.tuples)) == len(space.tuples)

    def test_no_self_migration_and_vm_on_source(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            prob = random_tiny_problem(rng, single_neighborhood=False)
            for t in build_tuple_space(prob).tuples:
                assert t.source != t.dest
                assert prob.vms[t.vm].host == t.source

    def test_index_arrays_consistent(self, four_pm_problem):
        space = build_tuple_space(four_pm_problem)
        from antplan import SimulatedState
        state = SimulatedState.from_problem(four_pm_problem)
        for i, t in enumerate(space.tuples):
            assert space.index[t] == i
            assert state.pm_ids[space.src[i]] == t.source
            assert state.vm_ids[space.vm[i]] == t.vm
            assert state.pm_ids[space.dst[i]] == t.dest
        for p, ords in enumerate(space.by_dest):
            assert all(space.dst[o] == p for o in ords)


class TestMaxTupleCount:
    def test_worst_case_arithmetic(self):
        assert max_tuple_count(100, 1000, 5) == 400000

    def test_singleton_neighborhoods_contribute_nothing(self):
        assert max_tuple_count(10, 50, 1) == 0

    def test_zero_or_negative_arguments_rejected(self):
        for bad in [(0, 1, 1), (1, 0, 1), (1, 1, 0), (-1, 5, 5)]:
            with pytest.raises(ValueError):
                max_tuple_count(*bad)

    def test_bound_holds_on_uniform_under_utilized_problems(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            n_pms = 4
            nbr_size = 2
            prob_pms = {f"pm-{i}": ((1.0, 1.0), f"n{i // nbr_size}")
                        for i in range(n_pms)}
            n_vms = int(rng.integers(2, 9))
            vm_specs = {}
            for v in range(n_vms):
                host = int(rng.integers(0, n_pms))
                vm_specs[f"vm-{v}"] = ((0.02, 0.02), f"pm-{host}")
            prob = make_problem(prob_pms, vm_specs)
            space = build_tuple_space(prob)
            assert len(space) <= max_tuple_count(n_pms, n_vms, nbr_size)

    def test_equality_when_every_pm_under_utilized_per_vm_count(self):
        # with all PMs under-utilized and neighborhoods of size k, each VM
        # yields exactly k-1 tuples, the per-VM slice of the worst case
        prob = make_problem(
            {f"pm-{i}": ((1.0, 1.0), f"n{i // 2}") for i in range(4)},
            {f"vm-{v}": ((0.05, 0.05), f"pm-{v % 4}") for v in range(8)},
        )
        space = build_tuple_space(prob)
        assert len(space) == 8 * (2 - 1)

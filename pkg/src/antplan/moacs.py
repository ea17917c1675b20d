"""The two-colony consolidation solver and its single-colony baseline.

One colony searches for plans releasing the most PMs, the other for plans
that reach the same release count with fewer migrations.  A coordinator
merges their per-round bests lexicographically (release count first, then
the reciprocal migration count) and enforces the winning plan, dropping
migrations aimed at PMs that are already empty at their turn.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .colony import (
    AcoParams,
    AntState,
    PheromoneMatrix,
    choose_next_tuple,
    eta_over_space,
    init_pheromone,
    local_update,
)
from .domain import (
    ConsolidationProblem,
    ConsolidationResult,
    CoordinatorEvent,
    MigrationPlan,
    MigrationTuple,
    PhysicalMachine,
    RoundRecord,
    SimulatedState,
    VirtualMachine,
    released_set,
    replay_plan,
)
from .exceptions import EmptyPlanError
from .seeding import STREAM_SOLVER, subsequence
from .tuplespace import TupleSpace, build_tuple_space, under_utilized_pms

MODE_PR = "pr"
MODE_NM = "nm"

#: Pheromone never evaporates to exactly zero, even at alpha = 1.
TAU_FLOOR = 1e-12

NEG_INF = float("-inf")


@dataclass
class ColonyOutcome:
    """Best plan found by one colony plus every per-ant plan it produced."""

    best_plan: MigrationPlan
    f_score: int
    g_score: float  # 1/nM of the best plan, 0.0 when it is empty
    all_plans: list[MigrationPlan] = field(default_factory=list)


@dataclass
class StoppingCriterion:
    """Round limits for the consolidation loop."""

    max_rounds: int = 10
    no_improvement_rounds: int = 2

    def __post_init__(self) -> None:
        if self.max_rounds < 1 or self.no_improvement_rounds < 1:
            raise ValueError("stopping criteria must be >= 1")

    @classmethod
    def from_mapping(cls, doc) -> "StoppingCriterion":
        known = {k: doc[k] for k in ("max_rounds", "no_improvement_rounds") if k in doc}
        return cls(**known)

    def to_mapping(self) -> dict:
        return {"max_rounds": self.max_rounds,
                "no_improvement_rounds": self.no_improvement_rounds}


def f_released(plan: MigrationPlan, problem: ConsolidationProblem) -> int:
    """Number of PMs hosting zero VMs after replaying the plan."""
    return replay_plan(problem, plan).num_empty()


def g_migrations(plan: MigrationPlan) -> float:
    """Reciprocal of the migration count; undefined for an empty plan."""
    if not plan:
        raise EmptyPlanError("migration score is undefined for an empty plan")
    return 1.0 / len(plan)


def _apply_global_update(matrix: PheromoneMatrix, rewarded: Sequence[int],
                         delta: float, alpha: float) -> None:
    tau = matrix.values
    tau *= (1.0 - alpha)
    tau[np.asarray(rewarded, dtype=np.intp)] += alpha * delta
    np.maximum(tau, TAU_FLOOR, out=tau)


def global_update_pr(matrix: PheromoneMatrix, best_plan: Iterable[int],
                     f_score: float, params: AcoParams) -> None:
    """Evaporate everywhere; reward the best plan's tuples with the release count."""
    ordinals = list(best_plan)
    if not ordinals:
        return
    _apply_global_update(matrix, ordinals, float(f_score), params.alpha)


def global_update_nm(matrix: PheromoneMatrix, best_plan: Iterable[int],
                     params: AcoParams) -> None:
    """Evaporate everywhere; reward the best plan's tuples with 1/nM."""
    ordinals = list(best_plan)
    if not ordinals:
        return
    _apply_global_update(matrix, ordinals, 1.0 / len(ordinals), params.alpha)


def _walk_ant(tspace: TupleSpace, matrix: PheromoneMatrix, params: AcoParams,
              rng: np.random.Generator, state: SimulatedState,
              eta0: np.ndarray, eta0_pow: np.ndarray) -> AntState:
    """Traverse the whole tuple space once, applying feasible migrations.

    Every traversed tuple gets the local pheromone update.  A migration is
    applied when its VM has not moved yet in this walk and the destination
    has room; the ant's plan is the applied prefix at the last strict
    improvement of the released-PM count.
    """
    ant = AntState(tspace, state, matrix, params.beta, eta0, eta0_pow)
    tau = matrix.values
    host = state.host
    vm_count = state.vm_count
    src_arr, vm_arr, dst_arr = tspace.src, tspace.vm, tspace.dst
    rho = params.rho
    tau0 = matrix.tau0
    eta = ant.eta
    while ant.remaining_count > 0:
        t = choose_next_tuple(ant, matrix, params, rng)
        tau[t] = (1.0 - rho) * tau[t] + rho * tau0
        v = vm_arr[t]
        if ant.vm_moved[v]:
            continue
        s = src_arr[t]
        if host[v] != s:
            continue
        d = dst_arr[t]
        # eta > 0 certifies room at the destination; the explicit check only
        # runs for the zero-heuristic corner (e.g. zero-demand VMs).
        if eta[t] <= 0.0 and not state.fits(v, d):
            continue
        delta = (1 if vm_count[s] == 1 else 0) - (1 if vm_count[d] == 0 else 0)
        state.move(v, d)
        ant.vm_moved[v] = True
        ant.applied.append(t)
        ant.empty_count += delta
        ant.refresh_dest(s, tau)
        ant.refresh_dest(d, tau)
        if ant.empty_count > ant.best_score:
            ant.best_score = ant.empty_count
            ant.best_len = len(ant.applied)
    return ant


def _as_seedseq(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, (int, np.integer)):
        return np.random.SeedSequence(int(rng))
    raise TypeError(f"rng must be an int seed or SeedSequence, got {type(rng)!r}")


def run_colony(problem: ConsolidationProblem, tuple_space: TupleSpace,
               params: AcoParams | None = None, mode: str = MODE_PR,
               incumbent_f: int | None = None,
               rng: int | np.random.SeedSequence = 0) -> ColonyOutcome:
    """Run one colony: generations of ants walking the tuple space.

    Mode "pr" keeps the plan with the most released PMs; mode "nm" breaks
    release-count ties toward fewer migrations and rewards with 1/nM.
    `incumbent_f` is advisory: the dual argmax of mode "nm" is invariant to
    it, and the coordinator applies the release-count gate itself.
    """
    params = params or AcoParams()
    if mode not in (MODE_PR, MODE_NM):
        raise ValueError(f"mode must be {MODE_PR!r} or {MODE_NM!r}, got {mode!r}")
    if len(tuple_space) == 0:
        return ColonyOutcome(MigrationPlan(), 0, 0.0, [])
    seq = _as_seedseq(rng)
    state0 = SimulatedState.from_problem(problem)
    eta0 = eta_over_space(state0, tuple_space)
    eta0_pow = eta0 ** params.beta
    estimate = max(1, len(under_utilized_pms(problem, state0)))
    matrix = init_pheromone(tuple_space, estimate, len(problem.pms))

    best_ords: list[int] = []
    best_f = -1
    best_g = NEG_INF
    plans: list[list[int]] = []
    for _ in range(params.num_generations):
        for child in seq.spawn(params.num_ants):
            ant = _walk_ant(tuple_space, matrix, params, np.random.default_rng(child),
                            state0.copy(), eta0, eta0_pow)
            ords = ant.accepted_ordinals()
            f = ant.best_score
            g = (1.0 / len(ords)) if ords else NEG_INF
            plans.append(ords)
            if mode == MODE_PR:
                better = f > best_f
            else:
                better = f > best_f or (f == best_f and g > best_g)
            if better:
                best_ords, best_f, best_g = ords, f, g
        if best_ords:
            if mode == MODE_PR:
                global_update_pr(matrix, best_ords, best_f, params)
            else:
                global_update_nm(matrix, best_ords, params)

    def to_plan(ords: list[int]) -> MigrationPlan:
        return MigrationPlan(tuple(tuple_space.tuples[i] for i in ords))

    best_plan = to_plan(best_ords)
    return ColonyOutcome(best_plan, max(best_f, 0),
                         1.0 / len(best_plan) if best_plan else 0.0,
                         [to_plan(p) for p in plans])


def _g_compare(plan: MigrationPlan) -> float:
    return 1.0 / len(plan) if plan else NEG_INF


def coordinator_merge(round_index: int, pr: ColonyOutcome,
                      nm: ColonyOutcome | None
                      ) -> tuple[MigrationPlan, list[CoordinatorEvent]]:
    """Merge colony bests: releases take precedence, then fewer migrations.

    The incumbent starts empty each round; the release-maximizing candidate
    replaces it when the incumbent is empty or its release count strictly
    improves, and the migration-minimizing candidate replaces it when it
    matches the release count and strictly improves the reciprocal
    migration count.
    """
    events: list[CoordinatorEvent] = []
    best = MigrationPlan()
    best_f = 0.0
    best_g = NEG_INF
    incumbent_empty = True

    replaced = incumbent_empty or pr.f_score > best_f
    events.append(CoordinatorEvent(round_index, "pr", pr.f_score, _g_compare(pr.best_plan),
                                   best_f, best_g, incumbent_empty, replaced))
    if replaced:
        best, best_f, best_g = pr.best_plan, float(pr.f_score), _g_compare(pr.best_plan)
        incumbent_empty = not best

    if nm is not None:
        nm_g = _g_compare(nm.best_plan)
        replaced = nm.f_score >= best_f and nm_g > best_g
        events.append(CoordinatorEvent(round_index, "nm", nm.f_score, nm_g,
                                       best_f, best_g, incumbent_empty, replaced))
        if replaced:
            best, best_f, best_g = nm.best_plan, float(nm.f_score), nm_g
    return best, events


def check_coordinator_log(events: Iterable[CoordinatorEvent]) -> list[str]:
    """Verify every logged decision followed the lexicographic update rules.

    Returns a list of violation descriptions; an empty list means the log is
    consistent.
    """
    violations = []
    for e in events:
        if e.candidate == "pr":
            expected = e.incumbent_empty or e.f_new > e.f_old
        elif e.candidate == "nm":
            expected = e.f_new >= e.f_old and e.g_new > e.g_old
        else:
            violations.append(f"unknown candidate {e.candidate!r} in round {e.round_index}")
            continue
        if e.replaced != expected:
            violations.append(
                f"round {e.round_index} {e.candidate}: replaced={e.replaced} but rule "
                f"gives {expected} (f {e.f_old}->{e.f_new}, g {e.g_old}->{e.g_new}, "
                f"empty={e.incumbent_empty})")
        if e.replaced and not (e.incumbent_empty or e.f_new > e.f_old
                               or (e.f_new == e.f_old and e.g_new > e.g_old)):
            violations.append(
                f"round {e.round_index} {e.candidate}: non-lexicographic replacement")
    return violations


def enforce_plan(state: SimulatedState, migrations: Iterable[MigrationTuple]
                 ) -> tuple[list[MigrationTuple], list[MigrationTuple]]:
    """Apply a plan in order, dropping migrations that break enforcement rules.

    A migration is dropped when its VM is not at the stated source, when its
    destination hosts zero VMs at that point (a released PM must not receive
    migrations), or when it would overload the destination.  Mutates `state`
    and returns (applied, dropped).
    """
    applied: list[MigrationTuple] = []
    dropped: list[MigrationTuple] = []
    for m in migrations:
        v = state.vm_index[m.vm]
        s = state.pm_index[m.source]
        d = state.pm_index[m.dest]
        if state.host[v] != s or state.vm_count[d] == 0 or not state.fits(v, d):
            dropped.append(m)
            continue
        state.move(v, d)
        applied.append(m)
    return applied, dropped


def _shrink_problem(current: ConsolidationProblem, state: SimulatedState,
                    released: Iterable[str]) -> ConsolidationProblem:
    """Next-round problem: released PMs terminated, hosts updated in place."""
    gone = set(released)
    pms = [pm for pm_id, pm in current.pms.items() if pm_id not in gone]
    host_of = state.host_of
    vms = [VirtualMachine(vm.id, vm.demand, host_of[vm.id])
           for vm in current.vms.values()]
    return ConsolidationProblem(pms, vms,
                                utilization_threshold=current.utilization_threshold,
                                dimension=current.dimension)


def _run_colonies(problem: ConsolidationProblem, tspace: TupleSpace,
                  params: AcoParams, seed: int, round_index: int,
                  use_nm: bool, parallel: bool
                  ) -> tuple[ColonyOutcome, ColonyOutcome | None]:
    pr_seq = subsequence(seed, STREAM_SOLVER, round_index, 0)
    if not use_nm:
        return run_colony(problem, tspace, params, MODE_PR, None, pr_seq), None
    nm_seq = subsequence(seed, STREAM_SOLVER, round_index, 1)
    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut_pr = pool.submit(run_colony, problem, tspace, params, MODE_PR, None, pr_seq)
            fut_nm = pool.submit(run_colony, problem, tspace, params, MODE_NM, None, nm_seq)
            return fut_pr.result(), fut_nm.result()
    pr = run_colony(problem, tspace, params, MODE_PR, None, pr_seq)
    nm = run_colony(problem, tspace, params, MODE_NM, None, nm_seq)
    return pr, nm


def _consolidate(problem: ConsolidationProblem, params: AcoParams | None,
                 stopping: StoppingCriterion | None, seed: int,
                 use_nm: bool, parallel: bool) -> ConsolidationResult:
    params = params or AcoParams()
    stopping = stopping or StoppingCriterion()
    start = time.perf_counter()
    result = ConsolidationResult()
    current = problem
    no_improve = 0
    for round_index in range(stopping.max_rounds):
        if not current.pms or not current.vms:
            break
        tspace = build_tuple_space(current)
        if len(tspace) == 0:
            break  # every remaining PM is well-utilized or has nowhere to send
        pr, nm = _run_colonies(current, tspace, params, seed, round_index,
                               use_nm, parallel)
        plan, events = coordinator_merge(round_index, pr, nm)
        result.coordinator_log.extend(events)

        state = SimulatedState.from_problem(current)
        applied, _ = enforce_plan(state, plan.migrations)
        released = sorted(released_set(state))
        n_migrations = len(applied)
        result.rounds.append(RoundRecord(
            plan=MigrationPlan(tuple(applied)),
            released=tuple(released),
            migrations=n_migrations,
            f_score=len(released),
            g_score=1.0 / n_migrations if n_migrations else 0.0,
        ))
        if released:
            no_improve = 0
        else:
            no_improve += 1
        current = _shrink_problem(current, state, released)
        if no_improve >= stopping.no_improvement_rounds:
            break
    result.wall_time = time.perf_counter() - start
    return result


def moacs_consolidate(problem: ConsolidationProblem,
                      params: AcoParams | None = None,
                      stopping: StoppingCriterion | None = None,
                      seed: int = 0, parallel: bool = False) -> ConsolidationResult:
    """Consolidate with both colonies under the lexicographic coordinator."""
    return _consolidate(problem, params, stopping, seed, use_nm=True,
                        parallel=parallel)


def acs_baseline(problem: ConsolidationProblem,
                 params: AcoParams | None = None,
                 stopping: StoppingCriterion | None = None,
                 seed: int = 0, parallel: bool = False) -> ConsolidationResult:
    """Single-colony baseline: release-maximizing colony only, same coordinator."""
    return _consolidate(problem, params, stopping, seed, use_nm=False,
                        parallel=parallel)

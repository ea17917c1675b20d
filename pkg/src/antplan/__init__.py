"""Ant-colony VM consolidation: planning, workloads, and benchmarking."""

from .bench import (
    ExperimentConfig,
    ExperimentReport,
    RunRecord,
    packing_efficiency,
    run_experiment,
    scalability_sweep,
    wilcoxon_signed_rank,
)
from .colony import (
    AcoParams,
    AntState,
    PheromoneMatrix,
    choose_next_tuple,
    heuristic_value,
    init_pheromone,
    local_update,
    transition_probabilities,
)
from .domain import (
    CapacityVector,
    ConsolidationProblem,
    ConsolidationResult,
    MigrationPlan,
    MigrationTuple,
    PhysicalMachine,
    SimulatedState,
    VirtualMachine,
    aggregate_used,
    problem_from_json,
    problem_to_json,
    released_set,
    replay_plan,
)
from .moacs import (
    ColonyOutcome,
    StoppingCriterion,
    acs_baseline,
    f_released,
    g_migrations,
    global_update_nm,
    global_update_pr,
    moacs_consolidate,
    run_colony,
)
from .tuplespace import TupleSpace, build_tuple_space, max_tuple_count
from .workload import ScenarioSpec, assign_neighborhoods, generate_scenario

__version__ = "0.1.0"

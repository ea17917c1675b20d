"""Shared ant colony system machinery.

Pheromone store, destination-fullness heuristic, the pseudo-random-
proportional transition rule, and the local pheromone update used by both
colonies.  Ant walks are array-backed: an AntState keeps the heuristic values
and selection weights of all open tuples as numpy vectors so one transition
costs a single vector pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .domain import MigrationTuple, SimulatedState
from .exceptions import NoFeasibleContinuation
from .tuplespace import TupleSpace

#: Weight sentinel marking tuples an ant has already traversed.
_REMOVED = -1.0


@dataclass
class AcoParams:
    """Search knobs: evaporation rates, exploitation bias, population sizes."""

    alpha: float = 0.1
    beta: float = 2.0
    rho: float = 0.1
    q0: float = 0.9
    num_ants: int = 10
    num_generations: int = 2

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if not 0 <= self.q0 <= 1:
            raise ValueError(f"q0 must be in [0, 1], got {self.q0}")
        if self.num_ants < 1 or self.num_generations < 1:
            raise ValueError("num_ants and num_generations must be >= 1")

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "AcoParams":
        known = {k: doc[k] for k in
                 ("alpha", "beta", "rho", "q0", "num_ants", "num_generations")
                 if k in doc}
        return cls(**known)

    def to_mapping(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "rho": self.rho,
                "q0": self.q0, "num_ants": self.num_ants,
                "num_generations": self.num_generations}


@dataclass(eq=False)
class PheromoneMatrix:
    """Per-tuple pheromone levels plus the initialization level tau0."""

    values: np.ndarray
    tau0: float


def init_pheromone(tuple_space: TupleSpace, plan_size_estimate: int,
                   num_pms: int) -> PheromoneMatrix:
    """Uniform matrix at tau0 = 1 / (plan size estimate * number of PMs).

    Any rough estimate of the optimal plan size works; the solver uses the
    count of under-utilized PMs at round start.
    """
    if plan_size_estimate < 1:
        raise ValueError(f"plan_size_estimate must be >= 1, got {plan_size_estimate}")
    if num_pms < 1:
        raise ValueError(f"num_pms must be >= 1, got {num_pms}")
    tau0 = 1.0 / (plan_size_estimate * num_pms)
    return PheromoneMatrix(np.full(len(tuple_space), tau0, dtype=np.float64), tau0)


def heuristic_value(tup: MigrationTuple, state: SimulatedState) -> float:
    """Fullness of the destination after the move, 0 if the move overloads it.

    The per-dimension ratios (used + demand) / capacity are averaged into a
    scalar, so destinations with the least unused capacity score highest and
    the value reduces to the plain ratio at dimension 1.
    """
    v = state.vm_index[tup.vm]
    dst = state.pm_index[tup.dest]
    load = state.used[dst] + state.demand[v]
    cap = state.capacity[dst]
    if np.any(load > cap):
        return 0.0
    return float(np.mean(load / cap))


def eta_over_space(state: SimulatedState, tspace: TupleSpace) -> np.ndarray:
    """Vectorized heuristic values for every tuple in the space."""
    if len(tspace) == 0:
        return np.zeros(0, dtype=np.float64)
    load = state.used[tspace.dst] + state.demand[tspace.vm]
    cap = state.capacity[tspace.dst]
    feasible = np.all(load <= cap, axis=1)
    return np.where(feasible, np.mean(load / cap, axis=1), 0.0)


class AntState:
    """One ant's traversal bookkeeping over a tuple space.

    `weights[s]` caches tau_s * eta_s**beta for open tuples and holds the
    removal sentinel for traversed ones; `eta` tracks the heuristic against
    the ant's own simulated state.  `applied` records feasible migrations in
    traversal order and `best_len` marks the prefix with the best score.
    """

    __slots__ = ("tspace", "sim", "eta", "weights", "beta", "traversed",
                 "applied", "best_len", "best_score", "remaining_count",
                 "vm_moved", "empty_count")

    def __init__(self, tspace: TupleSpace, sim: SimulatedState,
                 matrix: PheromoneMatrix, beta: float,
                 eta0: np.ndarray | None = None,
                 eta0_pow: np.ndarray | None = None):
        self.tspace = tspace
        self.sim = sim
        self.beta = float(beta)
        if eta0 is None:
            eta0 = eta_over_space(sim, tspace)
        if eta0_pow is None:
            eta0_pow = eta0 ** self.beta
        self.eta = eta0.copy()
        self.weights = matrix.values * eta0_pow
        self.traversed: list[int] = []
        self.applied: list[int] = []
        self.best_len = 0
        self.best_score = 0
        self.remaining_count = len(tspace)
        self.vm_moved = np.zeros(len(sim.vm_ids), dtype=bool)
        self.empty_count = sim.num_empty()

    @property
    def remaining(self) -> set[int]:
        return set(np.nonzero(self.weights >= 0.0)[0].tolist())

    def accepted_ordinals(self) -> list[int]:
        return self.applied[:self.best_len]

    def accepted_tuples(self) -> tuple[MigrationTuple, ...]:
        return tuple(self.tspace.tuples[i] for i in self.accepted_ordinals())

    def mark_traversed(self, ordinal: int) -> None:
        self.weights[ordinal] = _REMOVED
        self.remaining_count -= 1
        self.traversed.append(ordinal)

    def refresh_dest(self, pm_idx: int, tau: np.ndarray) -> None:
        """Recompute heuristic and weights for open tuples aimed at one PM."""
        idx = self.tspace.by_dest[pm_idx]
        if idx.size == 0:
            return
        load = self.sim.used[pm_idx] + self.sim.demand[self.tspace.vm[idx]]
        cap = self.sim.capacity[pm_idx]
        feasible = np.all(load <= cap, axis=1)
        eta_new = np.where(feasible, np.mean(load / cap, axis=1), 0.0)
        self.eta[idx] = eta_new
        w_new = tau[idx] * eta_new ** self.beta
        w_new[self.weights[idx] < 0.0] = _REMOVED
        self.weights[idx] = w_new


def transition_probabilities(ant: AntState, matrix: PheromoneMatrix,
                             beta: float) -> dict[int, float]:
    """Selection distribution over the ant's open tuples.

    Tuples absent from the result have probability 0.  Raises
    NoFeasibleContinuation when every open tuple has heuristic value 0; the
    caller may keep traversing (selection then falls back to uniform) but no
    further migration can be feasible.
    """
    open_idx = np.nonzero(ant.weights >= 0.0)[0]
    if open_idx.size == 0:
        raise ValueError("ant has no remaining tuples")
    w = matrix.values[open_idx] * ant.eta[open_idx] ** beta
    total = w.sum()
    if total <= 0.0:
        raise NoFeasibleContinuation(
            "every remaining tuple would overload its destination")
    probs = w / total
    return {int(i): float(p) for i, p in zip(open_idx, probs)}


def choose_next_tuple(ant: AntState, matrix: PheromoneMatrix,
                      params: AcoParams, rng: np.random.Generator) -> int:
    """Pseudo-random-proportional selection of the ant's next tuple.

    With probability q0 the tuple maximizing tau * eta**beta is exploited
    (ties broken toward the smallest ordinal); otherwise one is sampled
    proportionally to the same weights, uniformly when all of them are 0.
    The chosen ordinal leaves the ant's remaining set.
    """
    if ant.remaining_count <= 0:
        raise ValueError("ant has no remaining tuples")
    w = ant.weights
    q = rng.random()
    if q <= params.q0:
        chosen = int(np.argmax(w))
    else:
        cum = np.cumsum(np.maximum(w, 0.0))
        total = cum[-1]
        if total <= 0.0:
            open_idx = np.nonzero(w >= 0.0)[0]
            chosen = int(open_idx[rng.integers(open_idx.size)])
        else:
            # r < cum[-1], so searchsorted lands on an open, positive-weight slot
            chosen = int(np.searchsorted(cum, rng.random() * total, side="right"))
    ant.mark_traversed(chosen)
    return chosen


def local_update(matrix: PheromoneMatrix, ordinal: int, params: AcoParams) -> None:
    """Convex pull of one pheromone entry toward tau0."""
    tau = matrix.values
    tau[ordinal] = (1.0 - params.rho) * tau[ordinal] + params.rho * matrix.tau0

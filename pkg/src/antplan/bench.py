"""Experiment harness: factorial runs, aggregates, exact Wilcoxon, scaling.

Raw per-run rows are always emitted alongside aggregates so every report
cell can be recomputed independently from the CSV.  Wall time covers the
solve call only, never generation or serialization.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .colony import AcoParams
from .domain import ConsolidationProblem, dump_json, problem_to_json
from .exceptions import DegenerateSampleError
from .moacs import StoppingCriterion, acs_baseline, moacs_consolidate
from .tuplespace import build_tuple_space
from .workload import ScenarioSpec, generate_scenario

_SOLVERS: dict[str, Callable] = {
    "moacs": moacs_consolidate,
    "acs": acs_baseline,
}

#: Largest sample for which the signed-rank p-value is computed exactly.
EXACT_WILCOXON_LIMIT = 25


@dataclass
class ExperimentConfig:
    scenarios: list[ScenarioSpec]
    algorithms: list[str]
    seeds: list[int]
    params: AcoParams = field(default_factory=AcoParams)
    stopping: StoppingCriterion = field(default_factory=StoppingCriterion)

    def __post_init__(self) -> None:
        if not self.scenarios or not self.algorithms or not self.seeds:
            raise ValueError("scenarios, algorithms and seeds must be nonempty")
        for algo in self.algorithms:
            if algo not in _SOLVERS:
                raise ValueError(f"unknown algorithm {algo!r}; "
                                 f"choose from {sorted(_SOLVERS)}")

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "ExperimentConfig":
        scenarios = [ScenarioSpec.from_mapping(s) for s in doc["scenarios"]]
        return cls(
            scenarios=scenarios,
            algorithms=list(doc["algorithms"]),
            seeds=[int(s) for s in doc["seeds"]],
            params=AcoParams.from_mapping(doc.get("params", {})),
            stopping=StoppingCriterion.from_mapping(doc.get("stopping", {})),
        )

    def to_mapping(self) -> dict:
        return {
            "scenarios": [s.to_mapping() for s in self.scenarios],
            "algorithms": list(self.algorithms),
            "seeds": list(self.seeds),
            "params": self.params.to_mapping(),
            "stopping": self.stopping.to_mapping(),
        }


@dataclass(frozen=True)
class RunRecord:
    scenario: int
    algo: str
    seed: int
    released: int
    migrations: int
    wall_ms: float
    num_pms: int = 0
    status: str = "ok"  # or "failed"
    problem_hash: str = ""


@dataclass(frozen=True)
class CellStats:
    scenario: int
    algo: str
    runs_ok: int
    runs_failed: int
    median_released: float | None
    sd_released: float | None
    median_migrations: float | None
    sd_migrations: float | None
    packing_efficiency: float | None
    median_wall_ms: float | None


@dataclass(frozen=True)
class PairwiseStat:
    scenario: int
    algo_a: str
    algo_b: str
    n: int
    released_stat: float | None
    released_p: float | None
    migrations_stat: float | None
    migrations_p: float | None


@dataclass
class ExperimentReport:
    cells: list[CellStats]
    pairwise: list[PairwiseStat]
    raw: list[RunRecord]

    def cell(self, scenario: int, algo: str) -> CellStats:
        for c in self.cells:
            if c.scenario == scenario and c.algo == algo:
                return c
        raise KeyError((scenario, algo))

    def to_mapping(self) -> dict:
        return {
            "cells": [vars(c) for c in self.cells],
            "pairwise": [vars(p) for p in self.pairwise],
        }


def packing_efficiency(released: float, total_pms: int) -> float:
    """Released PMs divided by total PMs."""
    if total_pms <= 0:
        raise ValueError(f"total_pms must be > 0, got {total_pms}")
    if not 0 <= released <= total_pms:
        raise ValueError(f"released must be in [0, {total_pms}], got {released}")
    return released / total_pms


# --- Wilcoxon signed-rank test ----------------------------------------------

def wilcoxon_signed_rank(paired_a: Sequence[float], paired_b: Sequence[float],
                         method: str = "auto") -> tuple[float, float]:
    """Two-sided paired signed-rank test.

    Returns (W+ - W-, p).  Zero differences are dropped before ranking and
    tied magnitudes share average ranks.  The p-value is exact (distribution
    of the signed rank sum over all 2^n sign assignments) for n <= 25 under
    method "auto", or always for "exact"; method "approx" uses the normal
    approximation with tie and continuity corrections.
    """
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    diff = a - b
    diff = diff[diff != 0.0]
    n = diff.size
    if n == 0:
        raise DegenerateSampleError("all paired differences are zero")
    ranks = scipy_stats.rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    stat = w_plus - w_minus
    if method == "exact" or (method == "auto" and n <= EXACT_WILCOXON_LIMIT):
        p = _exact_two_sided(ranks, stat)
    else:
        p = _approx_two_sided(w_plus, np.abs(diff), n)
    return stat, p


def _exact_two_sided(ranks: np.ndarray, stat: float) -> float:
    """P(|W+ - W-| >= |stat|) over all equally likely sign assignments.

    Computed from the exact distribution of the positive rank sum, built by
    convolution on the doubled-rank lattice (average ranks are multiples of
    one half); identical to enumerating all 2^n assignments.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.size - r]
        counts += shifted
    d_obs = abs(int(np.rint(2.0 * stat)))
    sums = 2 * np.arange(total + 1) - total  # doubled (W+ - W-) per lattice point
    favorable = counts[np.abs(sums) >= d_obs].sum()
    return float(favorable / 2.0 ** len(ranks))


def _approx_two_sided(w_plus: float, abs_diff: np.ndarray, n: int) -> float:
    """Normal approximation with tie correction and continuity correction."""
    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(abs_diff, return_counts=True)
    tie_term = float(((tie_counts ** 3 - tie_counts).sum()) / 48.0)
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if sigma2 <= 0:
        raise DegenerateSampleError("zero variance after tie correction")
    centered = w_plus - mu
    correction = 0.5 * math.copysign(1.0, centered) if centered != 0 else 0.0
    z = (centered - correction) / math.sqrt(sigma2)
    return float(min(1.0, 2.0 * scipy_stats.norm.sf(abs(z))))


# --- experiment runner -------------------------------------------------------

def problem_hash(problem: ConsolidationProblem) -> str:
    doc = json.dumps(problem_to_json(problem), sort_keys=True).encode()
    return hashlib.sha256(doc).hexdigest()


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run every (scenario, algorithm, seed) cell and aggregate.

    For each seed the problem instance is generated once and shared by all
    algorithms, so per-seed results are paired.  A solver failure marks its
    row "failed" and the run continues.
    """
    raw: list[RunRecord] = []
    for spec in config.scenarios:
        for seed in config.seeds:
            problem = generate_scenario(spec, seed)
            digest = problem_hash(problem)
            for algo in config.algorithms:
                solver = _SOLVERS[algo]
                try:
                    result = solver(problem, config.params, config.stopping, seed)
                    raw.append(RunRecord(spec.id, algo, seed,
                                         result.total_released,
                                         result.total_migrations,
                                         round(result.wall_time * 1000.0, 3),
                                         spec.num_pms, "ok", digest))
                except Exception:
                    raw.append(RunRecord(spec.id, algo, seed, 0, 0, 0.0,
                                         spec.num_pms, "failed", digest))
    return report_from_records(raw)


def report_from_records(raw: Sequence[RunRecord]) -> ExperimentReport:
    """Aggregate raw rows into the report; recomputable from the CSV alone."""
    cells: list[CellStats] = []
    scenarios = sorted({r.scenario for r in raw})
    algos = sorted({r.algo for r in raw})
    for scenario in scenarios:
        for algo in algos:
            rows = [r for r in raw if r.scenario == scenario and r.algo == algo]
            if not rows:
                continue
            ok = [r for r in rows if r.status == "ok"]
            failed = len(rows) - len(ok)
            if ok:
                released = [r.released for r in ok]
                migrations = [r.migrations for r in ok]
                med_rel = statistics.median(released)
                num_pms = rows[0].num_pms
                cells.append(CellStats(
                    scenario, algo, len(ok), failed,
                    med_rel,
                    statistics.stdev(released) if len(ok) > 1 else None,
                    statistics.median(migrations),
                    statistics.stdev(migrations) if len(ok) > 1 else None,
                    packing_efficiency(med_rel, num_pms) if num_pms > 0 else None,
                    statistics.median(r.wall_ms for r in ok),
                ))
            else:
                cells.append(CellStats(scenario, algo, 0, failed,
                                       None, None, None, None, None, None))
    pairwise: list[PairwiseStat] = []
    for scenario in scenarios:
        for i, algo_a in enumerate(algos):
            for algo_b in algos[i + 1:]:
                pairs = _paired_rows(raw, scenario, algo_a, algo_b)
                if not pairs:
                    continue
                rel_a = [p[0].released for p in pairs]
                rel_b = [p[1].released for p in pairs]
                mig_a = [p[0].migrations for p in pairs]
                mig_b = [p[1].migrations for p in pairs]
                rel = _safe_wilcoxon(rel_a, rel_b)
                mig = _safe_wilcoxon(mig_a, mig_b)
                pairwise.append(PairwiseStat(scenario, algo_a, algo_b, len(pairs),
                                             rel[0], rel[1], mig[0], mig[1]))
    return ExperimentReport(cells, pairwise, list(raw))


def _paired_rows(raw: Sequence[RunRecord], scenario: int,
                 algo_a: str, algo_b: str) -> list[tuple[RunRecord, RunRecord]]:
    by_seed_a = {r.seed: r for r in raw
                 if r.scenario == scenario and r.algo == algo_a and r.status == "ok"}
    by_seed_b = {r.seed: r for r in raw
                 if r.scenario == scenario and r.algo == algo_b and r.status == "ok"}
    return [(by_seed_a[s], by_seed_b[s])
            for s in sorted(set(by_seed_a) & set(by_seed_b))]


def _safe_wilcoxon(a: Sequence[float], b: Sequence[float]
                   ) -> tuple[float | None, float | None]:
    try:
        return wilcoxon_signed_rank(a, b)
    except DegenerateSampleError:
        return None, None


# --- scalability sweep -------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    num_pms: int
    num_vms: int
    algo: str
    num_tuples: int
    wall_times: tuple[float, ...]
    wall_time: float  # median of repeats, seconds
    status: str = "ok"  # or "timeout"


def scalability_sweep(base_spec: ScenarioSpec,
                      steps: Sequence[tuple[int, int]],
                      config: ExperimentConfig,
                      repeats: int = 3,
                      timeout_s: float | None = None) -> list[SweepRow]:
    """Time the solvers across fleet sizes; one row per (step, algorithm).

    Each repeat solves a freshly seeded copy of the same instance; rows carry
    the median wall time.  The timeout is cooperative: once a cell's elapsed
    budget is spent, remaining repeats are skipped and the row is marked.
    """
    if not steps:
        raise ValueError("steps must be nonempty")
    rows: list[SweepRow] = []
    seed = config.seeds[0]
    for num_pms, num_vms in steps:
        spec = replace(base_spec, num_pms=num_pms, num_vms=num_vms)
        problem = generate_scenario(spec, seed)
        num_tuples = len(build_tuple_space(problem))
        for algo in config.algorithms:
            solver = _SOLVERS[algo]
            times: list[float] = []
            status = "ok"
            started = time.perf_counter()
            for _ in range(repeats):
                result = solver(problem, config.params, config.stopping, seed)
                times.append(result.wall_time)
                if timeout_s is not None and time.perf_counter() - started > timeout_s:
                    status = "timeout"
                    break
            rows.append(SweepRow(num_pms, num_vms, algo, num_tuples,
                                 tuple(times), statistics.median(times), status))
    return rows


# --- file emission ------------------------------------------------------------

RAW_FIELDS = ["scenario", "algo", "seed", "released", "migrations", "wall_ms",
              "num_pms", "status", "problem_hash"]


def write_raw_csv(raw: Iterable[RunRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RAW_FIELDS)
        writer.writeheader()
        for r in raw:
            writer.writerow(vars(r))


def read_raw_csv(path) -> list[RunRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(int(row["scenario"]), row["algo"], int(row["seed"]),
                                 int(row["released"]), int(row["migrations"]),
                                 float(row["wall_ms"]), int(row.get("num_pms", 0)),
                                 row.get("status", "ok"),
                                 row.get("problem_hash", "")))
    return out


def write_report_json(report: ExperimentReport, path) -> None:
    dump_json(report.to_mapping(), path)


def write_report_csv(report: ExperimentReport, path) -> None:
    fields = ["scenario", "algo", "runs_ok", "runs_failed", "median_released",
              "sd_released", "median_migrations", "sd_migrations",
              "packing_efficiency", "median_wall_ms"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for c in report.cells:
            writer.writerow(vars(c))


def write_sweep_csv(rows: Iterable[SweepRow], path) -> None:
    fields = ["num_pms", "num_vms", "algo", "num_tuples", "wall_time", "status",
              "wall_times"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in rows:
            row = vars(r).copy()
            row["wall_times"] = ";".join(f"{t:.6f}" for t in r.wall_times)
            writer.writerow(row)

"""Experiment harness: packing efficiency, Wilcoxon test, runner, sweep."""
import itertools

import numpy as np
import pytest
from scipy import stats as scipy_stats

from antplan import (
    AcoParams,
    ExperimentConfig,
    ScenarioSpec,
    StoppingCriterion,
    packing_efficiency,
    run_experiment,
    scalability_sweep,
    wilcoxon_signed_rank,
)
from antplan.bench import (
    read_raw_csv,
    report_from_records,
    write_raw_csv,
    write_report_csv,
    write_report_json,
    write_sweep_csv,
)
from antplan.exceptions import DegenerateSampleError


def enumerate_exact_p(a, b):
    """Literal oracle: walk all 2^n sign assignments of the ranked |diffs|."""
    d = np.asarray(a, float) - np.asarray(b, float)
    d = d[d != 0]
    ranks = scipy_stats.rankdata(np.abs(d))
    observed = abs(ranks[d > 0].sum() - ranks[d < 0].sum())
    n = len(d)
    favorable = 0
    for signs in itertools.product((1, -1), repeat=n):
        total = sum(s * r for s, r in zip(signs, ranks))
        if abs(total) >= observed - 1e-12:
            favorable += 1
    return favorable / 2 ** n


class TestPackingEfficiency:
    def test_fifteen_of_hundred(self):
        assert packing_efficiency(15, 100) == pytest.approx(0.15)

    def test_zero(self):
        assert packing_efficiency(0, 100) == 0.0

    def test_eleven_of_two_hundred(self):
        assert packing_efficiency(11, 200) == pytest.approx(0.055)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            packing_efficiency(-1, 100)
        with pytest.raises(ValueError):
            packing_efficiency(101, 100)
        with pytest.raises(ValueError):
            packing_efficiency(1, 0)


class TestWilcoxon:
    def test_five_distinct_all_positive(self):
        stat, p = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
        assert stat == pytest.approx(15.0)
        assert p == pytest.approx(2 / 32, abs=1e-12)

    def test_ten_distinct_all_positive(self):
        a = list(range(1, 11))
        stat, p = wilcoxon_signed_rank(a, [0] * 10)
        assert stat == pytest.approx(55.0)
        assert p == pytest.approx(2 / 1024, abs=1e-12)

    def test_identical_samples_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])

    def test_matches_enumeration_on_random_samples(self):
        rng = np.random.default_rng(19)
        for _ in range(25):
            n = int(rng.integers(3, 11))
            a = rng.integers(0, 6, n).astype(float)
            b = rng.integers(0, 6, n).astype(float)
            if np.all(a == b):
                continue
            _, p = wilcoxon_signed_rank(a, b)
            assert p == pytest.approx(enumerate_exact_p(a, b), abs=1e-12)

    def test_handles_tied_magnitudes(self):
        a = [3.0, 3.0, 1.0, 5.0, 5.0, 2.0]
        b = [0.0, 0.0, 0.0, 0.0, 0.0, 4.0]
        _, p = wilcoxon_signed_rank(a, b)
        assert p == pytest.approx(enumerate_exact_p(a, b), abs=1e-12)

    def test_symmetry_negates_statistic_preserves_p(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            a = rng.normal(0, 1, 12)
            b = rng.normal(0.3, 1, 12)
            s_ab, p_ab = wilcoxon_signed_rank(a, b)
            s_ba, p_ba = wilcoxon_signed_rank(b, a)
            assert s_ab == pytest.approx(-s_ba)
            assert p_ab == pytest.approx(p_ba, abs=1e-12)

    def test_exact_and_approx_agree_at_boundary(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            a = rng.normal(0.0, 1.0, 25)
            b = rng.normal(0.4, 1.0, 25)
            _, p_exact = wilcoxon_signed_rank(a, b, method="exact")
            _, p_approx = wilcoxon_signed_rank(a, b, method="approx")
            assert abs(p_exact - p_approx) < 0.01

    def test_auto_switches_to_approximation_beyond_cutoff(self):
        rng = np.random.default_rng(41)
        a = rng.normal(0.0, 1.0, 40)
        b = rng.normal(0.5, 1.0, 40)
        stat_auto, p_auto = wilcoxon_signed_rank(a, b)
        stat_ap, p_ap = wilcoxon_signed_rank(a, b, method="approx")
        assert stat_auto == stat_ap and p_auto == p_ap

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1, 2], [1, 2, 3])


def tiny_config(**overrides):
    base = dict(
        scenarios=[ScenarioSpec.table_defaults(1).resize(30, 8)],
        algorithms=["moacs", "acs"],
        seeds=[1, 2, 3],
        params=AcoParams(num_ants=3, num_generations=1),
        stopping=StoppingCriterion(max_rounds=2, no_improvement_rounds=1),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_singleton_cell_median_is_observation(self):
        config = tiny_config(algorithms=["moacs"], seeds=[5])
        report = run_experiment(config)
        cell = report.cell(1, "moacs")
        assert cell.runs_ok == 1
        raw = report.raw[0]
        assert cell.median_released == raw.released
        assert cell.sd_released is None
        assert cell.packing_efficiency == pytest.approx(raw.released / 8)

    def test_paired_problems_share_hash(self):
        config = tiny_config()
        report = run_experiment(config)
        by_seed = {}
        for r in report.raw:
            by_seed.setdefault(r.seed, set()).add(r.problem_hash)
        assert all(len(hashes) == 1 for hashes in by_seed.values())

    def test_failed_cell_recorded_and_run_continues(self, monkeypatch):
        import antplan.bench as bench_mod

        def explode(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setitem(bench_mod._SOLVERS, "acs", explode)
        report = run_experiment(tiny_config())
        acs_rows = [r for r in report.raw if r.algo == "acs"]
        assert all(r.status == "failed" for r in acs_rows)
        moacs_rows = [r for r in report.raw if r.algo == "moacs"]
        assert all(r.status == "ok" for r in moacs_rows)
        assert report.cell(1, "acs").runs_ok == 0

    def test_pairwise_stats_present(self):
        report = run_experiment(tiny_config())
        assert len(report.pairwise) == 1
        pw = report.pairwise[0]
        assert {pw.algo_a, pw.algo_b} == {"moacs", "acs"}
        assert pw.n == 3

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(algorithms=["simulated-annealing"])

    def test_config_mapping_round_trip(self):
        config = tiny_config()
        back = ExperimentConfig.from_mapping(config.to_mapping())
        assert back.to_mapping() == config.to_mapping()


class TestCsvRoundTrip:
    def test_raw_csv_preserves_rows_and_report(self, tmp_path):
        report = run_experiment(tiny_config())
        path = tmp_path / "raw.csv"
        write_raw_csv(report.raw, path)
        back = read_raw_csv(path)
        assert back == report.raw
        recomputed = report_from_records(back)
        assert recomputed.to_mapping() == report.to_mapping()

    def test_report_files_written(self, tmp_path):
        report = run_experiment(tiny_config(algorithms=["moacs"], seeds=[1]))
        write_report_json(report, tmp_path / "report.json")
        write_report_csv(report, tmp_path / "report.csv")
        assert (tmp_path / "report.json").stat().st_size > 0
        header = (tmp_path / "report.csv").read_text().splitlines()[0]
        assert "median_released" in header


class TestScalabilitySweep:
    def test_two_steps_produce_rows(self, tmp_path):
        config = tiny_config(algorithms=["moacs"], seeds=[3])
        rows = scalability_sweep(ScenarioSpec.table_defaults(1),
                                 [(8, 30), (12, 60)], config, repeats=2)
        assert len(rows) == 2
        assert all(r.wall_time > 0 for r in rows)
        assert all(len(r.wall_times) == 2 for r in rows)
        assert rows[0].num_tuples > 0
        write_sweep_csv(rows, tmp_path / "sweep.csv")
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_empty_steps_rejected(self):
        with pytest.raises(ValueError):
            scalability_sweep(ScenarioSpec.table_defaults(1), [],
                              tiny_config(), repeats=1)

"""Domain-pair sweeps: coverage bookkeeping, determinism, reports."""

import math

import numpy as np
import pytest

from driftcal.config import RunConfig
from driftcal.errors import IncompatibleDatasets, MissingMethod
from driftcal.evalharness import (
    Method,
    PairResult,
    SweepReport,
    emit_report,
    evaluate_pair,
    paired_comparison,
    read_report_csv,
    render_report_csv,
    render_summary,
    sweep_all_pairs,
)
from driftcal.synthlab import LabelModel, ShiftSpec, gen_covariate_shift, gen_domain
from driftcal.util import derive_seed

SPEC = ShiftSpec(dim=2, cal_mean=(1.0, 0.0), test_mean=(0.0, 0.0), shared_stddev=1.0,
                 label_model=LabelModel(6, (1.0, 0.0), 0.4))


def make_domains(n_domains, n=120, seed=60):
    lm = LabelModel(4, (1.0, 0.0), 0.4)
    return [
        gen_domain(n, (0.4 * i, 0.0), 1.0, lm, derive_seed(seed, i), f"dom{i:02d}")
        for i in range(n_domains)
    ]


class TestEvaluatePair:
    def test_in_sample_sanity(self):
        cal, _ = gen_covariate_shift(400, 1, SPEC, seed=61)
        result = evaluate_pair(cal, cal, Method.CP, 0.1, RunConfig(seed=61))
        assert result.coverage >= 0.9 - 3.0 / math.sqrt(cal.n)
        assert result.n_test == cal.n

    def test_infinite_threshold_full_sets(self):
        cal, test = gen_covariate_shift(3, 50, SPEC, seed=62)  # tiny n escalates
        result = evaluate_pair(cal, test, Method.CP, 0.1, RunConfig())
        assert result.threshold == math.inf
        assert result.coverage == 1.0
        assert result.avg_set_size == cal.n_choices

    def test_dscp_with_uniform_weights_equals_cp(self):
        cal, test = gen_covariate_shift(150, 150, SPEC, seed=63)
        cfg = RunConfig(seed=63)
        cp = evaluate_pair(cal, test, Method.CP, 0.1, cfg)
        ds = evaluate_pair(cal, test, Method.DSCP, 0.1, cfg, force_uniform_weights=True)
        assert ds.threshold == cp.threshold
        assert ds.coverage == cp.coverage
        assert ds.avg_set_size == cp.avg_set_size

    def test_incompatible_datasets(self):
        cal, _ = gen_covariate_shift(20, 1, SPEC, seed=64)
        other = make_domains(1, n=20)[0]  # K=4 instead of 6
        with pytest.raises(IncompatibleDatasets):
            evaluate_pair(cal, other, Method.CP, 0.1, RunConfig())

    def test_coverage_times_n_is_integer(self):
        cal, test = gen_covariate_shift(80, 77, SPEC, seed=65)
        for method in (Method.CP, Method.DSCP, Method.NONEXCH_CP, Method.WEIGHTED_CP):
            r = evaluate_pair(cal, test, method, 0.1, RunConfig(seed=65))
            assert r.coverage * r.n_test == pytest.approx(round(r.coverage * r.n_test), abs=1e-9)
            assert 0.0 <= r.avg_set_size <= cal.n_choices

    def test_weighted_cp_runs_per_point(self):
        cal, test = gen_covariate_shift(60, 40, SPEC, seed=66)
        r = evaluate_pair(cal, test, Method.WEIGHTED_CP, 0.1, RunConfig(seed=66))
        assert 0.0 <= r.coverage <= 1.0

    def test_lac_threshold_at_least_one_fills_sets(self):
        cal, test = gen_covariate_shift(150, 100, SPEC, seed=67)
        r = evaluate_pair(cal, test, Method.CP, 0.1, RunConfig())
        if r.threshold >= 1.0:
            assert r.avg_set_size == cal.n_choices


class TestSweep:
    def test_row_count_two_domains_two_methods(self):
        report = sweep_all_pairs(make_domains(2), [Method.CP, Method.DSCP],
                                 0.1, RunConfig(seed=1), parallelism=1)
        assert len(report.rows) == 4  # 2 ordered pairs x 2 methods

    def test_row_count_seventeen_domains_one_method(self):
        report = sweep_all_pairs(make_domains(17, n=25), [Method.CP],
                                 0.1, RunConfig(seed=2), parallelism=2)
        assert len(report.rows) == 272

    def test_single_domain_rejected(self):
        with pytest.raises(IncompatibleDatasets):
            sweep_all_pairs(make_domains(1), [Method.CP], 0.1, RunConfig())

    def test_deterministic_across_parallelism(self):
        domains = make_domains(4, n=60)
        cfg = RunConfig(seed=3)
        methods = [Method.CP, Method.DSCP]
        reports = [
            sweep_all_pairs(domains, methods, 0.1, cfg, parallelism=p)
            for p in (1, 4)
        ]
        texts = [render_report_csv(r) for r in reports]
        assert texts[0] == texts[1]

    def test_row_ordering_is_lexicographic(self):
        report = sweep_all_pairs(make_domains(3, n=40), [Method.DSCP, Method.CP],
                                 0.1, RunConfig(seed=4), parallelism=1)
        keys = [(r.cal_domain, r.test_domain, r.method.value) for r in report.rows]
        assert keys == sorted(keys)


class TestPairedComparison:
    def test_baseline_equals_treatment_on_diagonal(self):
        report = sweep_all_pairs(make_domains(3, n=50), [Method.CP], 0.1,
                                 RunConfig(seed=5), parallelism=1)
        rows = paired_comparison(report, Method.CP, Method.CP, alpha=0.1)
        assert all(r.baseline_coverage == r.treatment_coverage for r in rows)

    def test_missing_method_raises(self):
        report = sweep_all_pairs(make_domains(2, n=50), [Method.CP], 0.1,
                                 RunConfig(seed=6), parallelism=1)
        with pytest.raises(MissingMethod):
            paired_comparison(report, Method.CP, Method.DSCP, alpha=0.1)

    def test_flags_partition_on_target(self):
        report = sweep_all_pairs(make_domains(4, n=80), [Method.CP, Method.DSCP],
                                 0.1, RunConfig(seed=7), parallelism=2)
        rows = paired_comparison(report, Method.CP, Method.DSCP, alpha=0.1)
        for r in rows:
            assert r.under_covered == (r.baseline_coverage < 0.9)


class TestReports:
    def test_csv_round_trip_exact_at_six_digits(self, tmp_path):
        report = sweep_all_pairs(make_domains(3, n=64), [Method.CP, Method.DSCP],
                                 0.1, RunConfig(seed=8), parallelism=2)
        paths = emit_report(report, tmp_path, alpha=0.1)
        parsed = read_report_csv(tmp_path / "report.csv")
        assert len(parsed.rows) == len(report.rows)
        for got, want in zip(parsed.rows, report.rows):
            assert got.cal_domain == want.cal_domain
            assert got.test_domain == want.test_domain
            assert got.method == want.method
            assert got.n_test == want.n_test
            assert got.coverage == pytest.approx(want.coverage, abs=5e-7)
            assert got.avg_set_size == pytest.approx(want.avg_set_size, abs=5e-7)
        # re-render from parsed rows reproduces the file byte for byte
        assert render_report_csv(parsed) == (tmp_path / "report.csv").read_text()
        assert {p.name for p in paths} == {"report.csv", "summary.txt",
                                           "scatter_cp_vs_dscp.csv"}

    def test_infinite_threshold_literal(self):
        row = PairResult("a", "b", Method.CP, 1.0, 6.0, 10, math.inf)
        text = render_report_csv(SweepReport(rows=(row,)))
        assert text.splitlines()[1].endswith(",inf")

    def test_header_only_for_empty_rows(self):
        text = render_report_csv(SweepReport(rows=()))
        assert text == "cal_domain,test_domain,method,coverage,avg_set_size,n_test,threshold\n"

    def test_summary_contains_per_method_lines(self):
        report = sweep_all_pairs(make_domains(2, n=50), [Method.CP, Method.DSCP],
                                 0.1, RunConfig(seed=9), parallelism=1)
        summary = render_summary(report, alpha=0.1)
        assert "method=cp" in summary and "method=dscp" in summary
        assert "median_coverage=" in summary and "frac_under_target=" in summary


class TestDirectionalClaim:
    def test_dscp_beats_cp_where_cp_fails(self):
        """Where standard CP meaningfully under-covers (mean below 0.87),
        the estimated-weight pipeline must recover coverage; 500 fresh-data
        replications of a strongly shifted pair."""
        spec = ShiftSpec(dim=1, cal_mean=(1.5,), test_mean=(0.0,), shared_stddev=1.0,
                         label_model=LabelModel(6, (1.0,), 0.4))
        cfg = RunConfig(seed=70)
        cp_cov, ds_cov = [], []
        for rep in range(500):
            cal, test = gen_covariate_shift(200, 200, spec, derive_seed(70, "rep", rep))
            cp_cov.append(evaluate_pair(cal, test, Method.CP, 0.1, cfg).coverage)
            ds_cov.append(evaluate_pair(cal, test, Method.DSCP, 0.1, cfg).coverage)
        assert np.mean(cp_cov) < 0.9 - 0.03  # the suite qualifies
        assert np.mean(ds_cov) > np.mean(cp_cov)

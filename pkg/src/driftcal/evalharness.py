"""Ordered domain-pair evaluation: coverage and set size per method.

For every ordered (calibration-domain, test-domain) pair the harness
runs a conformal method end to end and records empirical coverage (the
fraction of test samples whose true label lands in the prediction set)
and average set size.  Four methods are supported:

* ``cp``       - standard split CP, uniform weights.
* ``dscp``     - density-ratio weighted calibration with a regularized
                 infinity weight; one threshold per pair.
* ``weighted`` - classical weighted CP; each test point's own estimated
                 ratio becomes the infinity weight, so thresholds vary
                 per test point.
* ``nonexch``  - fixed-weight CP with weights in [0, 1]; the harness
                 uses estimated ratios scaled by their maximum, which
                 reduces to standard CP when no shift is detected.

DS-CP retrains its domain classifier for every ordered pair: each pair
is its own shift problem.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .conformal import nonexch_cp_threshold, standard_cp_threshold, weighted_cp_threshold
from .dataio import DomainDataset
from .errors import IncompatibleDatasets, MissingMethod, ParseError
from .pipeline import calibrate, compute_weights, resolve_lambda
from .ratio import fit_density_ratio
from .scores import score_matrix, softmax_rows
from .util import derive_seed


class Method(str, enum.Enum):
    CP = "cp"
    DSCP = "dscp"
    WEIGHTED_CP = "weighted"
    NONEXCH_CP = "nonexch"


@dataclass(frozen=True)
class PairResult:
    cal_domain: str
    test_domain: str
    method: Method
    coverage: float
    avg_set_size: float
    n_test: int
    threshold: float  # may be math.inf; median over test points for `weighted`


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[PairResult, ...]
    config_snapshot: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScatterRow:
    cal_domain: str
    test_domain: str
    baseline_coverage: float
    treatment_coverage: float
    under_covered: bool  # baseline below the 1 - alpha target


def _true_label_scores(matrix: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return matrix[np.arange(labels.shape[0]), labels]


def evaluate_pair(cal: DomainDataset, test: DomainDataset, method: Method,
                  alpha: float, config: RunConfig,
                  force_uniform_weights: bool = False) -> PairResult:
    """Run one method on one ordered pair.

    ``force_uniform_weights`` replaces estimated ratios with ones (useful
    for checking that DS-CP with uniform weights and lambda 1 collapses
    to standard CP).
    """
    if cal.dim != test.dim or cal.n_choices != test.n_choices:
        raise IncompatibleDatasets(
            f"pair ({cal.domain_id!r}, {test.domain_id!r}): "
            f"d {cal.dim}/{test.dim}, K {cal.n_choices}/{test.n_choices}"
        )
    kind = config.score_kind
    cal_scores = _true_label_scores(score_matrix(softmax_rows(cal.logits), kind), cal.labels)
    test_matrix = score_matrix(softmax_rows(test.logits), kind)
    test_true = _true_label_scores(test_matrix, test.labels)

    if method in (Method.DSCP, Method.WEIGHTED_CP, Method.NONEXCH_CP):
        if force_uniform_weights:
            cal_ratios = np.ones(cal.n)
            test_ratios = np.ones(test.n)
        else:
            seed = derive_seed(config.seed, cal.domain_id, test.domain_id)
            classifier_cfg = replace(config.classifier, seed=seed)
            model = fit_density_ratio(cal.embeddings, test.embeddings,
                                      classifier_cfg, config.clip)
            cal_ratios = compute_weights(model, cal.embeddings)
            test_ratios = model.ratios(test.embeddings)

    if method is Method.CP:
        q = standard_cp_threshold(cal_scores, alpha).q
        row_thresholds = np.full(test.n, q)
    elif method is Method.DSCP:
        lam = resolve_lambda(config.lambda_policy, cal_ratios)
        q = calibrate(cal_scores, cal_ratios, lam, alpha, kind).threshold.q
        row_thresholds = np.full(test.n, q)
    elif method is Method.NONEXCH_CP:
        fixed = cal_ratios / cal_ratios.max()
        q = nonexch_cp_threshold(cal_scores, fixed, alpha).q
        row_thresholds = np.full(test.n, q)
    else:  # classical weighted CP: one threshold per test point
        row_thresholds = np.array([
            weighted_cp_threshold(cal_scores, cal_ratios, float(r), alpha).q
            for r in test_ratios
        ])
        q = float(np.median(row_thresholds))

    covered = test_true <= row_thresholds
    sizes = (test_matrix <= row_thresholds[:, None]).sum(axis=1)
    return PairResult(
        cal_domain=cal.domain_id,
        test_domain=test.domain_id,
        method=method,
        coverage=float(covered.sum()) / test.n,
        avg_set_size=float(sizes.sum()) / test.n,
        n_test=test.n,
        threshold=q,
    )


def sweep_all_pairs(datasets: list[DomainDataset], methods: list[Method],
                    alpha: float, config: RunConfig,
                    parallelism: int | None = None) -> SweepReport:
    """Every ordered pair of distinct domains, every method.

    Row order is (cal_domain, test_domain, method) lexicographic and does
    not depend on the parallelism degree.
    """
    if len(datasets) < 2:
        raise IncompatibleDatasets("a sweep needs at least 2 domains")
    by_id = {ds.domain_id: ds for ds in datasets}
    if len(by_id) != len(datasets):
        raise IncompatibleDatasets("duplicate domain ids in sweep input")
    domain_ids = sorted(by_id)
    method_order = sorted(methods, key=lambda m: m.value)
    jobs = [
        (cal_id, test_id, method)
        for cal_id in domain_ids
        for test_id in domain_ids
        if cal_id != test_id
        for method in method_order
    ]

    def run(job):
        cal_id, test_id, method = job
        return evaluate_pair(by_id[cal_id], by_id[test_id], method, alpha, config)

    workers = parallelism if parallelism and parallelism > 0 else config.effective_parallelism()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(run, jobs))
    else:
        rows = tuple(run(job) for job in jobs)

    snapshot = dict(config.snapshot())
    snapshot["methods"] = [m.value for m in method_order]
    return SweepReport(rows=rows, config_snapshot=snapshot)


def paired_comparison(report: SweepReport, baseline: Method,
                      treatment: Method, alpha: float) -> list[ScatterRow]:
    """Per-pair coverage of treatment vs baseline, flagging under-coverage.

    The flag marks pairs where the baseline covers strictly below
    1 - alpha.
    """
    table: dict[tuple[str, str, Method], PairResult] = {
        (r.cal_domain, r.test_domain, r.method): r for r in report.rows
    }
    pairs = sorted({(r.cal_domain, r.test_domain) for r in report.rows})
    rows = []
    for cal_id, test_id in pairs:
        base = table.get((cal_id, test_id, baseline))
        treat = table.get((cal_id, test_id, treatment))
        if base is None or treat is None:
            missing = baseline if base is None else treatment
            raise MissingMethod(f"pair ({cal_id!r}, {test_id!r}) lacks method {missing.value!r}")
        rows.append(ScatterRow(
            cal_domain=cal_id,
            test_domain=test_id,
            baseline_coverage=base.coverage,
            treatment_coverage=treat.coverage,
            under_covered=base.coverage < 1.0 - alpha,
        ))
    return rows


REPORT_HEADER = "cal_domain,test_domain,method,coverage,avg_set_size,n_test,threshold"


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6f}"


def render_report_csv(report: SweepReport) -> str:
    lines = [REPORT_HEADER]
    for r in report.rows:
        lines.append(
            f"{r.cal_domain},{r.test_domain},{r.method.value},"
            f"{_fmt(r.coverage)},{_fmt(r.avg_set_size)},{r.n_test},{_fmt(r.threshold)}"
        )
    return "".join(line + "\n" for line in lines)


def render_summary(report: SweepReport, alpha: float) -> str:
    """Per-method median coverage and fraction of pairs under target."""
    methods = sorted({r.method for r in report.rows}, key=lambda m: m.value)
    lines = [f"alpha={alpha:.6f} target_coverage={1.0 - alpha:.6f}"]
    for method in methods:
        cov = np.array([r.coverage for r in report.rows if r.method is method])
        sizes = np.array([r.avg_set_size for r in report.rows if r.method is method])
        under = float((cov < 1.0 - alpha).mean())
        lines.append(
            f"method={method.value} pairs={cov.size} "
            f"median_coverage={np.median(cov):.6f} mean_coverage={cov.mean():.6f} "
            f"frac_under_target={under:.6f} mean_set_size={sizes.mean():.6f}"
        )
    return "".join(line + "\n" for line in lines)


def render_scatter_csv(rows: list[ScatterRow]) -> str:
    lines = ["cal_domain,test_domain,baseline_coverage,treatment_coverage,under_covered"]
    for r in rows:
        lines.append(
            f"{r.cal_domain},{r.test_domain},{_fmt(r.baseline_coverage)},"
            f"{_fmt(r.treatment_coverage)},{int(r.under_covered)}"
        )
    return "".join(line + "\n" for line in lines)


def emit_report(report: SweepReport, out_dir, alpha: float,
                formats: tuple[str, ...] = ("csv", "summary-text", "plot-data"),
                baseline: Method = Method.CP,
                treatment: Method = Method.DSCP) -> list[Path]:
    """Write the requested artifacts into ``out_dir``; returns the paths.

    ``plot-data`` emits the paired coverage scatter for (baseline,
    treatment) and is skipped when either method is absent from the
    report.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        if "csv" in formats:
            path = out / "report.csv"
            path.write_text(render_report_csv(report))
            written.append(path)
        if "summary-text" in formats:
            path = out / "summary.txt"
            path.write_text(render_summary(report, alpha))
            written.append(path)
        if "plot-data" in formats:
            present = {r.method for r in report.rows}
            if baseline in present and treatment in present:
                rows = paired_comparison(report, baseline, treatment, alpha)
                path = out / f"scatter_{baseline.value}_vs_{treatment.value}.csv"
                path.write_text(render_scatter_csv(rows))
                written.append(path)
    except OSError as exc:
        raise ParseError(f"cannot write report into {out}: {exc}") from None
    return written


def read_report_csv(path) -> SweepReport:
    """Parse a report.csv produced by :func:`render_report_csv`."""
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"report not found: {p}")
    rows = []
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = REPORT_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ParseError(f"unexpected header in {p}: {reader.fieldnames}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(PairResult(
                    cal_domain=rec["cal_domain"],
                    test_domain=rec["test_domain"],
                    method=Method(rec["method"]),
                    coverage=float(rec["coverage"]),
                    avg_set_size=float(rec["avg_set_size"]),
                    n_test=int(rec["n_test"]),
                    threshold=math.inf if rec["threshold"] == "inf" else float(rec["threshold"]),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad report row: {exc}", line=lineno) from None
    return SweepReport(rows=tuple(rows))

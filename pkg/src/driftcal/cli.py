"""Command-line interface.

Subcommands::

    driftcal synth SPEC OUT_DIR        generate synthetic domain files
    driftcal calibrate CAL TEST        fit weights and write an artifact
    driftcal predict ARTIFACT SAMPLES  emit per-sample prediction sets
    driftcal sweep DATA_DIR OUT_DIR    evaluate all ordered domain pairs
    driftcal report REPORT_CSV OUT_DIR re-derive summary and plot data

Exit codes: 0 on success, 2 for usage or validation errors, 1 for
unexpected runtime failures.  All randomness flows from ``--seed``
(fallback: the DRIFTCAL_SEED environment variable, then 0).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, evalharness, pipeline, synthlab
from .config import RunConfig, load_config_file, resolve_config
from .errors import DriftcalError, InvalidSpec, ParseError
from .pipeline import LambdaPolicy
from .ratio import fit_density_ratio, import_external_weights
from .scores import ScoreKind, score_matrix, softmax_rows
from .util import derive_seed


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--alpha", type=float, default=None, help="miscoverage level (default 0.1)")
    parser.add_argument("--score", choices=["lac", "aps"], default=None,
                        help="nonconformity score (default lac)")
    parser.add_argument("--lambda", dest="lambda_policy", default=None, metavar="POLICY",
                        help="regularized weight: a number, 'max', or 'q:<level>' (default 1)")
    parser.add_argument("--l2", type=float, default=None, help="classifier L2 strength")
    parser.add_argument("--max-iters", type=int, default=None, help="classifier GD iterations")
    parser.add_argument("--tol", type=float, default=None, help="classifier stopping tolerance")
    parser.add_argument("--clip", type=float, nargs=2, default=None, metavar=("LO", "HI"),
                        help="density-ratio clip bounds (default 1e-3 1e3)")
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    parser.add_argument("--parallelism", type=int, default=None,
                        help="max concurrent pair evaluations (default: cores)")


def _build_config(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    return resolve_config(
        file_values,
        alpha=args.alpha,
        score_kind=ScoreKind(args.score) if args.score else None,
        lambda_policy=LambdaPolicy.parse(args.lambda_policy) if args.lambda_policy else None,
        l2=args.l2,
        max_iters=getattr(args, "max_iters", None),
        tol=args.tol,
        clip=tuple(args.clip) if args.clip else None,
        seed=args.seed,
        parallelism=args.parallelism,
    )


def _parse_domain_layout(path) -> tuple[dict, list[tuple[str, tuple[float, ...]]]]:
    """A spec file is either one cal/test pair or a list of named domains."""
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"spec file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid spec file {p}: {exc}") from None
    if "domains" in obj:
        try:
            domains = [(str(d["name"]), tuple(float(v) for v in d["mean"]))
                       for d in obj["domains"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed domains list: {exc}") from None
        if len(domains) < 2:
            raise InvalidSpec("need at least 2 domains")
        base = dict(obj)
        base["cal_mean"] = list(domains[0][1])
        base["test_mean"] = list(domains[1][1])
        return base, domains
    spec = synthlab.shift_spec_from_dict(obj)  # validates the pair form
    return obj, [("cal", spec.cal_mean), ("test", spec.test_mean)]


def cmd_synth(args) -> int:
    base_obj, domains = _parse_domain_layout(args.spec)
    spec = synthlab.shift_spec_from_dict(base_obj)
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    entries = []
    for name, mean in domains:
        n = args.n_cal if name == domains[0][0] else args.n_test
        ds = synthlab.gen_domain(n, mean, spec.shared_stddev, spec.label_model,
                                 derive_seed(seed, name), name)
        fname = f"{name}.jsonl"
        dataio.write_samples(ds.to_records(), out / fname)
        entries.append(dataio.ManifestEntry(
            path=fname, domain=name, sha256=dataio.sha256_file(out / fname)))
    manifest = dataio.DatasetManifest(
        files=tuple(entries), d=spec.dim, k=spec.label_model.n_choices,
        profile="generic", extra={"seed": seed},
    )
    dataio.save_manifest(manifest, out / "manifest.json")
    print(f"wrote {len(entries)} domain files + manifest.json to {out}")
    return 0


def cmd_calibrate(args) -> int:
    config = _build_config(args)
    cal_records = dataio.load_samples(args.cal_path)
    test_records = dataio.load_samples(args.test_path)
    cal = dataio.DomainDataset.from_records(cal_records)
    test = dataio.DomainDataset.from_records(test_records)
    if cal.dim != test.dim:
        raise InvalidSpec(f"embedding dims differ: {cal.dim} vs {test.dim}")

    kind = config.score_kind
    cal_scores = score_matrix(softmax_rows(cal.logits), kind)[
        np.arange(cal.n), cal.labels]

    if args.uniform_weights:
        weights = np.ones(cal.n)
        weight_source = "uniform"
    elif args.external_weights:
        weights = import_external_weights(args.external_weights, expected_n=cal.n)
        weight_source = f"external:{args.external_weights}"
    else:
        model = fit_density_ratio(cal.embeddings, test.embeddings,
                                  config.classifier, config.clip,
                                  test_holdout=args.test_holdout)
        weights = pipeline.compute_weights(model, cal.embeddings)
        weight_source = "domain-classifier"

    lam = pipeline.resolve_lambda(config.lambda_policy, weights)
    provenance = {
        "cal_path": str(args.cal_path),
        "test_path": str(args.test_path),
        "d": cal.dim,
        "k": cal.n_choices,
        "n_cal": cal.n,
        "weight_source": weight_source,
        "lambda_policy": config.lambda_policy.describe(),
    }
    calib = pipeline.calibrate(cal_scores, weights, lam, config.alpha, kind,
                               provenance=provenance)
    pipeline.save_calibration(calib, args.out)

    q = calib.threshold.q
    print(f"threshold={'inf' if calib.threshold.is_infinite else f'{q:.6f}'} "
          f"alpha={config.alpha:g} score={kind.value} lambda={lam:.6g}")
    print(f"weights: n={cal.n} min={weights.min():.6g} "
          f"median={np.median(weights):.6g} max={weights.max():.6g} "
          f"source={weight_source}")
    print(f"wrote calibration artifact to {args.out}")
    return 0


def cmd_predict(args) -> int:
    calib = pipeline.load_calibration(args.artifact)
    records = dataio.load_samples(args.samples)
    expected_k = calib.provenance.get("k")
    lines = ["id,set_members,set_size,covered"]
    covered_total = 0
    for rec in records:
        if expected_k is not None and len(rec.logits) != int(expected_k):
            raise InvalidSpec(
                f"sample {rec.id!r} has {len(rec.logits)} choices, artifact expects {expected_k}")
        pset = pipeline.predict(calib, rec.logits)
        members = pset.sorted_members()
        covered = int(rec.label in pset.members)
        covered_total += covered
        lines.append(f"{rec.id},{'|'.join(str(m) for m in members)},{len(members)},{covered}")
    text = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(records)} prediction rows to {args.out}")
    else:
        sys.stdout.write(text)
    if records:
        print(f"coverage={covered_total / len(records):.6f} n={len(records)}")
    return 0


def _discover_domains(data_dir) -> list[dataio.DomainDataset]:
    root = Path(data_dir)
    if not root.is_dir():
        raise ParseError(f"dataset directory not found: {root}")
    manifest_path = root / "manifest.json"
    datasets = []
    if manifest_path.is_file():
        manifest = dataio.load_manifest(manifest_path, verify=True)
        mmlu = manifest.profile == "mmlu"
        for entry in manifest.files:
            datasets.append(dataio.load_domain(
                root / entry.path, expected_d=manifest.d, expected_k=manifest.k,
                mmlu_profile=mmlu, domain_id=entry.domain))
    else:
        for path in sorted(root.glob("*.jsonl")):
            datasets.append(dataio.load_domain(path))
    return datasets


def cmd_sweep(args) -> int:
    config = _build_config(args)
    datasets = _discover_domains(args.data_dir)
    if len(datasets) < 2:
        raise InvalidSpec(f"found {len(datasets)} domain(s); a sweep needs at least 2")
    methods = [evalharness.Method(m.strip()) for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise InvalidSpec("no methods requested")
    report = evalharness.sweep_all_pairs(datasets, methods, config.alpha, config,
                                         parallelism=config.effective_parallelism())
    written = evalharness.emit_report(report, args.out_dir, config.alpha)
    print(f"evaluated {len(report.rows)} (pair, method) rows across "
          f"{len(datasets)} domains")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    alpha = args.alpha if args.alpha is not None else 0.1
    report = evalharness.read_report_csv(args.report_csv)
    written = evalharness.emit_report(report, args.out_dir, alpha,
                                      formats=("summary-text", "plot-data"))
    summary = evalharness.render_summary(report, alpha)
    sys.stdout.write(summary)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftcal",
        description="Domain-shift-aware conformal prediction sets for "
                    "multiple-choice classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic domain datasets")
    p.add_argument("spec", help="JSON shift-spec file")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--n-cal", type=int, default=200, help="samples for the first domain")
    p.add_argument("--n-test", type=int, default=200, help="samples per remaining domain")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="calibrate a threshold from two sample files")
    p.add_argument("cal_path", help="calibration-domain samples (JSONL)")
    p.add_argument("test_path", help="test-domain samples (JSONL)")
    p.add_argument("--out", required=True, help="calibration artifact path")
    p.add_argument("--uniform-weights", action="store_true",
                   help="skip the classifier; use weights of 1 (standard CP)")
    p.add_argument("--external-weights", default=None,
                   help="plain-text file with one weight per calibration row")
    p.add_argument("--test-holdout", type=float, default=0.0,
                   help="fraction of test prompts kept out of classifier "
                        "training (default 0: use the full pool)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="emit prediction sets for a sample file")
    p.add_argument("artifact", help="calibration artifact (JSON)")
    p.add_argument("samples", help="samples to predict on (JSONL)")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="evaluate every ordered domain pair")
    p.add_argument("data_dir", help="directory of domain files (+ optional manifest)")
    p.add_argument("out_dir", help="directory for report artifacts")
    p.add_argument("--methods", default="cp,dscp",
                   help="comma list from {cp,dscp,weighted,nonexch} (default cp,dscp)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize an existing report.csv")
    p.add_argument("report_csv")
    p.add_argument("out_dir")
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DriftcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

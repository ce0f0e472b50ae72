"""Command-line interface: ``embedprep embed`` and ``embedprep convert``.

Exit codes: 0 on success, 2 for input/validation errors, 1 for
unexpected runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from .convert import SCHEMAS, convert_logits
from .embed import DEFAULT_MODEL_ID, embed_file
from .errors import EmbedPrepError


def cmd_embed(args) -> int:
    n = embed_file(
        args.in_path, args.out_path,
        model_id=args.model,
        batch_size=args.batch_size,
        with_choices=args.with_choices,
        normalize=args.normalize,
        manifest_path=args.manifest,
    )
    print(f"embedded {n} records with model {args.model!r} -> {args.out_path}")
    return 0


def cmd_convert(args) -> int:
    n = convert_logits(
        args.in_path, args.out_path,
        schema=args.schema,
        mmlu_profile=args.mmlu_profile,
        default_domain=args.domain,
    )
    print(f"converted {n} records -> {args.out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedprep",
        description="Prepare question datasets for domain-shift-aware "
                    "conformal calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed raw question records into sample records")
    p.add_argument("in_path", help="raw-question JSONL file")
    p.add_argument("out_path", help="sample-record JSONL output")
    p.add_argument("--model", default=DEFAULT_MODEL_ID,
                   help=f"embedding model id (default {DEFAULT_MODEL_ID}; "
                        "'hashed-<d>' for the offline reference backend)")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--with-choices", action="store_true",
                   help="embed question text with answer choices appended")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize embeddings (default: store as produced)")
    p.add_argument("--manifest", default=None,
                   help="manifest path (default: manifest.json next to the output)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("convert", help="convert a pickled logit dump to raw records")
    p.add_argument("in_path", help="pickle file")
    p.add_argument("out_path", help="raw-question JSONL output")
    p.add_argument("--schema", default="uncertainty-bench", choices=SCHEMAS)
    p.add_argument("--mmlu-profile", action="store_true",
                   help="require K=6 and drop item positions 1,3,5,7,9")
    p.add_argument("--domain", default="mmlu",
                   help="domain name for records that carry none")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmbedPrepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

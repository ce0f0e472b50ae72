"""Run configuration shared by the eval harness and the CLI.

Precedence: CLI flags override config-file values, which override the
defaults below.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InvalidSpec, ParseError
from .pipeline import LambdaPolicy
from .ratio import DEFAULT_CLIP, ClassifierConfig
from .scores import ScoreKind

SEED_ENV_VAR = "DRIFTCAL_SEED"


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.1
    score_kind: ScoreKind = ScoreKind.LAC
    lambda_policy: LambdaPolicy = field(default_factory=LambdaPolicy.fixed)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    clip: tuple[float, float] = DEFAULT_CLIP
    seed: int = 0
    parallelism: int = 0  # 0 means "use available cores"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidSpec(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.clip[0] <= self.clip[1]:
            raise InvalidSpec(f"clip bounds must satisfy 0 < lo <= hi, got {self.clip}")

    def effective_parallelism(self) -> int:
        if self.parallelism > 0:
            return self.parallelism
        return os.cpu_count() or 1

    def snapshot(self) -> dict:
        """JSON-ready view, recorded in reports for reproducibility."""
        return {
            "alpha": self.alpha,
            "score_kind": self.score_kind.value,
            "lambda_policy": self.lambda_policy.describe(),
            "classifier": {
                "l2": self.classifier.l2,
                "max_iters": self.classifier.max_iters,
                "tol": self.classifier.tol,
            },
            "clip": list(self.clip),
            "seed": self.seed,
        }


def load_config_file(path) -> dict:
    """Read a JSON config file into a plain dict of overrides."""
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"config file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid config file {p}: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError(f"config file {p} must contain a JSON object")
    return obj


def resolve_config(file_values: dict | None = None, **flag_values) -> RunConfig:
    """Merge defaults <- config file <- explicit flags (None = unset).

    The ``DRIFTCAL_SEED`` environment variable supplies the seed when
    neither a flag nor the config file sets one.
    """
    cfg = RunConfig()
    merged: dict = {}
    if file_values:
        merged.update(_parse_file_values(file_values))
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    if "seed" not in merged and os.environ.get(SEED_ENV_VAR):
        merged["seed"] = int(os.environ[SEED_ENV_VAR])

    classifier_keys = {"l2", "max_iters", "tol"}
    cls_overrides = {k: merged.pop(k) for k in list(merged) if k in classifier_keys}
    if cls_overrides:
        merged["classifier"] = replace(cfg.classifier, **cls_overrides)
    return replace(cfg, **merged)


def _parse_file_values(obj: dict) -> dict:
    out: dict = {}
    if "alpha" in obj:
        out["alpha"] = float(obj["alpha"])
    if "score_kind" in obj:
        out["score_kind"] = ScoreKind(str(obj["score_kind"]).lower())
    if "lambda" in obj:
        out["lambda_policy"] = LambdaPolicy.parse(str(obj["lambda"]))
    if "clip" in obj:
        lo, hi = obj["clip"]
        out["clip"] = (float(lo), float(hi))
    if "seed" in obj:
        out["seed"] = int(obj["seed"])
    if "parallelism" in obj:
        out["parallelism"] = int(obj["parallelism"])
    for key in ("l2", "max_iters", "tol"):
        if key in obj:
            out[key] = type(getattr(ClassifierConfig(), key))(obj[key])
    return out

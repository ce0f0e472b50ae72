"""Synthetic datasets with known ground truth, plus coverage-bound diagnostics.

Embeddings are isotropic Gaussians; calibration and test domains share
the covariance and differ only in mean, so the density ratio has a
closed form.  Labels follow a softmax over per-class logits

    logit_k(z) = affinity_k * <weight_vector, z> / noise_temp,

with per-class affinities evenly spaced in [-1, 1].  The conditional
label law depends on z only through the projection <weight_vector, z>
and is identical across domains (pure covariate shift).  Emitted logits
are the generative ones, so the score distribution of each domain is a
known function of a univariate Gaussian and total-variation distances
between score laws can be computed by quadrature.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import DomainDataset
from .errors import InvalidSpec, InvalidTV, InvalidWeight, ParseError, ShapeError
from .pipeline import LambdaPolicy, calibrate, resolve_lambda
from .scores import ScoreKind, score_matrix, softmax_rows
from .util import derive_seed


@dataclass(frozen=True)
class LabelModel:
    """Softmax label law shared by both domains."""

    n_choices: int
    weight_vector: tuple[float, ...]
    noise_temp: float

    def affinities(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n_choices)


@dataclass(frozen=True)
class ShiftSpec:
    """Gaussian covariate-shift family: two means, one shared stddev."""

    dim: int
    cal_mean: tuple[float, ...]
    test_mean: tuple[float, ...]
    shared_stddev: float
    label_model: LabelModel

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidSpec(f"dim must be >= 1, got {self.dim}")
        if len(self.cal_mean) != self.dim or len(self.test_mean) != self.dim:
            raise InvalidSpec("mean vectors must have length dim")
        if not self.shared_stddev > 0:
            raise InvalidSpec(f"stddev must be positive, got {self.shared_stddev}")
        if self.label_model.n_choices < 2:
            raise InvalidSpec("label model needs at least 2 choices")
        if len(self.label_model.weight_vector) != self.dim:
            raise InvalidSpec("label weight vector must have length dim")
        if not self.label_model.noise_temp > 0:
            raise InvalidSpec("noise temperature must be positive")
        if not all(math.isfinite(v) for v in (*self.cal_mean, *self.test_mean,
                                              *self.label_model.weight_vector)):
            raise InvalidSpec("spec contains non-finite values")

    @property
    def shift_sigmas(self) -> float:
        """Mean shift measured in units of the shared stddev."""
        diff = np.subtract(self.test_mean, self.cal_mean)
        return float(np.linalg.norm(diff) / self.shared_stddev)


def shift_spec_from_dict(obj: dict) -> ShiftSpec:
    """Build a spec from its JSON representation."""
    try:
        lm = obj["label_model"]
        return ShiftSpec(
            dim=int(obj["d"]),
            cal_mean=tuple(float(v) for v in obj["cal_mean"]),
            test_mean=tuple(float(v) for v in obj["test_mean"]),
            shared_stddev=float(obj["shared_stddev"]),
            label_model=LabelModel(
                n_choices=int(lm["K"]),
                weight_vector=tuple(float(v) for v in lm["weight_vector"]),
                noise_temp=float(lm["noise_temp"]),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"malformed shift spec: {exc}") from None


def load_shift_spec(path) -> ShiftSpec:
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"spec file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid spec file {p}: {exc}") from None
    return shift_spec_from_dict(obj)


def _labels_from_probs(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    labels = (cum < u[:, None]).sum(axis=1)
    return np.minimum(labels, probs.shape[1] - 1)


def label_logits(z: np.ndarray, model: LabelModel) -> np.ndarray:
    """Generative per-class logits for embeddings z, shape (n, K)."""
    s = z @ np.asarray(model.weight_vector, dtype=np.float64)
    return np.outer(s, model.affinities()) / model.noise_temp


def gen_domain(n: int, mean, stddev: float, model: LabelModel, seed: int,
               domain_id: str) -> DomainDataset:
    """Sample one domain: Gaussian embeddings, generative logits, labels."""
    if n < 1:
        raise InvalidSpec(f"need n >= 1 samples, got {n}")
    mean = np.asarray(mean, dtype=np.float64)
    rng = np.random.default_rng(seed)
    z = mean + stddev * rng.standard_normal((n, mean.shape[0]))
    logits = label_logits(z, model)
    labels = _labels_from_probs(rng, softmax_rows(logits))
    return DomainDataset(
        domain_id=domain_id,
        ids=[f"{domain_id}-{i:05d}" for i in range(n)],
        embeddings=z,
        logits=logits,
        labels=labels,
    )


def gen_covariate_shift(n_cal: int, n_test: int, spec: ShiftSpec, seed: int,
                        cal_domain: str = "cal", test_domain: str = "test",
                        ) -> tuple[DomainDataset, DomainDataset]:
    """Calibration and test domains with identical conditional label law."""
    if n_cal < 1 or n_test < 1:
        raise InvalidSpec(f"need n_cal >= 1 and n_test >= 1, got {n_cal}, {n_test}")
    cal = gen_domain(n_cal, spec.cal_mean, spec.shared_stddev, spec.label_model,
                     derive_seed(seed, "cal"), cal_domain)
    test = gen_domain(n_test, spec.test_mean, spec.shared_stddev, spec.label_model,
                      derive_seed(seed, "test"), test_domain)
    return cal, test


def gen_exchangeable(n_cal: int, n_test: int, spec: ShiftSpec, seed: int,
                     cal_domain: str = "cal", test_domain: str = "test",
                     ) -> tuple[DomainDataset, DomainDataset]:
    """Both domains drawn i.i.d. from the calibration distribution.

    Requires a spec whose means coincide.
    """
    if spec.cal_mean != spec.test_mean:
        raise InvalidSpec("exchangeable generation requires equal means")
    return gen_covariate_shift(n_cal, n_test, spec, seed, cal_domain, test_domain)


def oracle_ratio(z, spec: ShiftSpec) -> float:
    """Exact Gaussian density ratio dP_test/dP_cal at one embedding."""
    v = np.asarray(z, dtype=np.float64).reshape(-1)
    c = np.asarray(spec.cal_mean)
    t = np.asarray(spec.test_mean)
    sq_cal = float(((v - c) ** 2).sum())
    sq_test = float(((v - t) ** 2).sum())
    return math.exp((sq_cal - sq_test) / (2.0 * spec.shared_stddev**2))


def oracle_ratios(z_rows, spec: ShiftSpec) -> np.ndarray:
    """Vectorized :func:`oracle_ratio` over an (n, d) matrix."""
    z = np.asarray(z_rows, dtype=np.float64)
    c = np.asarray(spec.cal_mean)
    t = np.asarray(spec.test_mean)
    sq_cal = ((z - c) ** 2).sum(axis=1)
    sq_test = ((z - t) ** 2).sum(axis=1)
    return np.exp((sq_cal - sq_test) / (2.0 * spec.shared_stddev**2))


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the stdlib error function (|err| < 1e-15)."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def tv_univariate_gaussian(mean1: float, mean2: float, sigma: float) -> float:
    """Total variation between N(mean1, sigma^2) and N(mean2, sigma^2).

    Equals 2 * Phi(|mean1 - mean2| / (2 sigma)) - 1: symmetric in the
    means, zero at equal means, and monotone in their distance.
    """
    if not sigma > 0:
        raise InvalidSpec(f"sigma must be positive, got {sigma}")
    return 2.0 * normal_cdf(abs(mean1 - mean2) / (2.0 * sigma)) - 1.0


@dataclass(frozen=True)
class TheoryGapReport:
    """Computable pieces of the coverage lower/upper bounds.

    ``lower_gap`` is twice the mass-weighted sum of per-point TV terms
    (independent-scores form of the lower bound); ``upper_slack`` is the
    infinity-atom mass.  Masses are the realized, data-dependent values
    for this weight vector, not essential suprema over the data law.
    """

    lower_gap: float
    upper_slack: float
    per_i_masses: np.ndarray


def theory_gap(weights, lam: float, tv_per_i) -> TheoryGapReport:
    """Evaluate the bound terms for realized weights and TV distances."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    tv = np.asarray(tv_per_i, dtype=np.float64).reshape(-1)
    if w.shape != tv.shape:
        raise ShapeError(f"{w.size} weights vs {tv.size} TV values")
    if np.any(w < 0) or lam < 0:
        raise InvalidWeight("weights and lambda must be non-negative")
    if np.any(tv < 0) or np.any(tv > 1):
        raise InvalidTV("TV distances must lie in [0, 1]")
    total = float(w.sum() + lam)
    if total <= 0:
        raise InvalidWeight("total weight is zero")
    masses = w / total
    return TheoryGapReport(
        lower_gap=float(2.0 * (masses * tv).sum()),
        upper_slack=lam / total,
        per_i_masses=masses,
    )


def score_projection_params(spec: ShiftSpec) -> tuple[float, float, float]:
    """Mean (cal), mean (test) and stddev of s = <w, z> under each domain."""
    w = np.asarray(spec.label_model.weight_vector, dtype=np.float64)
    tau = float(spec.shared_stddev * np.linalg.norm(w))
    return float(w @ spec.cal_mean), float(w @ spec.test_mean), tau


def tv_score_distributions(spec: ShiftSpec, kind: ScoreKind,
                           n_bins: int = 8192, n_grid: int = 32769,
                           span: float = 9.0) -> float:
    """TV distance between the score laws of the two domains, by quadrature.

    The score is a deterministic function of the projection s = <w, z>
    (univariate Gaussian under each domain) and the sampled label.  Mass
    is accumulated on a fine score grid per (s, label) branch and the TV
    is half the L1 distance of the binned laws.  Bin resolution bounds
    the error well below 1e-3 at the defaults.
    """
    m_cal, m_test, tau = score_projection_params(spec)
    if tau == 0.0:
        return 0.0  # scores are label-marginal only; identical laws
    lo = min(m_cal, m_test) - span * tau
    hi = max(m_cal, m_test) + span * tau
    s = np.linspace(lo, hi, n_grid)
    ds = s[1] - s[0]
    # Trapezoid weights.
    quad = np.full(n_grid, ds)
    quad[0] = quad[-1] = ds / 2.0

    logits = np.outer(s, spec.label_model.affinities()) / spec.label_model.noise_temp
    probs = softmax_rows(logits)
    scores = score_matrix(probs, kind)  # (n_grid, K)

    pdf_cal = np.exp(-((s - m_cal) ** 2) / (2 * tau**2)) / (tau * math.sqrt(2 * math.pi))
    pdf_test = np.exp(-((s - m_test) ** 2) / (2 * tau**2)) / (tau * math.sqrt(2 * math.pi))

    edges = np.linspace(0.0, 1.0 + 1e-12, n_bins + 1)
    hist_cal = np.zeros(n_bins)
    hist_test = np.zeros(n_bins)
    for k in range(spec.label_model.n_choices):
        idx = np.clip(np.searchsorted(edges, scores[:, k], side="right") - 1, 0, n_bins - 1)
        np.add.at(hist_cal, idx, probs[:, k] * pdf_cal * quad)
        np.add.at(hist_test, idx, probs[:, k] * pdf_test * quad)
    hist_cal /= hist_cal.sum()
    hist_test /= hist_test.sum()
    return float(0.5 * np.abs(hist_cal - hist_test).sum())


@dataclass(frozen=True)
class MethodSpec:
    """One conformal variant to run inside a replication study."""

    name: str
    weight_mode: str  # "uniform" | "oracle"
    lambda_policy: LambdaPolicy

    def __post_init__(self):
        if self.weight_mode not in ("uniform", "oracle"):
            raise InvalidSpec(f"unknown weight mode {self.weight_mode!r}")


@dataclass
class ReplicationStats:
    """Per-replication coverage, set size, and bound diagnostics."""

    coverages: np.ndarray
    set_sizes: np.ndarray
    upper_slacks: np.ndarray
    lower_gaps: np.ndarray | None = None

    @property
    def mean_coverage(self) -> float:
        return float(self.coverages.mean())

    @property
    def mean_set_size(self) -> float:
        return float(self.set_sizes.mean())


def _one_replication(spec, n_cal, n_test, alpha, kind, methods, seed, tv_per_point):
    cal, test = gen_covariate_shift(n_cal, n_test, spec, seed)
    cal_probs = softmax_rows(cal.logits)
    cal_scores = score_matrix(cal_probs, kind)[np.arange(cal.n), cal.labels]
    test_probs = softmax_rows(test.logits)
    test_matrix = score_matrix(test_probs, kind)
    test_true = test_matrix[np.arange(test.n), test.labels]

    out = {}
    for method in methods:
        if method.weight_mode == "uniform":
            weights = np.ones(cal.n)
        else:
            weights = oracle_ratios(cal.embeddings, spec)
        lam = resolve_lambda(method.lambda_policy, weights)
        calib = calibrate(cal_scores, weights, lam, alpha, kind)
        q = calib.threshold.q
        coverage = float((test_true <= q).mean())
        set_size = float((test_matrix <= q).sum(axis=1).mean())
        slack = lam / (weights.sum() + lam)
        gap = None
        if tv_per_point is not None:
            gap = theory_gap(weights, lam, np.full(cal.n, tv_per_point)).lower_gap
        out[method.name] = (coverage, set_size, slack, gap)
    return out


def run_replications(spec: ShiftSpec, n_cal: int, n_test: int, alpha: float,
                     kind: ScoreKind, methods: list[MethodSpec], reps: int,
                     seed: int, tv_per_point: float | None = None,
                     parallelism: int = 1) -> dict[str, ReplicationStats]:
    """Repeatedly draw fresh data and evaluate each method on shared draws.

    Replications are independent (each owns a derived seed) and may run
    concurrently; results are merged in replication order, so the output
    is identical for any parallelism degree.
    """
    rep_seeds = [derive_seed(seed, "rep", r) for r in range(reps)]

    def job(r: int):
        return _one_replication(spec, n_cal, n_test, alpha, kind, methods,
                                rep_seeds[r], tv_per_point)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(job, range(reps)))
    else:
        results = [job(r) for r in range(reps)]

    stats: dict[str, ReplicationStats] = {}
    for method in methods:
        rows = [results[r][method.name] for r in range(reps)]
        stats[method.name] = ReplicationStats(
            coverages=np.array([row[0] for row in rows]),
            set_sizes=np.array([row[1] for row in rows]),
            upper_slacks=np.array([row[2] for row in rows]),
            lower_gaps=(np.array([row[3] for row in rows])
                        if tv_per_point is not None else None),
        )
    return stats


def write_spec_file(spec: ShiftSpec, path) -> None:
    """Serialize a spec in the JSON layout read by :func:`load_shift_spec`."""
    payload = {
        "d": spec.dim,
        "cal_mean": list(spec.cal_mean),
        "test_mean": list(spec.test_mean),
        "shared_stddev": spec.shared_stddev,
        "label_model": {
            "K": spec.label_model.n_choices,
            "weight_vector": list(spec.label_model.weight_vector),
            "noise_temp": spec.label_model.noise_temp,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


__all__ = [
    "LabelModel",
    "ShiftSpec",
    "shift_spec_from_dict",
    "load_shift_spec",
    "write_spec_file",
    "label_logits",
    "gen_domain",
    "gen_covariate_shift",
    "gen_exchangeable",
    "oracle_ratio",
    "oracle_ratios",
    "normal_cdf",
    "tv_univariate_gaussian",
    "TheoryGapReport",
    "theory_gap",
    "score_projection_params",
    "tv_score_distributions",
    "MethodSpec",
    "ReplicationStats",
    "run_replications",
]

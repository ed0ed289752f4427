"""Distance-threshold calibration from labelled pair statistics.

For each level k = 1..N-1 the calibrator samples Hamming distances of
relevant (same person id) and non-relevant pairs, fits a Gaussian to each
class, and picks the integer threshold t_{k+1} in [0, l_k] maximizing an
F_beta score built from the two cumulative distribution functions:

    R(t) = CDF_r(t)
    P(t) = CDF_r(t) / (CDF_r(t) + rho * CDF_n(t)),   rho = n_n / n_r
    F_beta(t) = (beta^2 + 1) P R / (beta^2 P + R)

beta > 1 weights recall (accuracy, larger thresholds); beta < 1 weights
precision (speed, smaller thresholds). The search is an exhaustive integer
grid scan: at most l_k + 1 evaluations per level, so no joint multi-level
search is ever needed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .codebook import CodeLengthSchedule, MultiLevelCodebook, ThresholdSet

SIGMA_FLOOR = 0.5
DEFAULT_MAX_PAIRS = 1_000_000
DEFAULT_SEED = 20
_SQRT2 = math.sqrt(2.0)

FORMULA_DERIVED = "derived"
FORMULA_VERBATIM = "paper"


@dataclass
class PairDistanceSample:
    """Hamming distances of sampled relevant and non-relevant pairs at one level."""

    relevant: np.ndarray
    nonrelevant: np.ndarray
    level_length: int


@dataclass
class GaussianPairModel:
    """Fitted (mean, std) of the two pair-distance classes, in bit units."""

    u_r: float
    sigma_r: float
    u_n: float
    sigma_n: float
    n_r: int
    n_n: int
    class_ratio: float

    def check(self) -> None:
        if self.u_n < self.u_r:
            warnings.warn(
                f"non-relevant mean {self.u_n:.2f} below relevant mean {self.u_r:.2f}; "
                "classes look swapped or degenerate",
                stacklevel=3,
            )


@dataclass(frozen=True)
class FBetaConfig:
    """Weighting parameter and which score formula variant to evaluate."""

    beta: float = 2.0
    formula_mode: str = FORMULA_DERIVED

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta {self.beta} not positive")
        if self.formula_mode not in (FORMULA_DERIVED, FORMULA_VERBATIM):
            raise ValueError(f"unknown formula mode {self.formula_mode!r}")


def fit_gaussian(samples) -> tuple[float, float]:
    """Maximum-likelihood mean and (floored) population standard deviation."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        raise ValueError(f"need at least 2 samples to fit, got {samples.size}")
    u = float(samples.mean())
    sigma = max(float(samples.std()), SIGMA_FLOOR)
    return u, sigma


def gaussian_cdf(t: float, u: float, sigma: float) -> float:
    """Normal CDF: (1 + erf((t - u) / (sigma * sqrt(2)))) / 2."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return 0.5 * (1.0 + math.erf((t - u) / (sigma * _SQRT2)))


def f_beta_score(t: float, model: GaussianPairModel, cfg: FBetaConfig) -> float:
    """Score threshold t under the fitted pair model."""
    cdf_r = gaussian_cdf(t, model.u_r, model.sigma_r)
    cdf_n = gaussian_cdf(t, model.u_n, model.sigma_n)
    b2 = cfg.beta * cfg.beta
    if cfg.formula_mode == FORMULA_VERBATIM:
        return cdf_r * (b2 + 1.0) / (cdf_n + cdf_r + b2 * (1.0 - cdf_n + cdf_r))
    recall = cdf_r
    denom = cdf_r + model.class_ratio * cdf_n
    precision = cdf_r / denom if denom > 0 else 0.0
    if b2 * precision + recall == 0:
        return 0.0
    return (b2 + 1.0) * precision * recall / (b2 * precision + recall)


def optimize_threshold(model: GaussianPairModel, cfg: FBetaConfig, level_length: int) -> int:
    """Exhaustive integer grid argmax of f_beta_score over [0, level_length].

    Ties break toward the smaller threshold (the faster search). Any future
    accelerated search must reproduce this scan exactly.
    """
    model.check()
    best_t = 0
    best_score = -math.inf
    for t in range(level_length + 1):
        score = f_beta_score(t, model, cfg)
        if score > best_score:
            best_t, best_score = t, score
    return best_t


def _pair_row_of(local: np.ndarray, m: np.ndarray) -> np.ndarray:
    """First element i of the local-th (i<j) pair in row-major enumeration."""
    disc = (2 * m - 1).astype(np.float64) ** 2 - 8.0 * local
    i = ((2 * m - 1) - np.sqrt(disc)) // 2
    i = i.astype(np.int64)
    # float sqrt can land one row off; nudge with exact integer bounds
    for _ in range(2):
        start = i * (2 * m - i - 1) // 2
        i = np.where(start > local, i - 1, i)
        nxt = (i + 1) * (2 * m - i - 2) // 2
        i = np.where(nxt <= local, i + 1, i)
    return i


def _decode_within_group(local: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i = _pair_row_of(local, m)
    start = i * (2 * m - i - 1) // 2
    j = local - start + i + 1
    return i, j


def _pair_distances(matrix_words: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(len(a), dtype=np.int32)
    chunk = 1 << 18
    for lo in range(0, len(a), chunk):
        hi = min(lo + chunk, len(a))
        xor = np.bitwise_xor(matrix_words[a[lo:hi]], matrix_words[b[lo:hi]])
        out[lo:hi] = np.bitwise_count(xor).sum(axis=1, dtype=np.int32)
    return out


def collect_pair_distances(
    cb: MultiLevelCodebook,
    level: int,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    rng_seed: int = DEFAULT_SEED,
) -> PairDistanceSample:
    """Sample same-id and different-id pair distances at a 1-based level.

    If a class has at most max_pairs pairs they are all used; otherwise the
    class is sampled uniformly without replacement under rng_seed.
    """
    if not 1 <= level <= cb.n_levels:
        raise ValueError(f"level {level} outside [1, {cb.n_levels}]")
    n = cb.n_items
    ids = cb.person_ids
    order = np.argsort(ids, kind="stable")
    _, starts, sizes = np.unique(ids[order], return_index=True, return_counts=True)
    pair_counts = sizes.astype(np.int64) * (sizes - 1) // 2
    rel_total = int(pair_counts.sum())
    nonrel_total = n * (n - 1) // 2 - rel_total
    if rel_total == 0:
        raise ValueError("no relevant pairs: no person id appears twice")
    if nonrel_total == 0:
        raise ValueError("no non-relevant pairs: all items share one person id")
    rng = np.random.default_rng(rng_seed)
    words = cb.levels[level - 1].words

    # relevant pairs: flat index into the concatenated per-group pair spaces
    if rel_total <= max_pairs:
        flat = np.arange(rel_total, dtype=np.int64)
    else:
        flat = rng.choice(rel_total, size=max_pairs, replace=False)
    cum = np.concatenate(([0], np.cumsum(pair_counts)))
    g = np.searchsorted(cum, flat, side="right") - 1
    i, j = _decode_within_group(flat - cum[g], sizes[g].astype(np.int64))
    rel_a = order[starts[g] + i]
    rel_b = order[starts[g] + j]
    relevant = _pair_distances(words, rel_a, rel_b)

    # non-relevant pairs: enumerate when small, else rejection-sample
    if nonrel_total <= max_pairs:
        ii, jj = np.triu_indices(n, k=1)
        keep = ids[ii] != ids[jj]
        non_a, non_b = ii[keep], jj[keep]
    else:
        seen: set[int] = set()
        acc_a: list[np.ndarray] = []
        acc_b: list[np.ndarray] = []
        need = max_pairs
        while need > 0:
            m = max(2 * need, 4096)
            x = rng.integers(0, n, size=m, dtype=np.int64)
            y = rng.integers(0, n, size=m, dtype=np.int64)
            lo, hi = np.minimum(x, y), np.maximum(x, y)
            ok = (lo != hi) & (ids[lo] != ids[hi])
            codes = lo[ok] * n + hi[ok]
            fresh = np.empty(len(codes), dtype=np.int64)
            count = 0
            for c in codes:
                c = int(c)
                if c not in seen:
                    seen.add(c)
                    fresh[count] = c
                    count += 1
                    if count == need:
                        break
            fresh = fresh[:count]
            acc_a.append(fresh // n)
            acc_b.append(fresh % n)
            need -= count
        non_a = np.concatenate(acc_a)
        non_b = np.concatenate(acc_b)
    nonrelevant = _pair_distances(words, non_a, non_b)

    return PairDistanceSample(relevant, nonrelevant, cb.schedule.lengths[level - 1])


def fit_pair_model(sample: PairDistanceSample, class_ratio: float | None = None) -> GaussianPairModel:
    """Fit both Gaussians; class ratio defaults to the sampled n_n / n_r."""
    u_r, sigma_r = fit_gaussian(sample.relevant)
    u_n, sigma_n = fit_gaussian(sample.nonrelevant)
    n_r, n_n = len(sample.relevant), len(sample.nonrelevant)
    if class_ratio is None:
        class_ratio = n_n / n_r
    return GaussianPairModel(u_r, sigma_r, u_n, sigma_n, n_r, n_n, class_ratio)


def fit_pair_models(
    cb: MultiLevelCodebook,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    rng_seed: int = DEFAULT_SEED,
    class_ratio: float | None = None,
) -> list[GaussianPairModel]:
    """One fitted pair model per level 1..N-1 (independent streams per level)."""
    seeds = np.random.SeedSequence(rng_seed).spawn(cb.n_levels - 1)
    models = []
    for k in range(1, cb.n_levels):
        sample = collect_pair_distances(cb, k, max_pairs, seeds[k - 1])
        models.append(fit_pair_model(sample, class_ratio))
    return models


def thresholds_from_models(
    models: list[GaussianPairModel], schedule: CodeLengthSchedule, cfg: FBetaConfig
) -> ThresholdSet:
    thresholds = [
        optimize_threshold(model, cfg, schedule.lengths[k]) for k, model in enumerate(models)
    ]
    return ThresholdSet(lengths=tuple(schedule), thresholds=tuple(thresholds), beta=cfg.beta)


def calibrate(
    cb_validation: MultiLevelCodebook,
    cfg: FBetaConfig,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    rng_seed: int = DEFAULT_SEED,
    class_ratio: float | None = None,
) -> ThresholdSet:
    """Full loop: sample pairs, fit Gaussians, and optimize each stage gate."""
    if cb_validation.n_levels < 2:
        raise ValueError("calibration needs at least two levels")
    models = fit_pair_models(cb_validation, max_pairs, rng_seed, class_ratio)
    return thresholds_from_models(models, cb_validation.schedule, cfg)

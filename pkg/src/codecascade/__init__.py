"""Cascaded binary-code retrieval engine.

Short codes rank the whole gallery in linear time, calibrated Hamming
distance thresholds keep a small candidate set, and progressively longer
codes refine the survivors. Calibration fits Gaussian models to relevant and
non-relevant pair distances and maximizes an F_beta score per stage.
"""

from .calibration import (
    FBetaConfig,
    GaussianPairModel,
    PairDistanceSample,
    calibrate,
    collect_pair_distances,
    f_beta_score,
    fit_gaussian,
    fit_pair_model,
    fit_pair_models,
    gaussian_cdf,
    optimize_threshold,
    thresholds_from_models,
)
from .cascade import QueryCodes, RankedResult, ctf_search, full_rank
from .codebook import (
    JUNK_PERSON_ID,
    CodebookFormatError,
    CodeLengthSchedule,
    InvariantViolation,
    MultiLevelCodebook,
    PackedCodeMatrix,
    ThresholdSet,
    load_codebook,
    load_thresholds,
    pack_codes,
    save_codebook,
    save_thresholds,
    unpack_codes,
    validate,
)
from .evaluation import EvalOutcome, average_precision, evaluate, valid_gallery_mask
from .hamming import (
    CountingSortBuckets,
    DistanceVector,
    batch_distances,
    counting_sort_rank,
    euclidean_distance,
    hamming_distance,
    select_within,
)
from .synth import SynthSpec, generate

__version__ = "0.1.0"

"""Gaussian fitting, CDF accuracy, and threshold optimization vs grid oracles."""

import numpy as np
import pytest
from mpmath import erf as mp_erf
from mpmath import mp, mpf, sqrt as mp_sqrt
from scipy import stats
from scipy.special import ndtr

from codecascade import (
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
    pack_codes,
)
from codecascade.calibration import _decode_within_group
from codecascade.codebook import CodeLengthSchedule, MultiLevelCodebook
from codecascade.synth import SynthSpec, generate

mp.dps = 30


def oracle_cdf(t, u, sigma):
    return (1 + mp_erf((mpf(t) - mpf(u)) / (mpf(sigma) * mp_sqrt(2)))) / 2


def oracle_f_beta(t, model, beta):
    """Grid-oracle score in 30-digit arithmetic, independent of the library."""
    r = oracle_cdf(t, model.u_r, model.sigma_r)
    d = r + mpf(model.class_ratio) * oracle_cdf(t, model.u_n, model.sigma_n)
    p = r / d if d > 0 else mpf(0)
    denom = mpf(beta) ** 2 * p + r
    if denom == 0:
        return mpf(0)
    return (mpf(beta) ** 2 + 1) * p * r / denom


def grid_argmax(model, beta, level_length):
    """Independent double-precision grid scan built on scipy's normal CDF.

    The optimizer's contract is a double-precision scan with ties broken to
    the smaller t; scipy.special.ndtr is a separately implemented CDF in the
    same precision class, so score plateaus saturate the way they do in the
    library instead of at mpmath's much later rounding point.
    """
    best_t, best = 0, -np.inf
    b2 = beta * beta
    for t in range(level_length + 1):
        r = float(ndtr((t - model.u_r) / model.sigma_r))
        n = float(ndtr((t - model.u_n) / model.sigma_n))
        d = r + model.class_ratio * n
        p = r / d if d > 0 else 0.0
        score = (b2 + 1) * p * r / (b2 * p + r) if (b2 * p + r) > 0 else 0.0
        if score > best:
            best_t, best = t, score
    return best_t


def _model(u_r, s_r, u_n, s_n, rho=1.0):
    return GaussianPairModel(u_r, s_r, u_n, s_n, n_r=100, n_n=100, class_ratio=rho)


def test_gaussian_cdf_basics():
    assert gaussian_cdf(10.0, 10.0, 2.0) == pytest.approx(0.5, abs=0)
    assert gaussian_cdf(12.0, 10.0, 2.0) == pytest.approx(0.8413447460685429, abs=1e-6)
    assert gaussian_cdf(-1e9, 10.0, 2.0) == 0.0
    assert gaussian_cdf(1e9, 10.0, 2.0) == 1.0
    with pytest.raises(ValueError):
        gaussian_cdf(1.0, 0.0, 0.0)


def test_gaussian_cdf_monotone_and_accurate():
    grid = np.linspace(-40.0, 80.0, 1000)
    previous = -1.0
    for t in grid:
        value = gaussian_cdf(float(t), 20.0, 3.0)
        assert 0.0 <= value <= 1.0
        assert value >= previous
        previous = value
        assert abs(value - float(oracle_cdf(float(t), 20, 3))) < 1e-10


def test_fit_gaussian_degenerate_floors():
    assert fit_gaussian([5, 5, 5, 5]) == (5.0, 0.5)


def test_fit_gaussian_two_point():
    assert fit_gaussian([0, 10]) == (5.0, 5.0)


def test_fit_gaussian_recovers_normal():
    draws = np.random.default_rng(42).normal(20.0, 3.0, size=100_000)
    u, sigma = fit_gaussian(draws)
    assert abs(u - 20.0) < 0.05
    assert abs(sigma - 3.0) < 0.05


def test_fit_gaussian_needs_two():
    with pytest.raises(ValueError):
        fit_gaussian([4.0])


def test_f_beta_perfect_separation():
    model = _model(10.0, 0.5, 1e9, 0.5)
    for beta in (0.5, 1.0, 2.0):
        assert f_beta_score(30.0, model, FBetaConfig(beta=beta)) == pytest.approx(1.0, abs=1e-12)


def test_f_beta_identical_distributions_plateau():
    model = _model(16.0, 2.0, 16.0, 2.0)
    cfg = FBetaConfig(beta=1.0)
    # precision is constant 1/2, recall grows, so the argmax is the far end
    assert optimize_threshold(model, cfg, 32) == 32


def test_f_beta_frozen_grid_oracle():
    # values frozen from a 30-digit grid scan over t in [0, 64] run pre-build
    model = _model(10.0, 2.0, 30.0, 3.0, rho=1.0)
    cfg = FBetaConfig(beta=1.0)
    assert optimize_threshold(model, cfg, 64) == 18
    assert f_beta_score(18, model, cfg) == pytest.approx(0.999968328758, abs=1e-9)
    assert grid_argmax(model, 1.0, 64) == 18
    for t in (0, 5, 18, 40, 64):
        assert f_beta_score(t, model, cfg) == pytest.approx(
            float(oracle_f_beta(t, model, 1.0)), abs=1e-12
        )


def test_f_beta_verbatim_mode_hand_value():
    model = _model(10.0, 2.0, 30.0, 3.0)
    cfg = FBetaConfig(beta=2.0, formula_mode="paper")
    cr = gaussian_cdf(15.0, 10.0, 2.0)
    cn = gaussian_cdf(15.0, 30.0, 3.0)
    expected = cr * 5.0 / (cn + cr + 4.0 * (1.0 - cn + cr))
    assert f_beta_score(15.0, model, cfg) == pytest.approx(expected, abs=1e-15)
    # the verbatim closed form stays below 1 even at perfect separation
    perfect = _model(10.0, 0.5, 1e9, 0.5)
    assert f_beta_score(30.0, perfect, cfg) == pytest.approx(5.0 / 9.0, abs=1e-9)


def test_optimize_warns_on_swapped_classes():
    swapped = _model(30.0, 3.0, 10.0, 2.0)
    with pytest.warns(UserWarning, match="swapped"):
        t = optimize_threshold(swapped, FBetaConfig(beta=1.0), 64)
    assert t == grid_argmax(swapped, 1.0, 64)


def test_optimize_matches_grid_oracle_ensemble():
    # peaks kept inside the overlap region so the score has real curvature
    rng = np.random.default_rng(7)
    cfg_grid = [(0.5, FBetaConfig(beta=0.5)), (2.0, FBetaConfig(beta=2.0))]
    for _ in range(50):
        length = int(rng.choice([32, 64, 128]))
        sigma_r = rng.uniform(1.0, 6.0)
        sigma_n = rng.uniform(1.0, 8.0)
        u_r = rng.uniform(1.0, length * 0.45)
        gap = rng.uniform(1.0, min(length * 0.9 - u_r, 6.0 * (sigma_r + sigma_n)))
        model = _model(u_r, sigma_r, u_r + gap, sigma_n, rho=float(rng.uniform(0.5, 8.0)))
        for beta, cfg in cfg_grid:
            assert optimize_threshold(model, cfg, length) == grid_argmax(model, beta, length)


def test_beta_monotone_thresholds():
    rng = np.random.default_rng(11)
    betas = [0.01, 0.1, 1.0, 2.0, 10.0]
    for _ in range(40):
        length = 64
        u_r = rng.uniform(2.0, 20.0)
        model = _model(u_r, rng.uniform(0.5, 4.0), rng.uniform(u_r + 4.0, 40.0),
                       rng.uniform(0.5, 5.0), rho=float(rng.uniform(0.5, 4.0)))
        ts = [optimize_threshold(model, FBetaConfig(beta=b), length) for b in betas]
        assert all(a <= b for a, b in zip(ts, ts[1:])), ts


def test_f_beta_agrees_with_empirical_counting():
    # 2000-pair near-normal samples; model score within 0.1 of direct counting
    rng = np.random.default_rng(5)
    length = 128
    rel = rng.binomial(length, 0.15, size=2000)
    non = rng.binomial(length, 0.5, size=2000)
    assert abs(stats.skew(rel)) < 0.5 and abs(stats.skew(non)) < 0.5
    model = fit_pair_model(PairDistanceSample(rel, non, length))
    cfg = FBetaConfig(beta=2.0)
    for t in range(length + 1):
        tp = int((rel <= t).sum())
        fp = int((non <= t).sum())
        fn = len(rel) - tp
        if tp == 0:
            empirical = 0.0
        else:
            p = tp / (tp + fp)
            r = tp / (tp + fn)
            empirical = 5.0 * p * r / (4.0 * p + r)
        assert abs(f_beta_score(t, model, cfg) - empirical) <= 0.1, t


def _tiny_codebook(bits_by_level, ids):
    schedule = CodeLengthSchedule(tuple(b.shape[1] for b in bits_by_level))
    levels = [pack_codes(b, b.shape[1]) for b in bits_by_level]
    ids = np.asarray(ids, dtype=np.uint32)
    cams = np.zeros(len(ids), dtype=np.uint16)
    return MultiLevelCodebook(schedule, levels, ids, cams)


def test_collect_pairs_two_same_id():
    bits = np.zeros((2, 32), dtype=np.uint8)
    cb = _tiny_codebook([bits], [4, 4])
    with pytest.raises(ValueError, match="non-relevant"):
        collect_pair_distances(cb, 1)


def test_collect_pairs_two_different_ids():
    bits = np.vstack([np.zeros((1, 32), np.uint8), np.ones((1, 32), np.uint8)])
    cb = _tiny_codebook([bits], [1, 2])
    with pytest.raises(ValueError, match="relevant"):
        collect_pair_distances(cb, 1)


def test_collect_pairs_values():
    bits = np.zeros((4, 32), dtype=np.uint8)
    bits[2:] = 1
    cb = _tiny_codebook([bits], [1, 1, 2, 2])
    sample = collect_pair_distances(cb, 1)
    assert sample.relevant.tolist() == [0, 0]
    assert sorted(sample.nonrelevant.tolist()) == [32, 32, 32, 32]
    assert sample.level_length == 32


def test_collect_pairs_sampling_is_deterministic_and_unique(rng):
    bits = rng.integers(0, 2, size=(60, 32), dtype=np.uint8)
    cb = _tiny_codebook([bits], np.arange(60) % 6)
    a = collect_pair_distances(cb, 1, max_pairs=50, rng_seed=9)
    b = collect_pair_distances(cb, 1, max_pairs=50, rng_seed=9)
    assert np.array_equal(a.relevant, b.relevant)
    assert np.array_equal(a.nonrelevant, b.nonrelevant)
    assert len(a.relevant) == 50 and len(a.nonrelevant) == 50


def test_pair_decode_matches_enumeration():
    for m in (2, 3, 5, 9):
        total = m * (m - 1) // 2
        expected = [(i, j) for i in range(m) for j in range(i + 1, m)]
        local = np.arange(total, dtype=np.int64)
        i, j = _decode_within_group(local, np.full(total, m, dtype=np.int64))
        assert list(zip(i.tolist(), j.tolist())) == expected


def test_collect_pairs_mean_matches_binomial_closed_form():
    spec = SynthSpec(
        n_ids=100, items_per_id=15, cams=2,
        schedule=CodeLengthSchedule((512,)), flip_prob_per_level=(0.1,), seed=3,
        queries_per_id=0,
    )
    gallery, _ = generate(spec)
    sample = collect_pair_distances(gallery, 1, max_pairs=10_000, rng_seed=1)
    q_rel = 2 * 0.1 * 0.9
    mean_rel, se_rel = 512 * q_rel, np.sqrt(512 * q_rel * (1 - q_rel) / len(sample.relevant))
    assert abs(sample.relevant.mean() - mean_rel) < 3 * se_rel
    mean_non, se_non = 256.0, np.sqrt(512 * 0.25 / len(sample.nonrelevant))
    assert abs(sample.nonrelevant.mean() - mean_non) < 3 * se_non


def test_calibrate_separable_two_level():
    spec = SynthSpec(
        n_ids=40, items_per_id=10, cams=2,
        schedule=CodeLengthSchedule((32, 128)), flip_prob_per_level=(0.05, 0.05),
        seed=8, queries_per_id=0,
    )
    gallery, _ = generate(spec)
    ts = calibrate(gallery, FBetaConfig(beta=2.0), rng_seed=4)
    assert len(ts.thresholds) == 1
    models = fit_pair_models(gallery, rng_seed=4)
    assert models[0].u_r < ts.thresholds[0] < models[0].u_n
    assert ts.thresholds[0] == grid_argmax(models[0], 2.0, 32)
    assert ts.beta == 2.0


def test_calibrate_beta_monotone_on_codebook():
    spec = SynthSpec(
        n_ids=30, items_per_id=8, cams=2,
        schedule=CodeLengthSchedule((32, 64, 128)),
        flip_prob_per_level=(0.12, 0.1, 0.08), seed=2, queries_per_id=0,
    )
    gallery, _ = generate(spec)
    low = calibrate(gallery, FBetaConfig(beta=0.01), rng_seed=6)
    high = calibrate(gallery, FBetaConfig(beta=10.0), rng_seed=6)
    assert all(a <= b for a, b in zip(low.thresholds, high.thresholds))


def test_calibrate_degenerate_identical_codes():
    # identical codes: both classes floor to N(0, 0.5); the score climbs with
    # recall and then plateaus exactly once the CDF saturates in double
    # precision, so ties-to-smaller picks the plateau start, not the far end
    bits32 = np.zeros((8, 32), dtype=np.uint8)
    bits64 = np.zeros((8, 64), dtype=np.uint8)
    cb = _tiny_codebook([bits32, bits64], [0, 0, 0, 0, 1, 1, 1, 1])
    ts = calibrate(cb, FBetaConfig(beta=2.0))
    models = fit_pair_models(cb)
    assert models[0].sigma_r == 0.5 and models[0].sigma_n == 0.5  # floors engaged
    t = ts.thresholds[0]
    assert t == grid_argmax(models[0], 2.0, 32)
    cfg = FBetaConfig(beta=2.0)
    assert f_beta_score(t, models[0], cfg) == f_beta_score(32, models[0], cfg)

import numpy as np
import pytest

from drivead.data.pipeline import LabelStats
from drivead.errors import DataError, NotPositiveDefiniteError
from drivead.model.config import EOS_ID, SOS_ID
from drivead.numeric import SeededRng
from drivead.scoring import (COMBINED, DetectionRow, GaussianErrorModel,
                             MODALITIES, REPORT_PERCENTILES, ScoredWindow,
                             detection_report, error_vectors, fit_error_model,
                             mahalanobis, rank_and_select, scaled_score,
                             sequence_nll)


def random_spd_model(rng, dim):
    a = rng.normal(size=(dim, dim))
    cov = a.T @ a + dim * np.eye(dim)
    mean = rng.normal(size=dim)
    # fabricate a model directly from known mean/cov via enough samples
    n = max(4 * dim, 200)
    samples = rng.normal(size=(n, dim)) @ np.linalg.cholesky(cov).T + mean
    return fit_error_model(samples, ridge=0.0)


def test_error_vectors_layout():
    rng = SeededRng(0)
    x = rng.normal(size=(3, 25, 6))
    recon = rng.normal(size=(3, 25, 6))
    out = error_vectors(x, recon)
    assert set(out) == set(MODALITIES)
    for c, name in enumerate(MODALITIES[:6]):
        assert out[name].shape == (3, 25)
        assert np.allclose(out[name], recon[:, :, c] - x[:, :, c])
        # combined is the channel-major concatenation
        assert np.allclose(out[COMBINED][:, 25 * c:25 * (c + 1)], out[name])
    assert out[COMBINED].shape == (3, 150)


def test_fit_degenerate_samples():
    v = np.array([1.0, -2.0, 3.0])
    model = fit_error_model(np.tile(v, (10, 1)), ridge=0.5)
    assert np.allclose(model.mean, v)
    assert np.allclose(model.factor.reconstruct(), 0.5 * np.eye(3))


def test_fit_requires_two_samples():
    with pytest.raises(DataError):
        fit_error_model(np.zeros((1, 4)))


def test_fit_recovers_known_gaussian():
    rng = SeededRng(1)
    mean = np.array([1.0, -2.0, 0.5, 3.0])
    a = rng.normal(size=(4, 4))
    cov = a @ a.T + np.eye(4)
    samples = rng.normal(size=(10000, 4)) @ np.linalg.cholesky(cov).T + mean
    model = fit_error_model(samples, ridge=0.0)
    assert np.abs(model.mean - mean).max() < 0.05
    assert np.abs(model.factor.reconstruct() - cov).max() < 0.1


def test_high_dim_fit_needs_ridge():
    # 300-dim with fewer samples than dimensions: sample covariance is
    # singular, so the fit only succeeds with a ridge
    rng = SeededRng(2)
    samples = rng.normal(size=(100, 300))
    with pytest.raises(NotPositiveDefiniteError):
        fit_error_model(samples, ridge=0.0)
    model = fit_error_model(samples)  # default ridge
    assert model.ridge > 0
    assert np.isfinite(model.mahalanobis(samples[0]))


def test_mahalanobis_identity_covariance_is_euclidean():
    samples = SeededRng(3).normal(size=(500, 2))
    model = GaussianErrorModel(modality="combined", dim=2,
                               mean=np.zeros(2),
                               factor=fit_error_model(samples).factor,
                               ridge=0.0)
    # force exact identity covariance
    from drivead.numeric import cholesky
    model.factor = cholesky(np.eye(2))
    assert abs(model.mahalanobis(np.array([3.0, 4.0])) - 5.0) < 1e-12


def test_mahalanobis_at_mean_is_zero():
    rng = SeededRng(4)
    model = random_spd_model(rng, 6)
    assert model.mahalanobis(model.mean) < 1e-9


def test_mahalanobis_matches_explicit_inverse():
    rng = SeededRng(5)
    for trial in range(100):
        dim = int(rng.integers(2, 51))
        model = random_spd_model(rng, dim)
        e = rng.normal(size=dim) * 3
        cov = model.factor.reconstruct()
        diff = e - model.mean
        expect = np.sqrt(diff @ np.linalg.inv(cov) @ diff)
        got = mahalanobis(model, e)
        assert abs(got - expect) / expect < 1e-6, (trial, dim)


def test_mahalanobis_batch_matches_single():
    rng = SeededRng(6)
    model = random_spd_model(rng, 5)
    batch = rng.normal(size=(7, 5))
    out = model.mahalanobis(batch)
    assert out.shape == (7,)
    for i in range(7):
        assert abs(out[i] - model.mahalanobis(batch[i])) < 1e-9


def test_mahalanobis_dimension_mismatch():
    model = random_spd_model(SeededRng(7), 4)
    with pytest.raises(ValueError):
        model.mahalanobis(np.zeros(5))


def test_sequence_nll_background_example():
    freqs = np.full(11, (1 - 0.8715) / 10)
    freqs[0] = 0.8715
    stats = LabelStats.from_frequencies(freqs)
    nll = sequence_nll(np.zeros(15, dtype=int), stats)
    assert abs(nll - 15 * -np.log(0.8715)) < 1e-9
    assert abs(nll - 2.0633) < 1e-3


def test_sequence_nll_excludes_eos_and_rejects_sos():
    stats = LabelStats.from_frequencies(np.full(11, 1 / 11))
    with_eos = sequence_nll(np.array([0, 1, EOS_ID]), stats)
    without = sequence_nll(np.array([0, 1]), stats)
    assert with_eos == without
    with pytest.raises(DataError):
        sequence_nll(np.array([SOS_ID]), stats)
    with pytest.raises(DataError):
        sequence_nll(np.array([99]), stats)


def test_rare_symbols_raise_nll():
    freqs = np.full(11, 0.0023)
    freqs[0] = 0.8715
    stats = LabelStats.from_frequencies(freqs / freqs.sum())
    common = sequence_nll(np.zeros(15, dtype=int), stats)
    rare = sequence_nll(np.full(15, 7), stats)
    assert rare > common


def test_scaled_score_examples():
    assert abs(scaled_score(10.0, 1.3863) - 7.2133) < 1e-3
    # floor keeps near-zero NLL from exploding the score
    assert scaled_score(10.0, 0.0) == 10.0 / 1e-3
    with pytest.raises(ValueError):
        scaled_score(-1.0, 1.0)


def test_rank_and_select_size_and_ties():
    scores = [(i, 1.0) for i in range(10)]  # all tied
    top = rank_and_select(scores, 25.0)
    assert [wid for wid, _ in top] == [0, 1, 2]  # ceil(10*0.25)=3, id ascending
    top1 = rank_and_select(scores, 0.001)
    assert len(top1) == 1


def test_rank_and_select_matches_full_sort():
    rng = SeededRng(8)
    scores = [(i, float(s)) for i, s in enumerate(rng.normal(size=200))]
    for p in (0.5, 1.0, 10.0, 100.0):
        got = rank_and_select(scores, p)
        expect = sorted(scores, key=lambda t: (-t[1], t[0]))
        keep = int(np.ceil(200 * p / 100))
        assert got == expect[:keep]


def test_rank_and_select_accepts_scored_windows():
    sw = [ScoredWindow(window_id=i, raw_score=float(i),
                       predicted_symbols=np.zeros(16, int), nll=1.0,
                       scaled=float(i)) for i in range(4)]
    top = rank_and_select(sw, 50.0)
    assert [wid for wid, _ in top] == [3, 2]


def test_rank_and_select_validation():
    with pytest.raises(DataError):
        rank_and_select([], 1.0)
    with pytest.raises(ValueError):
        rank_and_select([(0, 1.0)], 0.0)


def test_detection_report_captures_planted_targets():
    rng = SeededRng(9)
    n = 10000
    scores = [(i, float(s)) for i, s in enumerate(rng.normal(size=n))]
    # plant 10 targets with huge scores
    targets = list(range(n, n + 10))
    scores += [(i, 100.0) for i in targets]
    rows = detection_report(scores, targets)
    assert [r.percentile for r in rows] == list(REPORT_PERCENTILES)
    assert rows[-1].captured == 10  # top 1% easily covers all planted
    assert rows[0].total == 10
    assert rows[0].fraction <= rows[-1].fraction  # monotone in percentile


def test_detection_row_formatting():
    row = DetectionRow(percentile=0.1, captured=3, total=4)
    assert row.formatted() == "75.00% (3/4)"
    assert DetectionRow(0.1, 0, 0).fraction == 0.0

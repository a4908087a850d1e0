import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsa_forge.metrics import (
    ScoredSample,
    UndefinedMetricError,
    au_pro,
    auroc,
    bce_loss,
    image_auroc,
    image_score,
    integrate_limited,
    mse_loss,
    pixel_auroc,
    pro_curve,
    roc_curve,
    score_report,
)
from oracles import bce_sum, dense_au_pro, flood_components, mse_sum, pairwise_auroc


def random_instance(rng, n_samples=2, size=12, levels=None):
    samples = []
    for _ in range(n_samples):
        mask = np.zeros((size, size), bool)
        for _ in range(int(rng.integers(1, 4))):
            y, x = rng.integers(0, size - 3, 2)
            h, w = rng.integers(1, 4, 2)
            mask[y:y + h, x:x + w] = True
        pred = rng.random((size, size)) + 0.5 * mask
        if levels:
            pred = np.round(pred * levels) / levels
        samples.append(ScoredSample(pred, mask))
    return samples


def test_image_score_examples():
    assert image_score(np.zeros((3, 3))) == 0
    assert image_score(np.full((4, 4), 0.3)) == pytest.approx(0.3)
    assert image_score(np.array([[0, 0.2], [0.4, 1.0]])) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        image_score(np.zeros((0, 3)))


def test_auroc_separated_and_tied():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auroc_single_class():
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [1, 1])


def test_auroc_matches_pairwise_with_ties():
    rng = np.random.default_rng(0)
    scores = np.round(rng.random(200), 1)
    labels = rng.random(200) < 0.4
    assert abs(auroc(scores, labels) - pairwise_auroc(scores, labels)) <= 1e-12


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_auroc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=50)
    labels = np.arange(50) % 3 == 0
    base = auroc(scores, labels)
    assert auroc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
    assert auroc(3 * scores - 7, labels) == pytest.approx(base, abs=1e-12)
    assert auroc(scores, ~labels) == pytest.approx(1 - base, abs=1e-12)


def test_roc_curve_is_monotone():
    rng = np.random.default_rng(1)
    fpr, tpr, thr = roc_curve(rng.random(100), rng.random(100) < 0.3)
    assert fpr[0] == tpr[0] == 0 and fpr[-1] == tpr[-1] == 1
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    assert np.all(np.diff(thr) < 0)


def test_pixel_auroc_examples():
    rng = np.random.default_rng(2)
    masks = [rng.random((4, 4)) < 0.3 for _ in range(3)]
    masks[0][0, 0] = True
    masks[1][0, 0] = False
    assert pixel_auroc([ScoredSample(m.astype(float), m) for m in masks]) == 1.0
    assert pixel_auroc([ScoredSample(np.full((4, 4), 0.2), m) for m in masks]) == 0.5
    samples = [ScoredSample(np.round(rng.random((4, 4)), 1), m) for m in masks]
    pooled_p = np.concatenate([s.prediction.ravel() for s in samples])
    pooled_y = np.concatenate([s.truth_mask.ravel() for s in samples])
    assert abs(pixel_auroc(samples) - pairwise_auroc(pooled_p, pooled_y)) <= 1e-12


def test_image_auroc_uses_mean_score():
    normal = ScoredSample(np.full((3, 3), 0.1), np.zeros((3, 3), bool))
    hit = np.zeros((3, 3), bool)
    hit[1, 1] = True
    anomalous = ScoredSample(np.full((3, 3), 0.2), hit)
    assert image_auroc([normal, anomalous]) == 1.0


def test_scored_sample_shape_check():
    with pytest.raises(ValueError):
        ScoredSample(np.zeros((3, 3)), np.zeros((3, 4), bool))


def test_au_pro_perfect_prediction():
    mask = np.zeros((10, 10), bool)
    mask[2:4, 2:4] = True
    mask[6:9, 5:9] = True
    assert au_pro([ScoredSample(mask.astype(float), mask)]) == pytest.approx(1.0)


def test_au_pro_constant_prediction_matches_oracle():
    rng = np.random.default_rng(3)
    mask = rng.random((16, 16)) < 0.1
    pred = np.full((16, 16), 0.7)
    value = au_pro([ScoredSample(pred, mask)])
    # a single threshold joins (0, 0) to (1, 1); the area up to 0.3 is 0.045, normalized 0.15
    assert value == pytest.approx(0.15, abs=1e-12)
    assert abs(value - dense_au_pro([pred], [mask])) <= 1e-9


def test_pro_plateau_with_one_component_covered():
    mask = np.zeros((12, 12), bool)
    mask[1:3, 1:3] = True  # small component
    mask[6:11, 5:11] = True  # large component
    pred = np.zeros((12, 12))
    pred[6:11, 5:11] = 1.0
    fpr, pro, _ = pro_curve([ScoredSample(pred, mask)])
    assert pro[1] == pytest.approx(0.5) and fpr[1] == 0
    value = au_pro([ScoredSample(pred, mask)])
    assert abs(value - dense_au_pro([pred], [mask])) <= 1e-9


@pytest.mark.parametrize("connectivity", [4, 8])
def test_component_count_matches_flood_fill(connectivity):
    from scipy import ndimage

    rng = np.random.default_rng(4)
    mask = rng.random((15, 15)) < 0.3
    structure = np.ones((3, 3)) if connectivity == 8 else ndimage.generate_binary_structure(2, 1)
    assert ndimage.label(mask, structure=structure)[1] == len(flood_components(mask, connectivity))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([None, 4, 10]), st.sampled_from([4, 8]))
def test_au_pro_matches_dense_oracle(seed, levels, connectivity):
    rng = np.random.default_rng(seed)
    samples = random_instance(rng, n_samples=2, size=int(rng.integers(6, 13)), levels=levels)
    value = au_pro(samples, 0.3, connectivity)
    expected = dense_au_pro([s.prediction for s in samples], [s.truth_mask for s in samples], 0.3, connectivity)
    assert abs(value - expected) <= 1e-9
    assert 0 <= value <= 1


def test_au_pro_needs_components():
    with pytest.raises(UndefinedMetricError):
        au_pro([ScoredSample(np.zeros((4, 4)), np.zeros((4, 4), bool))])
    with pytest.raises(ValueError):
        au_pro([ScoredSample(np.zeros((4, 4)), np.ones((4, 4), bool))], fpr_limit=0)


def test_integrate_limited_interpolates():
    x = np.array([0.0, 0.2, 0.6])
    y = np.array([0.0, 1.0, 1.0])
    # area to 0.3 = 0.1 (triangle) + 0.1 (rectangle)
    assert integrate_limited(x, y, 0.3) == pytest.approx(0.2)


def test_bce_examples():
    half = np.full((4, 4), 0.5)
    assert bce_loss(half, half) == pytest.approx(np.log(2), abs=1e-12)
    assert bce_loss(np.zeros((2, 2)), np.zeros((2, 2))) == pytest.approx(1e-7, rel=1e-6)
    rng = np.random.default_rng(5)
    p, y = rng.random((4, 4)), rng.random((4, 4))
    assert abs(bce_loss(p, y) - bce_sum(p, y)) <= 1e-12


def test_mse_examples():
    rng = np.random.default_rng(6)
    a, b = rng.random((4, 4)), rng.random((4, 4)) * 40
    assert mse_loss(a, a) == 0
    assert mse_loss(a, a + 0.25) == pytest.approx(0.0625, abs=1e-15)
    assert abs(mse_loss(a, b) - mse_sum(a, b)) <= 1e-12
    with pytest.raises(ValueError):
        mse_loss(a, np.zeros((3, 3)))


def test_score_report_fields():
    rng = np.random.default_rng(7)
    samples = random_instance(rng, n_samples=3) + [ScoredSample(rng.random((12, 12)) * 0.5, np.zeros((12, 12), bool))]
    report = score_report(samples)
    d = report.to_dict()
    assert set(d) == {"image_auroc", "pixel_auroc", "au_pro", "fpr_limit", "roc_points", "pro_points"}
    assert d["au_pro"] == pytest.approx(au_pro(samples))
    for key in ("image_auroc", "pixel_auroc", "au_pro"):
        assert 0 <= d[key] <= 1
    xs = [pt[0] for pt in d["pro_points"]]
    assert xs == sorted(xs)

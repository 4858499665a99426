import numpy as np
import pytest

from alseg.distance import (
    NoContourError,
    UncertaintyScore,
    edt_brute,
    edt_exact,
    score_sample,
    weighted_score,
)


def random_mask(rng, h, w):
    m = (rng.random((h, w)) < rng.uniform(0.01, 0.6)).astype(np.uint8)
    if not m.any():
        m[rng.integers(h), rng.integers(w)] = 1
    return m


def test_single_contour_pixel_345_triangle():
    m = np.zeros((6, 6), dtype=np.uint8)
    m[0, 0] = 1
    assert edt_exact(m)[4, 3] == 5.0


def test_all_contour_pixels_give_zero():
    assert edt_exact(np.ones((5, 7), dtype=np.uint8)).sum() == 0.0


def test_1x5_two_ends():
    m = np.zeros((1, 5), dtype=np.uint8)
    m[0, 0] = m[0, 4] = 1
    assert edt_exact(m)[0].tolist() == [0.0, 1.0, 2.0, 1.0, 0.0]


def test_1x1_single_pixel():
    assert edt_brute(np.ones((1, 1), dtype=np.uint8)).tolist() == [[0.0]]


def test_exact_matches_brute_on_random_masks():
    rng = np.random.default_rng(2)
    for _ in range(60):
        h, w = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        m = random_mask(rng, h, w)
        assert np.array_equal(
            edt_exact(m, squared=True), edt_brute(m, squared=True)
        )


def test_empty_contour_raises():
    with pytest.raises(NoContourError):
        edt_exact(np.zeros((3, 3), dtype=np.uint8))
    with pytest.raises(NoContourError):
        edt_brute(np.zeros((3, 3), dtype=np.uint8))


def test_no_overestimation_with_witness():
    rng = np.random.default_rng(3)
    m = random_mask(rng, 17, 23)
    d = edt_exact(m)
    coords = np.argwhere(m)
    for _ in range(40):
        y, x = int(rng.integers(17)), int(rng.integers(23))
        dists = np.hypot(coords[:, 0] - y, coords[:, 1] - x)
        assert d[y, x] <= dists.min() + 1e-12
        assert abs(d[y, x] - dists.min()) < 1e-9


def test_weighted_score_fixture():
    score = weighted_score(np.ones((2, 2)), np.full((2, 2), 2.0))
    assert score.raw == 8.0
    assert score.normalized == 2.0


def test_weighted_score_zero_uncertainty():
    assert weighted_score(np.zeros((3, 3)), np.ones((3, 3))).raw == 0.0


def test_weighted_score_linear_in_distance():
    rng = np.random.default_rng(4)
    u = rng.random((5, 5))
    d = rng.random((5, 5)) * 3
    assert weighted_score(u, 2 * d).raw == pytest.approx(
        2 * weighted_score(u, d).raw, abs=0.0
    )


def test_weighted_score_shape_mismatch():
    with pytest.raises(ValueError):
        weighted_score(np.zeros((2, 2)), np.zeros((2, 3)))


def test_weighted_score_joint_permutation_invariant():
    rng = np.random.default_rng(5)
    u = rng.random(12)
    d = rng.random(12)
    perm = rng.permutation(12)
    a = weighted_score(u.reshape(3, 4), d.reshape(3, 4))
    b = weighted_score(u[perm].reshape(3, 4), d[perm].reshape(3, 4))
    assert a.raw == pytest.approx(b.raw, rel=1e-12)


def test_score_sample_empty_prediction_falls_back_to_sum():
    u = np.full((4, 4), 0.1)
    score, degenerate = score_sample(u, np.zeros((4, 4), dtype=np.uint8))
    assert degenerate
    assert score.raw == pytest.approx(1.6)
    assert score.normalized == pytest.approx(0.1)


def test_score_sample_full_prediction_is_degenerate():
    u = np.full((3, 3), 0.2)
    score, degenerate = score_sample(u, np.ones((3, 3), dtype=np.uint8))
    assert degenerate
    assert score.raw == pytest.approx(1.8)


def test_score_sample_composition_for_regular_prediction():
    from alseg.imaging import extract_contour

    rng = np.random.default_rng(6)
    u = rng.random((10, 10)) * 0.25
    predicted = np.zeros((10, 10), dtype=np.uint8)
    predicted[3:7, 2:8] = 1
    score, degenerate = score_sample(u, predicted)
    assert not degenerate
    expected = weighted_score(u, edt_exact(extract_contour(predicted)))
    assert score == expected


def test_far_uncertainty_band_outscores_near_band():
    # same uncertainty mass, different distance from the predicted contour
    predicted = np.zeros((16, 16), dtype=np.uint8)
    predicted[6:10, 6:10] = 1
    near = np.zeros((16, 16))
    near[5, 5:11] = 0.2  # hugging the contour
    far = np.zeros((16, 16))
    far[0, 5:11] = 0.2  # same mass, far away
    s_near, _ = score_sample(near, predicted)
    s_far, _ = score_sample(far, predicted)
    assert s_far.raw > s_near.raw


def test_score_sample_monotone_in_uncertainty():
    rng = np.random.default_rng(7)
    predicted = np.zeros((8, 8), dtype=np.uint8)
    predicted[2:5, 3:6] = 1
    u = rng.random((8, 8)) * 0.1
    bump = np.zeros((8, 8))
    bump[rng.integers(8), rng.integers(8)] = 0.05
    base, _ = score_sample(u, predicted)
    more, _ = score_sample(u + bump, predicted)
    assert more.raw >= base.raw


def test_score_zero_iff_no_weighted_mass():
    predicted = np.zeros((6, 6), dtype=np.uint8)
    predicted[2:4, 2:4] = 1
    u = np.zeros((6, 6))
    score, _ = score_sample(u, predicted)
    assert score.raw == 0.0 and score.normalized == 0.0
    assert UncertaintyScore(0.0, 0.0) == score

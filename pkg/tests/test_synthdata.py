import numpy as np
import pytest

from alseg.imaging import binarize
from alseg.metrics import dice
from alseg.synthdata import (
    SynthParams,
    generate_dataset,
    generate_sample,
    generate_samples,
    load_dataset,
    sample_rng,
)

CLEAN = SynthParams(noise_sigma=0.0, distractor_count=0, empty_fraction=0.0)


def test_clean_sample_has_exact_levels():
    img, mask = generate_sample(CLEAN, sample_rng(1, 0))
    assert mask.any()
    assert np.all(img[mask == 1] == CLEAN.fg_level)
    assert np.all(img[mask == 0] == CLEAN.bg_level)


def test_empty_fraction_one_always_empty():
    params = SynthParams(empty_fraction=1.0, noise_sigma=0.0)
    for i in range(20):
        _, mask = generate_sample(params, sample_rng(2, i))
        assert not mask.any()


def test_same_seed_same_sample_bytes():
    a_img, a_mask = generate_sample(SynthParams(), sample_rng(5, 3))
    b_img, b_mask = generate_sample(SynthParams(), sample_rng(5, 3))
    assert np.array_equal(a_img, b_img)
    assert np.array_equal(a_mask, b_mask)


def test_midpoint_threshold_recovers_mask_for_any_noise_free_params():
    # distractor bumps stay below the fg/bg midpoint by construction
    params = SynthParams(noise_sigma=0.0, distractor_count=5, empty_fraction=0.2)
    mid = (params.fg_level + params.bg_level) / 2
    for i in range(30):
        img, mask = generate_sample(params, sample_rng(9, i))
        assert dice(binarize(img, mid), mask) == 1.0


def test_empty_mask_frequency_within_3_sigma():
    params = SynthParams(empty_fraction=0.3)
    n = 400
    empties = sum(
        not generate_sample(params, sample_rng(21, i))[1].any() for i in range(n)
    )
    sigma = np.sqrt(n * 0.3 * 0.7)
    assert abs(empties - n * 0.3) <= 3 * sigma


def test_generate_dataset_layout_and_determinism(tmp_path):
    params = SynthParams()
    m1 = generate_dataset(5, params, 7, tmp_path / "a")
    m2 = generate_dataset(5, params, 7, tmp_path / "b")
    assert m1.read_text() == "0\n1\n2\n3\n4\n"
    for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_dataset_n_zero(tmp_path):
    manifest = generate_dataset(0, SynthParams(), 1, tmp_path)
    assert manifest.read_text() == ""
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.txt"]


def test_load_dataset_round_trip(tmp_path):
    params = SynthParams()
    generate_dataset(4, params, 11, tmp_path)
    data = load_dataset(tmp_path)
    assert sorted(data) == [0, 1, 2, 3]
    raw = generate_samples(4, params, 11)
    for i in range(4):
        img, mask = data[i]
        assert np.array_equal(mask, raw[i][1])
        # images survive 8-bit quantization
        assert np.abs(img - raw[i][0]).max() <= 1 / 510 + 1e-15


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(min_axis=0.0),
        dict(min_axis=5.0, max_axis=4.0),
        dict(max_axis=16.0),
        dict(fg_level=0.5, bg_level=0.5),
        dict(noise_sigma=-0.1),
        dict(empty_fraction=1.5),
        dict(distractor_count=-1),
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        SynthParams(**kwargs)

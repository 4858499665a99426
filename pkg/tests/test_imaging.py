import numpy as np
import pytest

from alseg.imaging import (
    PgmFormatError,
    binarize,
    extract_contour,
    read_mask_pgm,
    read_pgm,
    write_mask_pgm,
    write_pgm,
)


def test_read_pgm_endpoint_mapping():
    img = read_pgm(b"P5\n2 1\n255\n" + bytes([0, 255]))
    assert img.shape == (1, 2)
    assert img.tolist() == [[0.0, 1.0]]


def test_read_pgm_linear_scaling():
    img = read_pgm(b"P5\n1 1\n255\n" + bytes([128]))
    assert img[0, 0] == 128 / 255


def test_read_pgm_truncated_payload():
    data = b"P5\n4 4\n255\n" + bytes(15)
    with pytest.raises(PgmFormatError, match="truncated"):
        read_pgm(data)


def test_read_pgm_trailing_bytes_rejected():
    data = b"P5\n2 1\n255\n" + bytes(3)
    with pytest.raises(PgmFormatError, match="trailing"):
        read_pgm(data)


def test_read_pgm_bad_magic():
    with pytest.raises(PgmFormatError, match="magic"):
        read_pgm(b"P2\n1 1\n255\n" + bytes(1))


def test_read_pgm_bad_maxval():
    with pytest.raises(PgmFormatError, match="maxval"):
        read_pgm(b"P5\n1 1\n128\n" + bytes(1))


def test_read_pgm_non_integer_width():
    with pytest.raises(PgmFormatError, match="width"):
        read_pgm(b"P5\nxx 1\n255\n" + bytes(1))


def test_read_pgm_missing_header_field():
    with pytest.raises(PgmFormatError):
        read_pgm(b"P5\n2")


def test_write_pgm_payload_bytes():
    data = write_pgm(np.array([[0.0], [1.0]]))
    assert data == b"P5\n1 2\n255\n" + bytes([0, 255])


def test_write_pgm_rejects_out_of_range():
    with pytest.raises(ValueError):
        write_pgm(np.array([[1.5]]))


def test_round_trip_error_bound():
    rng = np.random.default_rng(11)
    for _ in range(20):
        h, w = rng.integers(1, 40, size=2)
        img = rng.random((h, w))
        back = read_pgm(write_pgm(img))
        assert np.abs(back - img).max() <= 1 / 510 + 1e-15


def test_mask_pgm_uses_0_and_255_and_round_trips():
    rng = np.random.default_rng(12)
    mask = (rng.random((9, 7)) < 0.4).astype(np.uint8)
    data = write_mask_pgm(mask)
    payload = data.split(b"\n", 3)[3]
    assert set(payload) <= {0, 255}
    assert np.array_equal(read_mask_pgm(data), mask)


def test_binarize_threshold_inclusive():
    p = np.array([[0.2, 0.5, 0.9]])
    assert binarize(p, 0.5).tolist() == [[0, 1, 1]]


def test_binarize_extremes():
    p = np.array([[0.0, 0.3, 0.99]])
    assert binarize(p, 0.0).tolist() == [[1, 1, 1]]
    assert binarize(p, 1.0).tolist() == [[0, 0, 0]]


def test_binarize_monotone_in_threshold():
    rng = np.random.default_rng(13)
    p = rng.random((16, 16))
    t1, t2 = sorted(rng.random(2))
    hi = binarize(p, t2)
    lo = binarize(p, t1)
    assert np.all(hi <= lo)


def test_binarize_threshold_out_of_range():
    with pytest.raises(ValueError):
        binarize(np.zeros((2, 2)), 1.5)


def test_contour_of_solid_block_is_border_ring():
    contour = extract_contour(np.ones((3, 3), dtype=np.uint8))
    expected = np.ones((3, 3), dtype=np.uint8)
    expected[1, 1] = 0
    assert np.array_equal(contour, expected)


def test_contour_single_pixel_and_empty():
    m = np.zeros((4, 4), dtype=np.uint8)
    m[2, 1] = 1
    assert np.array_equal(extract_contour(m), m)
    z = np.zeros((4, 4), dtype=np.uint8)
    assert np.array_equal(extract_contour(z), z)


def test_contour_is_subset_of_foreground():
    rng = np.random.default_rng(14)
    for _ in range(25):
        m = (rng.random((12, 15)) < 0.5).astype(np.uint8)
        c = extract_contour(m)
        assert np.all(c <= m)


def test_contour_interior_pixel_excluded_only_with_four_fg_neighbors():
    m = np.zeros((5, 5), dtype=np.uint8)
    m[1:4, 1:4] = 1
    c = extract_contour(m)
    assert c[2, 2] == 0
    assert c[1:4, 1:4].sum() == 8

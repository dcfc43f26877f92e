import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patchrank.errors import BackgroundUnavailable, InputError, StructuralError
from patchrank.features import (
    FEATURE_DIM, BoundingBox, FrameFeatures, background_problem, extract_feature, fuse_weights,
    gradients, grayscale, iou, partition, patch_edges, foreground_queries, ring_width,
    weighted_descriptor,
)


def _noise_frame(rng, h=96, w=128):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


# -- partition ----------------------------------------------------------------

def test_partition_even_box(rng):
    grid = partition(_noise_frame(rng), BoundingBox(10, 5, 64, 64))
    assert grid.features.shape == (FEATURE_DIM, 64)
    assert np.all(np.diff(grid.x_edges) == 8) and np.all(np.diff(grid.y_edges) == 8)


def test_partition_remainder_goes_last(rng):
    grid = partition(_noise_frame(rng), BoundingBox(0, 0, 67, 64))
    widths = np.diff(grid.x_edges)
    assert list(widths) == [8] * 7 + [11]


def test_partition_uniform_frame():
    frame = np.zeros((80, 80, 3), dtype=np.uint8)
    frame[:] = (12, 200, 99)
    X = partition(frame, BoundingBox(3, 7, 64, 64)).features
    assert np.all(X == X[:, :1])
    # uneven patches hold different pixel counts; normalisation then differs by rounding only
    X = partition(frame, BoundingBox(3, 7, 64, 70)).features
    np.testing.assert_allclose(X, np.repeat(X[:, :1], 64, axis=1), rtol=0, atol=1e-15)


def test_partition_matches_direct_extraction(rng):
    frame = _noise_frame(rng)
    box = BoundingBox(13, 9, 61, 43)
    grid = partition(frame, box)
    mag, ang = gradients(grayscale(frame))
    xe, ye = grid.x_edges, grid.y_edges
    for r in range(8):
        for c in range(8):
            sl = (slice(ye[r], ye[r + 1]), slice(xe[c], xe[c + 1]))
            ref = extract_feature(frame[sl], grad=(mag[sl], ang[sl]))
            np.testing.assert_allclose(grid.features[:, r * 8 + c], ref, atol=1e-12)


def test_partition_errors(rng):
    frame = _noise_frame(rng)
    with pytest.raises(InputError):
        partition(frame, BoundingBox(0, 0, 7, 20))
    with pytest.raises(InputError):
        partition(frame, BoundingBox(100, 0, 64, 64))


@settings(max_examples=60, deadline=None)
@given(x=st.integers(0, 50), y=st.integers(0, 50), w=st.integers(8, 70), h=st.integers(8, 70))
def test_partition_tiles_exactly(x, y, w, h):
    xe, ye = patch_edges(BoundingBox(x, y, w, h))
    cover = np.zeros((y + h + 1, x + w + 1), dtype=int)
    for r in range(8):
        for c in range(8):
            cover[ye[r]:ye[r + 1], xe[c]:xe[c + 1]] += 1
    assert np.all(cover[y:y + h, x:x + w] == 1)
    assert cover.sum() == w * h


# -- extract_feature -----------------------------------------------------------

def test_pure_red_patch():
    patch = np.zeros((5, 6, 3), dtype=np.uint8)
    patch[..., 0] = 255
    f = extract_feature(patch)
    color = f[:24]
    assert set(np.flatnonzero(color)) == {7, 8, 16}
    assert np.all(f[24:] == 0)


def test_constant_patch_has_no_gradient():
    patch = np.full((6, 6, 3), 77, dtype=np.uint8)
    f = extract_feature(patch)
    assert np.all(f[24:] == 0)
    assert np.count_nonzero(f[:24]) == 3
    assert np.isclose(np.linalg.norm(f), 1.0)


def test_vertical_step_edge():
    # columns 0,1 black, 2,3 white: central differences give 127.5 in columns 1 and 2,
    # zero at the one-sided borders, all along the x axis (orientation 0)
    patch = np.zeros((4, 4, 3), dtype=np.uint8)
    patch[:, 2:] = 255
    f = extract_feature(patch)
    # raw histogram: six colour bins with 8 pixels each, orientation bin 0 with 8 * 127.5 / 255 = 4
    raw = np.zeros(32)
    raw[[0, 7, 8, 15, 16, 23]] = 8
    raw[24] = 4
    np.testing.assert_allclose(f, raw / 20.0, atol=1e-6)


def test_extract_feature_rejects_empty():
    with pytest.raises(InputError):
        extract_feature(np.zeros((0, 3, 3)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_color_part_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    patch = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    perm = rng.permutation(35)
    shuffled = patch.reshape(35, 3)[perm].reshape(5, 7, 3)
    zero = (np.zeros((5, 7)), np.zeros((5, 7)))
    np.testing.assert_allclose(extract_feature(shuffled, zero)[:24], extract_feature(patch, zero)[:24])


# -- queries --------------------------------------------------------------------

def test_foreground_queries_geometry(rng):
    box = BoundingBox(0, 0, 64, 64)
    grid = partition(_noise_frame(rng), box)
    y = foreground_queries(grid, 0.6)
    # enumerate patch centres directly
    expect = np.zeros(64)
    for r in range(8):
        for c in range(8):
            cx, cy = 8 * c + 4, 8 * r + 4
            if abs(cx - 32) <= 0.3 * 64 and abs(cy - 32) <= 0.3 * 64:
                expect[r * 8 + c] = 1
    np.testing.assert_array_equal(y, expect)
    assert y.sum() == 16


def test_foreground_queries_tiny_shrink(rng):
    grid = partition(_noise_frame(rng), BoundingBox(0, 0, 64, 64))
    y = foreground_queries(grid, 1e-6)
    assert 1 <= y.sum() <= 4
    cx, cy = grid.centers()
    assert np.all(np.abs(cx[y == 1] - 32) <= 4) and np.all(np.abs(cy[y == 1] - 32) <= 4)
    with pytest.raises(InputError):
        foreground_queries(grid, 1.0)


def test_background_problem_shapes(rng):
    ff = FrameFeatures(_noise_frame(rng, 160, 160))
    assert ring_width(1.4) == 2
    bg = background_problem(ff, BoundingBox(48, 48, 64, 64))
    assert (bg.rows, bg.cols) == (12, 12)
    assert bg.valid.all()
    assert bg.queries.sum() == 144 - 64
    assert np.all(bg.queries[bg.inner] == 0)
    inner_ref = partition(ff.frame, BoundingBox(48, 48, 64, 64), frame_features=ff).features
    np.testing.assert_allclose(bg.features[:, bg.inner], inner_ref, atol=1e-12)


def test_background_problem_clipped_and_unavailable(rng):
    ff = FrameFeatures(_noise_frame(rng, 64, 96))
    bg = background_problem(ff, BoundingBox(0, 0, 64, 64))
    # only the two ring columns to the right survive
    assert bg.queries.sum() == 16
    ff = FrameFeatures(_noise_frame(rng, 64, 64))
    with pytest.raises(BackgroundUnavailable):
        background_problem(ff, BoundingBox(0, 0, 64, 64))


# -- fusion and descriptor ---------------------------------------------------------

def test_fuse_weights_values():
    assert np.all(fuse_weights(np.array([0.3, -2.0]), np.array([0.3, -2.0])) == 0.5)
    assert np.isclose(fuse_weights(np.array([0.1]), np.array([0.0]))[0], 1 / (1 + np.exp(-4.3)), rtol=1e-15)
    v = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(fuse_weights(v, np.zeros(9)), 1 / (1 + np.exp(-43 * v)), rtol=1e-14)
    with pytest.raises(StructuralError):
        fuse_weights(np.zeros(3), np.zeros(4))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=20))
def test_fuse_weights_monotone(xs):
    d = np.sort(np.array(xs))
    w = fuse_weights(d, np.zeros_like(d))
    assert np.all(np.diff(w) >= 0)
    assert np.all((w >= 0) & (w <= 1))


def test_weighted_descriptor(rng):
    X = rng.normal(size=(32, 64))
    assert np.array_equal(weighted_descriptor(X, np.ones(64)), X)
    assert np.all(weighted_descriptor(X, np.zeros(64)) == 0)
    w = rng.normal(size=64)
    np.testing.assert_allclose(np.linalg.norm(weighted_descriptor(X, w), axis=0),
                               np.abs(w) * np.linalg.norm(X, axis=0))
    with pytest.raises(StructuralError):
        weighted_descriptor(X, np.ones(63))


def test_box_helpers():
    b = BoundingBox.parse("3, 4,10,20")
    assert b.as_tuple() == (3, 4, 10, 20) and b.center == (8.0, 14.0)
    assert iou(b, b) == 1.0
    assert iou(b, b.shifted(100, 0)) == 0.0
    assert np.isclose(iou(b, b.shifted(5, 0)), 100 / 300)
    with pytest.raises(InputError):
        BoundingBox.parse("1,2,3")

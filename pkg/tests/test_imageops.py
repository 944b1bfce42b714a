import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradmix.imageops import (
    as_pixel_set,
    centroid,
    centroid_offset,
    dilate,
    mean_color,
    min_distance_field,
    round_half_away,
    shift_color,
    translate_footprint,
)

from .conftest import PLUS, square
from .oracles import brute_distance_field, chebyshev_ball, naive_mean

FRAME = (12, 12)

pixel_sets = st.lists(
    st.tuples(st.integers(0, FRAME[0] - 1), st.integers(0, FRAME[1] - 1)), min_size=0, max_size=20
).map(as_pixel_set)


def as_set(pixels):
    return {tuple(map(int, p)) for p in pixels}


class TestDilate:
    def test_single_pixel(self):
        out = dilate(as_pixel_set([(4, 4)]), 1, (9, 9))
        assert as_set(out) == {(r, c) for r in range(3, 6) for c in range(3, 6)}

    def test_empty(self):
        assert len(dilate(as_pixel_set([]), 3, (9, 9))) == 0

    def test_corner_clipped(self):
        out = dilate(as_pixel_set([(0, 0)]), 1, (9, 9))
        assert as_set(out) == chebyshev_ball([(0, 0)], 1, (9, 9)) == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_zero_iterations_identity(self):
        assert as_set(dilate(PLUS, 0, (9, 9))) == as_set(PLUS)

    @given(pixel_sets, st.integers(0, 4))
    def test_matches_chebyshev_enumeration(self, pixels, k):
        assert as_set(dilate(pixels, k, FRAME)) == chebyshev_ball(as_set(pixels), k, FRAME)

    @given(pixel_sets, pixel_sets, st.integers(0, 3))
    def test_monotone(self, a, b, k):
        union = as_pixel_set(np.vstack([a, b]))
        assert as_set(dilate(a, k, FRAME)) <= as_set(dilate(union, k, FRAME))

    @given(pixel_sets, st.integers(0, 3), st.integers(0, 3))
    def test_composition(self, a, j, k):
        assert as_set(dilate(dilate(a, j, FRAME), k, FRAME)) == as_set(dilate(a, j + k, FRAME))


class TestDistanceField:
    def test_three_four_five(self):
        field = min_distance_field((9, 9), as_pixel_set([(4, 4)]))
        assert field[1, 0] == 5.0

    def test_zero_on_source(self):
        field = min_distance_field((9, 9), PLUS)
        for r, c in PLUS:
            assert field[r, c] == 0.0

    def test_empty_source(self):
        with pytest.raises(ValueError, match="distance to empty set"):
            min_distance_field((9, 9), as_pixel_set([]))

    def test_origin_offset(self):
        field = min_distance_field((5, 5), as_pixel_set([(12, 12)]), origin=(10, 10))
        assert field[0, 0] == pytest.approx(math.sqrt(8))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=12))
    def test_matches_brute_force(self, pts):
        source = as_pixel_set(pts)
        np.testing.assert_allclose(
            min_distance_field((16, 16), source), brute_distance_field((16, 16), source), rtol=0, atol=1e-9
        )


class TestCentroid:
    def test_square(self):
        assert centroid(square(2, 2, 5)) == (4.0, 4.0)

    def test_two_points(self):
        assert centroid(as_pixel_set([(0, 0), (0, 3)])) == (0.0, 1.5)

    def test_plus(self):
        assert centroid(PLUS) == (4.0, 4.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            centroid(as_pixel_set([]))

    def test_offset_rounds_half_away_from_zero(self):
        assert centroid_offset((0.0, 0.0), (2.5, -2.5)) == (3, -3)
        assert centroid_offset((1.0, 1.0), (1.4, 0.6)) == (0, 0)


class TestTranslate:
    def test_shift(self):
        out = translate_footprint(as_pixel_set([(4, 4)]), 2, -1, (9, 9))
        assert as_set(out) == {(6, 3)}

    def test_out_of_frame(self):
        assert translate_footprint(as_pixel_set([(0, 0)]), -1, 0, (9, 9)) is None

    def test_identity(self):
        assert as_set(translate_footprint(PLUS, 0, 0, (9, 9))) == as_set(PLUS)

    @given(pixel_sets, st.integers(-5, 5), st.integers(-5, 5))
    def test_centroid_moves_by_offset(self, pixels, dr, dc):
        if len(pixels) == 0:
            return
        moved = translate_footprint(pixels, dr, dc, FRAME)
        if moved is None:
            return
        r0, c0 = centroid(pixels)
        r1, c1 = centroid(moved)
        assert r1 == pytest.approx(r0 + dr) and c1 == pytest.approx(c0 + dc)


class TestColor:
    def test_two_pixel_mean(self):
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        image[0, 0] = (10, 20, 30)
        image[1, 1] = (30, 40, 50)
        assert mean_color(image, as_pixel_set([(0, 0), (1, 1)])) == (20.0, 30.0, 40.0)

    def test_uniform(self):
        image = np.full((4, 4, 3), 128, dtype=np.uint8)
        assert mean_color(image, square(0, 0, 4)) == (128.0, 128.0, 128.0)

    def test_random_against_naive_sum(self):
        rng = np.random.default_rng(3)
        image = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        region = as_pixel_set(rng.integers(0, 20, size=(60, 2)))
        np.testing.assert_allclose(mean_color(image, region), naive_mean(image, region), rtol=0, atol=1e-9)

    def test_empty_region(self):
        with pytest.raises(ValueError):
            mean_color(np.zeros((2, 2, 3), dtype=np.uint8), as_pixel_set([]))

    def test_shift(self):
        image = np.full((3, 3, 3), 100, dtype=np.uint8)
        out = shift_color(image, as_pixel_set([(1, 1)]), (-20, 10, 0))
        assert tuple(out[1, 1]) == (80, 110, 100)
        assert (out[0, 0] == 100).all()

    def test_shift_clamps_both_rails(self):
        image = np.zeros((1, 1, 3), dtype=np.uint8)
        image[0, 0] = (250, 5, 128)
        out = shift_color(image, as_pixel_set([(0, 0)]), (20, -20, 0))
        assert tuple(out[0, 0]) == (255, 0, 128)

    def test_shift_rounds_half_away(self):
        image = np.full((1, 1, 3), 10, dtype=np.uint8)
        out = shift_color(image, as_pixel_set([(0, 0)]), (0.5, -0.5, 0.49))
        assert tuple(out[0, 0]) == (11, 10, 10)

    @given(st.integers(0, 2**32 - 1), st.tuples(*[st.floats(-60, 60)] * 3))
    def test_zero_then_inverse(self, seed, delta):
        rng = np.random.default_rng(seed)
        image = rng.integers(0, 256, size=(6, 6, 3), dtype=np.uint8)
        region = square(1, 1, 4)
        assert np.array_equal(shift_color(image, region, (0, 0, 0)), image)
        delta = tuple(float(d) for d in round_half_away(delta))
        there = shift_color(image, region, delta)
        back = shift_color(there, region, tuple(-d for d in delta))
        raw = image.astype(float) + np.array(delta)
        unclamped = ((raw >= 0) & (raw <= 255)).all(axis=2)
        assert np.array_equal(back[unclamped], image[unclamped])

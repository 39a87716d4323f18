"""Raster primitives: grayscale conversion, quad rasterization, validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphforge import (LOGIT_EPS, QuadBox, RasterError, clamp_logits,
                        rasterize_quad, to_grayscale, validate_image,
                        validate_mask)


def rect(x0, y0, x1, y1):
    return QuadBox(lt=(x0, y0), lb=(x0, y1), rt=(x1, y0), rb=(x1, y1))


class TestValidateImage:
    def test_accepts_gray_and_rgb(self):
        validate_image(np.zeros((4, 5), dtype=np.uint8))
        validate_image(np.zeros((4, 5, 3), dtype=np.uint8))

    def test_rejects_wrong_dtype(self):
        with pytest.raises(RasterError):
            validate_image(np.zeros((4, 5), dtype=np.float32))

    def test_rejects_wrong_channels(self):
        with pytest.raises(RasterError):
            validate_image(np.zeros((4, 5, 4), dtype=np.uint8))

    def test_rejects_empty(self):
        with pytest.raises(RasterError):
            validate_image(np.zeros((0, 5), dtype=np.uint8))


class TestValidateMask:
    def test_shape_check(self):
        m = np.zeros((3, 4), dtype=np.uint8)
        assert validate_mask(m, (3, 4)) is not None
        with pytest.raises(RasterError):
            validate_mask(m, (4, 3))

    def test_rejects_3d(self):
        with pytest.raises(RasterError):
            validate_mask(np.zeros((3, 4, 1), dtype=np.uint8))


class TestToGrayscale:
    def test_gray_passthrough(self):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        assert to_grayscale(img) is img

    def test_hand_computed_luma(self):
        # 0.299*100 + 0.587*50 + 0.114*200 = 82.05 -> 82
        img = np.array([[[100, 50, 200]]], dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 82

    def test_half_up_rounding(self):
        # 0.299*1 + 0.587*2 + 0.114*25 = 4.323 -> 4
        img = np.array([[[1, 2, 25]]], dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 4
        # pure value 255 everywhere stays 255 (weights sum to 1)
        img = np.full((2, 2, 3), 255, dtype=np.uint8)
        assert np.all(to_grayscale(img) == 255)

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    def test_matches_direct_formula(self, r, g, b):
        img = np.array([[[r, g, b]]], dtype=np.uint8)
        expected = int(np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5))
        assert to_grayscale(img)[0, 0] == expected


class TestClampLogits:
    def test_interior_unchanged(self):
        v = np.array([0.25, 0.5, 0.75])
        assert np.allclose(clamp_logits(v), v)

    def test_bounds(self):
        out = clamp_logits(np.array([0.0, 1.0, -5.0, 5.0]))
        assert out.min() == LOGIT_EPS
        assert out.max() == 1.0 - LOGIT_EPS


class TestQuadBox:
    def test_area_unit_square(self):
        assert rect(0, 0, 1, 1).area() == 1.0

    def test_area_is_shoelace(self):
        box = QuadBox(lt=(0, 0), rt=(4, 1), rb=(5, 3), lb=(1, 2))
        pts = [box.lt, box.rt, box.rb, box.lb]
        s = 0.0
        for i in range(4):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % 4]
            s += x1 * y2 - x2 * y1
        assert box.area() == pytest.approx(abs(s) / 2)

    def test_simple_detection(self):
        assert rect(0, 0, 2, 2).is_simple()
        # swap rt/rb to force a bowtie
        bowtie = QuadBox(lt=(0, 0), rt=(2, 2), rb=(2, 0), lb=(0, 2))
        assert not bowtie.is_simple()

    def test_from_list_roundtrip(self):
        box = rect(1, 2, 3, 4)
        assert QuadBox.from_list(box.as_list()) == box

    def test_from_list_rejects_bad_shape(self):
        with pytest.raises(RasterError):
            QuadBox.from_list([[0, 0], [1, 1], [2, 2]])


class TestRasterizeQuad:
    def test_unit_square_boundary_inclusive(self):
        # corners on integer pixel centers: all four pixels covered
        mask = rasterize_quad(rect(0, 0, 1, 1), 4, 4)
        assert mask[:2, :2].sum() == 4
        assert mask.sum() == 4

    def test_interior_rectangle(self):
        mask = rasterize_quad(rect(1.5, 0.5, 3.5, 2.5), 6, 5)
        expected = np.zeros((5, 6), dtype=np.uint8)
        expected[1:3, 2:4] = 1
        assert np.array_equal(mask, expected)

    def test_zero_area_empty(self):
        assert rasterize_quad(rect(2, 2, 2, 2), 5, 5).sum() == 0

    def test_clipped_to_bounds(self):
        mask = rasterize_quad(rect(-10, -10, 10, 10), 4, 3)
        assert mask.sum() == 12

    def test_rejects_bad_target(self):
        with pytest.raises(RasterError):
            rasterize_quad(rect(0, 0, 1, 1), 0, 5)

    def test_diamond_even_odd(self):
        # diamond centered at (2, 2) touching (2,0),(4,2),(2,4),(0,2)
        box = QuadBox(lt=(2, 0), rt=(4, 2), rb=(2, 4), lb=(0, 2))
        mask = rasterize_quad(box, 5, 5)
        dist = np.add.outer(np.abs(np.arange(5) - 2), np.abs(np.arange(5) - 2))
        assert np.array_equal(mask, (dist.T <= 2).astype(np.uint8))

    @given(st.floats(0, 8), st.floats(0, 8), st.floats(0.5, 6), st.floats(0.5, 6))
    @settings(max_examples=60, deadline=None)
    def test_axis_rect_matches_count_oracle(self, x0, y0, w, h):
        x1, y1 = x0 + w, y0 + h
        mask = rasterize_quad(rect(x0, y0, x1, y1), 16, 16)
        gx, gy = np.meshgrid(np.arange(16), np.arange(16))
        inside = (gx >= x0) & (gx <= x1) & (gy >= y0) & (gy <= y1)
        assert np.array_equal(mask.astype(bool), inside)

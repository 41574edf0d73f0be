import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activepoly import ridge
from activepoly.errors import GeometryError, ValidationError
from activepoly.imaging import Frame, Landmarks
from activepoly.polyfit import Polynomial

LM = Landmarks(start=(20, 90), end=(80, 90), apex_seed=(50, 10))


def vertical_pair(xl=30.0, xr=70.0, y_range=(10, 90)):
    return ridge.RidgePolynomialPair(Polynomial([xl, 0, 0, 0, 0]), Polynomial([xr, 0, 0, 0, 0]),
                                     y_range)


def test_guide_lines_join_apex_to_base_points():
    left, right = ridge.fit_guide_lines(LM)
    assert left.p0 == (50, 10) and left.p1 == (20, 90)
    assert right.p1 == (80, 90)
    assert left.contains((35, 50)) and not left.contains((36, 50))
    assert left.slope == pytest.approx(80 / -30)
    assert left.x_at(50) == pytest.approx(35)
    assert ridge.GuideLine((5, 0), (5, 9)).slope == np.inf
    with pytest.raises(GeometryError):
        ridge.GuideLine((1, 1), (1, 1))


def test_anchor_rows_are_equally_spaced():
    anchors = ridge.place_anchor_points(ridge.fit_guide_lines(LM))
    k = np.arange(1, 15)
    np.testing.assert_allclose(anchors.left[:, 1], 10 + k * 80 / 15)
    np.testing.assert_allclose(anchors.right[:, 1], 10 + k * 80 / 15)
    lines = ridge.fit_guide_lines(LM)
    assert all(lines[0].contains(p) for p in anchors.left)
    assert anchors.apex == (50.0, 10.0)


def test_anchor_set_validation():
    good = np.column_stack([np.full(14, 5.0), np.arange(14.0)])
    with pytest.raises(ValidationError):
        ridge.AnchorSet(good[:13], good, (0, 0))
    uneven = good.copy()
    uneven[5, 1] += 0.9
    with pytest.raises(ValidationError):
        ridge.AnchorSet(uneven, good, (0, 0))


def test_stretch_point_example():
    inner, outer = ridge.stretch_point((40, 50), midline_x=60, half_width=20, delta_frac=0.25)
    assert inner == pytest.approx((45, 50))
    assert outer == pytest.approx((35, 50))
    # mirrored for a right-wall anchor
    inner, outer = ridge.stretch_point((80, 50), 60, 20, 0.25)
    assert inner == pytest.approx((75, 50)) and outer == pytest.approx((85, 50))


def test_stretch_point_clamps_and_validates():
    _, outer = ridge.stretch_point((3, 5), 40, 37, 0.5, width=100)
    assert outer[0] == 0
    with pytest.raises(ValidationError):
        ridge.stretch_point((3, 5), 40, 37, 1.5)


def test_band_width_matches_stretch():
    lines = ridge.fit_guide_lines(LM)
    anchors = ridge.place_anchor_points(lines)
    st_ = ridge.stretch_anchors(anchors, 0.25, lines=lines)
    inner, outer = st_["left"]
    half = 0.5 * (lines[1].x_at(anchors.left[:, 1]) - anchors.left[:, 0])
    np.testing.assert_allclose(inner[:, 0] - outer[:, 0], 2 * 0.25 * half)
    roi = ridge.build_roi(inner, outer, 0.1, "left")
    lo, hi = roi.bounds(anchors.left[:, 1])
    np.testing.assert_allclose(hi - lo, 2 * 0.25 * half, atol=0.1)


def test_roi_rejects_empty_band():
    with pytest.raises(GeometryError):
        ridge.RoI(Polynomial([10.0]), Polynomial([20.0]), "left", (0, 10))
    with pytest.raises(ValidationError):
        ridge.RoI(Polynomial([20.0]), Polynomial([10.0]), "middle", (0, 10))


def _band(c0, c1, side="left"):
    inner, outer = (Polynomial([c1]), Polynomial([c0])) if side == "left" else \
        (Polynomial([c0]), Polynomial([c1]))
    return ridge.RoI(inner, outer, side, (0, 99))


def test_ridge_detection_picks_brightest_column():
    pix = np.zeros((100, 100), dtype=np.uint8)
    pix[:, 27] = 180
    pts = ridge.detect_ridge_points(Frame(pix), _band(20, 40), [(30, 10), (30, 50)])
    np.testing.assert_array_equal(pts, [[27, 10], [27, 50]])


def test_ridge_detection_tie_break_nearest_anchor():
    pix = np.zeros((50, 60), dtype=np.uint8)
    pix[20, 22] = pix[20, 35] = 200
    pts = ridge.detect_ridge_points(Frame(pix), _band(20, 40), [(33, 20)])
    np.testing.assert_array_equal(pts, [[35, 20]])
    pts = ridge.detect_ridge_points(Frame(pix), _band(20, 40), [(24, 20)])
    np.testing.assert_array_equal(pts, [[22, 20]])


def test_uniform_frame_returns_anchors():
    lines = ridge.fit_guide_lines(LM)
    anchors = ridge.place_anchor_points(lines)
    inner, outer = ridge.stretch_anchors(anchors, 0.6, lines=lines)["left"]
    roi = ridge.build_roi(inner, outer, 0.1, "left")
    pts = ridge.detect_ridge_points(Frame(np.full((100, 100), 60, np.uint8)), roi, anchors.left)
    np.testing.assert_allclose(pts, np.rint(anchors.left))
    # below the contrast floor nothing is reported
    pts = ridge.detect_ridge_points(Frame(np.full((100, 100), 60, np.uint8)), roi, anchors.left,
                                    min_contrast=10)
    assert pts.shape == (0, 2)


@settings(max_examples=20)
@given(dx=st.integers(-15, 15), dy=st.integers(-15, 15), seed=st.integers(0, 999))
def test_ridge_detection_translation_equivariant(dx, dy, seed):
    r = np.random.default_rng(seed)
    pix = r.integers(0, 256, (60, 60), dtype=np.uint8)
    big = np.zeros((100, 100), dtype=np.uint8)
    big[20:80, 20:80] = pix
    moved = np.zeros_like(big)
    moved[20 + dy:80 + dy, 20 + dx:80 + dx] = pix
    anchors = np.array([[40.0, 30.0], [42.0, 45.0], [44.0, 60.0]])
    roi = ridge.RoI(Polynomial([50.0]), Polynomial([30.0]), "left", (0, 99))
    roi_m = ridge.RoI(Polynomial([50.0 + dx]), Polynomial([30.0 + dx]), "left", (0, 99))
    a = ridge.detect_ridge_points(Frame(big), roi, anchors)
    b = ridge.detect_ridge_points(Frame(moved), roi_m, anchors + [dx, dy])
    np.testing.assert_array_equal(b, a + [dx, dy])


def test_refine_apex_finds_arch_top():
    pix = np.zeros((60, 60), dtype=np.uint8)
    yy, xx = np.mgrid[0:60, 0:60]
    pix[(np.abs(np.hypot(xx - 30, yy - 30) - 15) < 1.5) & (yy <= 30)] = 200
    assert ridge.refine_apex(Frame(pix), (30, 18), radius=8) == (30, 14)
    # the flat top row breaks ties toward the seed column
    assert ridge.refine_apex(Frame(pix), (32, 18), radius=8) == (32, 14)
    assert ridge.refine_apex(Frame(np.zeros((20, 20), np.uint8)), (5, 5)) == (5, 5)


def test_fit_ridge_polynomials_and_crossing():
    ys = np.linspace(20, 90, 14)
    left = np.column_stack([30 - 0.1 * (ys - 20), ys])
    right = np.column_stack([70 + 0.1 * (ys - 20), ys])
    pair = ridge.fit_ridge_polynomials(left, right, 0.1, y_range=(20, 90))
    assert pair.left(50) == pytest.approx(27, abs=0.1)
    with pytest.raises(GeometryError):
        ridge.fit_ridge_polynomials(right, left, 0.1)
    with pytest.raises(ValidationError):
        ridge.fit_ridge_polynomials(left[:5], right, 0.1)


def test_wall_ramp_monotone():
    ramp = ridge.wall_ramp(6)
    assert ramp[0] == 200 and ramp[-1] == 255
    assert np.all(np.diff(ramp.astype(int)) > 0)
    assert ridge.wall_ramp(1).tolist() == [255]
    with pytest.raises(ValidationError):
        ridge.wall_ramp(3, (250, 100))


def test_paint_wall_on_zero_frame():
    pair = vertical_pair()
    out = ridge.paint_wall(Frame(np.zeros((100, 100), np.uint8)), pair, 6)
    row = out.pixels[50].astype(int)
    np.testing.assert_array_equal(row[25:31], ridge.wall_ramp(6)[::-1])
    np.testing.assert_array_equal(row[70:76], ridge.wall_ramp(6))
    assert row[31:70].max() == 0
    painted = np.flatnonzero(row[:50])
    assert abs(len(painted) - 6) <= 1
    # outward intensity never decreases
    assert np.all(np.diff(row[25:31][::-1]) >= 0)
    # rows outside the RP range are untouched
    assert out.pixels[5].max() == 0 and out.pixels[95].max() == 0


def test_paint_wall_idempotent():
    pair = vertical_pair()
    f = Frame(np.random.default_rng(0).integers(0, 256, (100, 100), dtype=np.uint8))
    once = ridge.paint_wall(f, pair)
    assert ridge.paint_wall(once, pair) == once

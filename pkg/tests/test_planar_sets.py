import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncritical.errors import EmptyRegionError, GeometryError
from noncritical.planar_sets import (
    Disc,
    Point,
    Polygon,
    Polyline,
    Rect,
    Region,
    dilate,
    distance,
    rasterize,
    region_distance,
    shape_from_json,
    sup_norm_diff,
)
from noncritical.fixtures import circle_polyline
from oracles import cell_mask_oracle, distance_oracle, naive_sup

WIN = (-2.0, -2.0, 2.0, 2.0)


def random_polygon(rng, center=0j, r=1.0, n=7):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.4 * r, r, n)
    return Polygon(tuple(center + rad * np.exp(1j * ang)))


# rasterize ------------------------------------------------------------------

def test_unit_disc_raster_area():
    g = rasterize(Region((Disc(0, 1.0),), WIN, 0.1))
    cells = int(g.mask.sum())
    band = 2 * math.pi * 1.0 / 0.1 * (2 * 0.1 * math.sqrt(0.5) / 0.1)
    assert abs(cells - math.pi / 0.01) <= band


def test_empty_region_raster_is_false():
    assert not rasterize(Region((), WIN, 0.1)).mask.any()


def test_point_marks_its_cell_only():
    g = rasterize(Region((Point(0.33 + 0.47j),), WIN, 0.1))
    assert g.mask.sum() == 1
    j, i = np.argwhere(g.mask)[0]
    c = g.origin + ((i + 0.5) + 1j * (j + 0.5)) * g.spacing
    assert abs(c.real - 0.33) <= 0.05 and abs(c.imag - 0.47) <= 0.05


def test_raster_matches_cell_oracle(rng):
    for _ in range(5):
        R = Region((random_polygon(rng), Polyline((-1.5 - 1j, 1.2 + 1.6j))), WIN, 0.05)
        want, slack = cell_mask_oracle(R)
        diff = R.raster().mask != want
        # disagreements only where the center sits on the threshold (discs are 1024-gons in the oracle)
        assert np.all(slack[diff] < 1e-3)


# distance -------------------------------------------------------------------

def test_distance_center_to_circle():
    R = Region((circle_polyline(0, 1.0),), WIN, 0.05)
    assert distance(0j, R) == pytest.approx(1.0, abs=1e-4)


def test_distance_to_disc():
    assert distance(2 + 0j, Region((Disc(0, 1.0),), WIN, 0.05)) == 1.0


def test_distance_matches_shapely(rng):
    for _ in range(10):
        R = Region((random_polygon(rng),), WIN, 0.05)
        z = rng.uniform(-2, 2, 50) + 1j * rng.uniform(-2, 2, 50)
        np.testing.assert_allclose(R.distance(z), distance_oracle(z, R), atol=1e-12)


def test_distance_to_empty_region_is_undefined():
    with pytest.raises(EmptyRegionError):
        distance(0j, Region((), WIN, 0.1))


def test_region_distance_exact():
    a = Region((Disc(0, 0.5),), WIN, 0.05)
    b = Region((Rect(1 - 0.5j, 1.5 + 0.5j), Polyline((-1 + 1.5j, 1 + 1.5j))), WIN, 0.05)
    assert region_distance(a, b) == pytest.approx(0.5)


# dilate ---------------------------------------------------------------------

def test_dilate_point_is_open_disc():
    D = dilate(Region((Point(0j),), WIN, 0.05), 1.0)
    assert D.distance([0.5 + 0j])[0] == 0 and D.distance([1.5 + 0j])[0] == pytest.approx(0.5)


def test_dilate_disc_closed_form():
    D = dilate(Region((Disc(0, 1.0),), WIN, 0.05), 0.5)
    want = rasterize(Region((Disc(0, 1.5),), WIN, 0.05)).mask
    assert (D.raster().mask == want).all()


def test_dilate_polygon_cellwise(rng):
    P = Region((random_polygon(rng),), WIN, 0.05)
    D = dilate(P, 0.3)
    c = D.raster().centers().ravel()
    d = distance_oracle(c, P)
    inside = d - 0.3 <= 0.05 * math.sqrt(0.5)
    diff = D.raster().mask.ravel() != inside
    assert np.all(np.abs(d[diff] - 0.3 - 0.05 * math.sqrt(0.5)) < 1e-6)


def test_dilate_rejects_nonpositive_radius():
    with pytest.raises(GeometryError):
        dilate(Region((Disc(0, 1),), WIN, 0.1), 0.0)


# sup norm -------------------------------------------------------------------

def test_sup_norm_diff_cases(rng):
    z = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    assert sup_norm_diff(z, z) == 0
    assert sup_norm_diff(z, z + 0.1) == pytest.approx(0.1)
    p = np.polynomial.Polynomial(rng.normal(size=4))
    q = np.polynomial.Polynomial(rng.normal(size=4))
    assert sup_norm_diff(p(z), q(z)) == naive_sup(p(z), q(z))


# shapes ---------------------------------------------------------------------

def test_self_intersecting_polyline_rejected():
    with pytest.raises(GeometryError):
        Polyline((0j, 1 + 1j, 1 + 0j, 0 + 1j))


def test_nan_points_rejected():
    with pytest.raises(GeometryError):
        Disc(complex(float("nan"), 0), 1.0)


def test_shape_json_round_trip(rng):
    shapes = [Disc(0.1 + 0.2j, 0.3), Rect(-1 - 1j, 0.5j), random_polygon(rng), Polyline((0j, 1 + 1j)),
              Point(0.25 - 0.5j)]
    for s in shapes:
        t = shape_from_json(s.to_json())
        z = rng.uniform(-2, 2, 20) + 1j * rng.uniform(-2, 2, 20)
        np.testing.assert_array_equal(s.distance(z), t.distance(z))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.05, 1.0), st.floats(0.01, 0.5))
def test_dilation_distance_identity(x, y, r, s):
    """dist(z, A(s)) = max(dist(z, A) - s, 0) for discs, and dilation is monotone."""
    A = Region((Disc(complex(x, y), r),), WIN, 0.05)
    z = np.array([0j, 1.9 + 1.9j, -1.9 + 0.3j])
    np.testing.assert_allclose(dilate(A, s).distance(z), np.maximum(A.distance(z) - s, 0), atol=1e-12)
    assert (A.raster().mask <= dilate(A, s).raster().mask).all()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1.9, 1.9), st.floats(-1.9, 1.9)), min_size=3, max_size=3))
def test_distance_triangle_inequality(pts):
    a, b, c = (complex(x, y) for x, y in pts)
    R = Region((Polyline((-1 - 1j, 1 + 0.5j, 1.5 - 1j)),), WIN, 0.05)
    da, db = R.distance([a])[0], R.distance([b])[0]
    assert da <= db + abs(a - b) + 1e-12

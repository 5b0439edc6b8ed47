import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clampedplate import geometry as G

UNIT_DISK = G.Disk(1.0)
UNIT_SQUARE = G.Rectangle(1.0, 1.0)
TRIANGLE = G.Polygon(((0.0, 0.0), (1.0, 0.0), (0.3, 0.8)))
PENTAGON = G.Polygon(((0, 0), (1, 0), (1.3, 0.7), (0.5, 1.2), (-0.2, 0.6)))

coords = st.floats(-10, 10)


def test_volumes():
    assert G.volume(UNIT_SQUARE) == 1.0
    assert G.volume(UNIT_DISK) == pytest.approx(math.pi, rel=1e-15)
    assert G.volume(G.Rectangle(2.0, 3.0)) == 6.0
    assert G.volume(TRIANGLE) == pytest.approx(0.4, rel=1e-14)


def test_inertia_closed_forms():
    # 2 pi int_0^1 r^3 dr and int (x^2 + y^2) over [-1/2, 1/2]^2
    assert G.moment_of_inertia(UNIT_DISK) == pytest.approx(math.pi / 2, rel=1e-14)
    assert G.moment_of_inertia(UNIT_SQUARE) == pytest.approx(1 / 6, rel=1e-14)
    assert G.moment_of_inertia(G.Rectangle(1.0, 1.0, (5.0, 7.0))) == pytest.approx(1 / 6, rel=1e-12)


def test_polygon_square_matches_rectangle():
    sq = UNIT_SQUARE.as_polygon()
    assert G.moment_of_inertia(sq) == pytest.approx(1 / 6, rel=1e-14)
    assert sq.centroid() == pytest.approx([0.5, 0.5])


def test_triangle_inertia_against_midpoint_quadrature():
    h = 1 / 1000
    xs = np.arange(h / 2, 1.0, h)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    P = np.stack([X, Y], axis=-1)
    inside = TRIANGLE.signed_distance(P) > 0
    c = TRIANGLE.centroid()
    quad = np.sum(((X - c[0]) ** 2 + (Y - c[1]) ** 2)[inside]) * h * h
    assert G.moment_of_inertia(TRIANGLE) == pytest.approx(quad, rel=5e-3)
    assert c == pytest.approx([1.3 / 3, 0.8 / 3], rel=1e-13)


@pytest.mark.parametrize("dom", [UNIT_DISK, UNIT_SQUARE, TRIANGLE, PENTAGON])
def test_centroid_minimises_second_moment(dom):
    rng = np.random.default_rng(1)
    inertia = G.moment_of_inertia(dom)
    c = np.array(dom.centroid())
    for a in rng.normal(size=(100, 2)):
        val = G.second_moment(dom, a)
        # parallel axis: J(a) = I + vol |a - c|^2
        assert val == pytest.approx(inertia + dom.area() * np.sum((a - c) ** 2), rel=1e-12)
        assert val > inertia


@given(st.floats(0.1, 10.0), coords, coords)
def test_disk_scaling_and_translation(t, ox, oy):
    d = G.Disk(t, (ox, oy))
    assert G.volume(d) == pytest.approx(t**2 * math.pi, rel=1e-12)
    assert G.moment_of_inertia(d) == pytest.approx(t**4 * math.pi / 2, rel=1e-12)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.1, 4.0))
def test_rectangle_scaling(w, h, t):
    r = G.Rectangle(w, h)
    s = G.Rectangle(t * w, t * h)
    assert G.volume(s) == pytest.approx(t**2 * G.volume(r), rel=1e-12)
    assert G.moment_of_inertia(s) == pytest.approx(t**4 * G.moment_of_inertia(r), rel=1e-12)


def test_polygon_scaling():
    s = PENTAGON.scaled(2.5)
    assert G.moment_of_inertia(s) == pytest.approx(2.5**4 * G.moment_of_inertia(PENTAGON), rel=1e-12)


def test_summaries():
    s = G.geom_summary(UNIT_DISK)
    assert (s.vol, s.inertia, s.kappa, s.ball_vol) == pytest.approx((math.pi, math.pi / 2, 1.0, math.pi))
    assert s.n == 2
    q = G.geom_summary(UNIT_SQUARE)
    assert q.kappa is None
    assert (q.vol, q.inertia, q.ball_vol) == pytest.approx((1.0, 1 / 6, math.pi))
    big = G.geom_summary(G.Disk(2.0))
    assert big.vol == pytest.approx(4 * math.pi)
    assert big.inertia == pytest.approx(8 * math.pi)
    assert big.kappa == 0.5


def test_invalid_domains():
    with pytest.raises(G.GeometryError):
        G.Disk(0.0)
    with pytest.raises(G.GeometryError):
        G.Rectangle(1.0, -1.0)
    with pytest.raises(G.GeometryError):
        G.Polygon(((0, 0), (1, 1), (1, 0), (0, 1)))  # bow tie
    with pytest.raises(G.GeometryError):
        G.Polygon(((0, 0), (0, 1), (1, 0)))  # clockwise
    with pytest.raises(G.GeometryError):
        G.Polygon(((0, 0), (1, 0), (2, 0)))


# ---------------------------------------------------------------- layers


def test_layer_closed_forms():
    assert G.boundary_layer_volume(UNIT_SQUARE, 4.0) == pytest.approx(0.75)
    assert G.boundary_layer_volume(UNIT_DISK, 3.0) == pytest.approx(5 * math.pi / 9)
    assert G.boundary_layer_volume(UNIT_DISK, 0.5) == pytest.approx(math.pi)


@pytest.mark.parametrize("dom", [UNIT_DISK, UNIT_SQUARE, TRIANGLE])
def test_layer_monotone_and_vanishing(dom):
    vals = [G.boundary_layer_volume(dom, r) for r in (1.0, 3.0, 10.0, 100.0, 1000.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[0] <= dom.area()
    assert vals[-1] < 0.01 * dom.area()


@pytest.mark.parametrize("dom", [UNIT_DISK, UNIT_SQUARE, G.Rectangle(2.0, 0.7, (1.0, -3.0))])
@pytest.mark.parametrize("r", [2.5, 3.0, 4.0, 10.0])
def test_layer_grid_matches_closed_form(dom, r):
    x0, x1, y0, y1 = dom.bbox()
    h = math.hypot(x1 - x0, y1 - y0) / G.LAYER_GRID_DIVISIONS
    grid = G.boundary_layer_volume(dom, r, method="grid")
    exact = G.boundary_layer_volume(dom, r, method="exact")
    assert abs(grid - exact) <= 2 * h * dom.perimeter()


def test_layer_polygon_square_against_rectangle():
    grid = G.boundary_layer_volume(UNIT_SQUARE.as_polygon(), 4.0)
    assert grid == pytest.approx(0.75, abs=2 * math.sqrt(2) / 512 * 4)
    with pytest.raises(G.GeometryError):
        G.boundary_layer_volume(TRIANGLE, 3.0, method="exact")


# ---------------------------------------------------------------- distance and cutoff


def test_distances():
    assert G.dist_to_boundary(UNIT_DISK, (0.0, 0.0)) == pytest.approx(1.0)
    assert G.dist_to_boundary(UNIT_SQUARE, (0.5, 0.5)) == pytest.approx(0.5)
    assert G.dist_to_boundary(UNIT_DISK, (0.25, 0.0)) == pytest.approx(0.75)
    assert G.dist_to_boundary(UNIT_DISK, (3.0, 0.0)) == 0.0


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_polygon_distance_matches_shapely_rectangle(x, y):
    poly = UNIT_SQUARE.as_polygon()
    assert G.dist_to_boundary(poly, (x, y)) == pytest.approx(G.dist_to_boundary(UNIT_SQUARE, (x, y)), abs=1e-12)


def test_cutoff_cases():
    assert G.cutoff_fr(UNIT_DISK, 2.0, (0.0, 0.0)) == 1.0
    assert G.cutoff_fr(UNIT_DISK, 2.0, (0.75, 0.0)) == pytest.approx(0.25)
    assert G.cutoff_fr(UNIT_DISK, 2.0, (1.5, 0.0)) == 0.0


@given(st.floats(1.5, 20.0), st.floats(1e-9, 1e-3), st.floats(0, 2 * math.pi))
def test_cutoff_continuous_across_layer_edge(r, eps, theta):
    for sign in (-1, 1):
        rho = 1.0 - (1.0 / r + sign * eps)
        p = (rho * math.cos(theta), rho * math.sin(theta))
        actual = abs(G.dist_to_boundary(UNIT_DISK, p) - 1.0 / r)
        assert abs(G.cutoff_fr(UNIT_DISK, r, p) - 1.0) <= 2 * r * actual + 1e-15


# ---------------------------------------------------------------- Laplacian of d^2


def test_laplacian_dist_sq_examples():
    assert G.laplacian_dist_sq(UNIT_DISK, (0.5, 0.0)) == pytest.approx(0.0, abs=1e-14)
    assert G.laplacian_dist_sq(UNIT_DISK, (0.0, 2 / 3)) == pytest.approx(1.0, abs=1e-14)
    assert G.laplacian_dist_sq(UNIT_SQUARE, (0.5, 0.1)) == 2.0


def test_laplacian_dist_sq_polar_oracle():
    rng = np.random.default_rng(3)
    pts = G.sample_interior(UNIT_DISK, 100, rng)
    vals = G.laplacian_dist_sq(UNIT_DISK, pts)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    np.testing.assert_allclose(vals, 4 - 2 / rho, rtol=0, atol=1e-10)


def test_laplacian_dist_sq_finite_difference_oracle():
    d2 = lambda p: G.dist_to_boundary(UNIT_DISK, p) ** 2
    e = 1e-4
    for p in [(0.3, 0.4), (-0.7, 0.1), (0.0, -0.9)]:
        x, y = p
        lap = (d2((x + e, y)) + d2((x - e, y)) + d2((x, y + e)) + d2((x, y - e)) - 4 * d2(p)) / e**2
        assert G.laplacian_dist_sq(UNIT_DISK, p) == pytest.approx(lap, abs=1e-5)


def test_laplacian_in_layer_bounded():
    rng = np.random.default_rng(4)
    r = 3.0
    pts = G.sample_interior(UNIT_DISK, 1000, rng, where=lambda p: G.dist_to_boundary(UNIT_DISK, p) < 1 / r)
    vals = G.laplacian_dist_sq(UNIT_DISK, pts)
    assert np.all((vals > 0) & (vals < 4))


def test_laplacian_rejections():
    with pytest.raises(G.GeometryError):
        G.laplacian_dist_sq(UNIT_DISK, (0.0, 0.0))
    with pytest.raises(G.GeometryError):
        G.laplacian_dist_sq(UNIT_SQUARE, (0.5, 0.5))  # medial axis
    with pytest.raises(G.GeometryError):
        G.laplacian_dist_sq(UNIT_DISK, (2.0, 0.0))


# ---------------------------------------------------------------- cut cells


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.01, 0.5))
def test_disk_cell_area_exact(x, y, h):
    exact = UNIT_DISK.cell_area(x, x + h, y, y + h)[0]
    poly = G.Polygon(tuple((math.cos(t), math.sin(t)) for t in np.linspace(0, 2 * math.pi, 4001)[:-1]))
    assert exact == pytest.approx(poly.cell_area(x, x + h, y, y + h)[0], abs=2e-6 * h)
    assert 0 <= exact <= h * h * (1 + 1e-12)


def test_entry_parameter_square():
    t = UNIT_SQUARE.entry_parameter(np.array([[-0.25, 0.5]]), np.array([[1.0, 0.0]]))
    assert t[0] == pytest.approx(0.25)
    t = UNIT_DISK.entry_parameter(np.array([[-2.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert t[0] == pytest.approx(1.0)

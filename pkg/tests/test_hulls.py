import numpy as np
import pytest

from poincare_linear import geometry as geo
from poincare_linear import hulls
from poincare_linear.errors import UsageError


def disk_points(rng, n, rmax=0.95):
    angle = rng.uniform(0, 2 * np.pi, n)
    radius = rmax * np.sqrt(rng.random(n))
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def brute_force_hull(points):
    """Indices i such that some directed chord i -> j has every other point strictly to its left.

    Geodesics are straight chords in Klein coordinates, so the hyperbolic hull
    is the Euclidean hull of the Klein images.
    """
    k = hulls.to_klein(points)
    n = len(k)
    out = set()
    for i in range(n):
        e = k - k[i]
        cross = e[:, None, 0] * e[None, :, 1] - e[:, None, 1] * e[None, :, 0]  # cross[j, m]
        np.fill_diagonal(cross, 1.0)
        cross[:, i] = 1.0
        ok = np.all(cross > 0, axis=1)
        ok[i] = False
        for j in np.flatnonzero(ok):
            out.update((i, int(j)))
    return out


def test_geodesic_side_signs():
    a, b = np.array([-0.5, 0.0]), np.array([0.5, 0.0])
    assert hulls.geodesic_side(a, b, [0.0, 0.3]) > 0
    assert hulls.geodesic_side(a, b, [0.0, -0.3]) < 0
    assert hulls.geodesic_side(a, b, [0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(UsageError):
        hulls.geodesic_side(a, a, [0.1, 0.1])


def test_geodesic_side_zero_on_curved_geodesic():
    a, b = np.array([0.1, 0.5]), np.array([0.6, -0.2])
    mid = geo.geodesic(a, b, 0.37)
    scale = np.linalg.norm(geo.log_map(a, b)) * np.linalg.norm(geo.log_map(a, mid))
    assert abs(hulls.geodesic_side(a, b, mid)) < 1e-12 * scale


@pytest.mark.parametrize("method", [hulls.graham_scan, hulls.quickhull])
def test_hull_matches_brute_force(method):
    rng = np.random.default_rng(0)
    for _ in range(20):
        pts = disk_points(rng, 60)
        assert set(method(pts).tolist()) == brute_force_hull(pts)


@pytest.mark.parametrize("method", [hulls.graham_scan, hulls.quickhull])
def test_hull_is_counterclockwise_and_contains_all_points(method):
    rng = np.random.default_rng(1)
    for _ in range(10):
        pts = disk_points(rng, 100)
        idx = method(pts)
        verts = pts[idx]
        for a, b in zip(verts, np.roll(verts, -1, axis=0)):
            side = hulls.geodesic_side(a, b, pts)
            scale = np.linalg.norm(geo.log_map(a, b)) * np.linalg.norm(geo.log_map(a, pts), axis=1)
            assert np.all(side >= -1e-12 * scale)


def test_graham_and_quickhull_agree_on_hyperbolic_specific_case():
    # the lowest point (0.07, 0.32) is not a hull vertex: the geodesic between
    # the two outer points bows towards the origin and passes below it
    pts = np.array([[-0.6, 0.37], [0.54, 0.34], [0.55, 0.64], [0.07, 0.32]])
    g = set(hulls.graham_scan(pts).tolist())
    q = set(hulls.quickhull(pts).tolist())
    assert g == q == brute_force_hull(pts) == {0, 1, 2}


def test_small_and_degenerate_inputs():
    one = np.array([[0.1, 0.2]])
    np.testing.assert_array_equal(hulls.graham_scan(one), [0])
    two = np.array([[0.1, 0.2], [-0.3, 0.0]])
    assert set(hulls.quickhull(two).tolist()) == {0, 1}
    dup = np.array([[0.1, 0.2], [0.1, 0.2], [0.3, -0.1], [-0.2, -0.2]])
    assert len(hulls.graham_scan(dup)) == 3
    assert len(hulls.quickhull(dup)) == 3


def test_collinear_points_give_segment_ends():
    # points on a diameter are geodesically collinear
    pts = np.column_stack([np.linspace(-0.8, 0.8, 9), np.zeros(9)])
    for method in (hulls.graham_scan, hulls.quickhull):
        assert set(method(pts).tolist()) == {0, 8}


def test_hull_rejects_bad_input():
    with pytest.raises(UsageError):
        hulls.graham_scan(np.zeros((3, 3)))
    with pytest.raises(UsageError):
        hulls.quickhull(np.array([[1.2, 0.0], [0.0, 0.0], [0.1, 0.1]]))
    with pytest.raises(UsageError):
        hulls.hull_vertices(disk_points(np.random.default_rng(0), 5), method="jarvis")


def test_min_distance_pair_matches_brute_force():
    rng = np.random.default_rng(2)
    a, b = disk_points(rng, 300), disk_points(rng, 250)
    pair = hulls.min_distance_pair(a, b, chunk=64)
    d = geo.dist(a[:, None, :], b[None, :, :])
    assert pair.distance == pytest.approx(d.min(), rel=1e-14)
    assert pair.index == np.unravel_index(np.argmin(d), d.shape)


def test_reference_point_symmetric_configuration():
    pos = np.array([[0.5, 0.1], [0.6, -0.1], [0.7, 0.0]])
    neg = -pos
    ref = hulls.reference_point(pos, neg)
    np.testing.assert_allclose(ref.p, [0.0, 0.0], atol=1e-15)
    assert not ref.degenerate
    assert geo.dist(ref.p, ref.pair.pos) == pytest.approx(geo.dist(ref.p, ref.pair.neg), rel=1e-12)


def test_reference_point_methods_agree_and_use_hull_vertices():
    rng = np.random.default_rng(3)
    pts = disk_points(rng, 400)
    pos, neg = pts[pts[:, 0] > 0.05], pts[pts[:, 0] < -0.05]
    g = hulls.reference_point(pos, neg, "graham")
    q = hulls.reference_point(pos, neg, "quickhull")
    np.testing.assert_allclose(g.p, q.p)
    hull_pair = hulls.min_distance_pair(hulls.hull_vertices(pos), hulls.hull_vertices(neg))
    assert g.pair.distance == hull_pair.distance
    # restricting to hull vertices can only lengthen the closest pair
    assert g.pair.distance >= hulls.min_distance_pair(pos, neg).distance


def test_reference_point_degenerate_shared_point():
    pos = np.array([[0.1, 0.1], [0.5, 0.2], [0.3, 0.6]])
    neg = np.array([[0.1, 0.1], [-0.5, 0.2], [-0.3, -0.6]])
    ref = hulls.reference_point(pos, neg)
    assert ref.degenerate
    np.testing.assert_array_equal(ref.p, [0.1, 0.1])


def test_reference_point_higher_dimension_uses_all_points():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((200, 4))
    x *= 0.8 / np.linalg.norm(x, axis=1, keepdims=True) * rng.random((200, 1))
    pos, neg = x[x[:, 0] > 0], x[x[:, 0] <= 0]
    ref = hulls.reference_point(pos, neg)
    pair = hulls.min_distance_pair(pos, neg)
    np.testing.assert_allclose(ref.p, geo.geodesic(pair.pos, pair.neg, 0.5))

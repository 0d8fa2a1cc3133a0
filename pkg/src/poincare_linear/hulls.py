"""Convex hulls in the Poincaré disk and reference-point learning.

Lines are replaced by geodesics and the vector ``AB`` by ``log_A(B)``.  Both
hull algorithms return the strict hull (no geodesically collinear vertices) in
counterclockwise order.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import geometry as geo
from .errors import UsageError

COLLINEAR_TOL = 1e-12


def _as_points(points, name: str = "points") -> np.ndarray:
    pts = geo.check_ball(points, name)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise UsageError(f"{name} must be a non-empty (N, d) array")
    return pts


def _as_planar(points) -> np.ndarray:
    pts = _as_points(points)
    if pts.shape[1] != 2:
        raise UsageError(f"hull algorithms need 2-D points, got d={pts.shape[1]}")
    return pts


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def geodesic_side(a, b, x) -> np.ndarray:
    """Signed turn of ``x`` relative to the directed geodesic ``a → b``.

    The z-component of ``log_a(b) × log_a(x)``: positive on the left,
    negative on the right, zero on the geodesic.  ``x`` may be a batch.
    """
    a, b, x = np.asarray(a, float), np.asarray(b, float), np.asarray(x, float)
    if np.allclose(a, b, rtol=0.0, atol=0.0):
        raise UsageError("geodesic_side needs two distinct points")
    return _cross(geo.log_map(a, b), geo.log_map(a, x))


def _turn(a, b, x) -> np.ndarray:
    """``geodesic_side`` normalised by the tangent lengths, zeroed within tolerance."""
    u = geo.log_map(a, b)
    v = geo.log_map(a, x)
    c = _cross(u, v)
    scale = np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1)
    return np.where(np.abs(c) <= COLLINEAR_TOL * np.maximum(scale, 1e-300), 0.0, c)


def _unique(pts: np.ndarray) -> np.ndarray:
    _, idx = np.unique(pts, axis=0, return_index=True)
    return np.sort(idx)


def to_klein(points) -> np.ndarray:
    """Beltrami-Klein coordinates, where geodesics are straight chords."""
    x = np.asarray(points, float)
    return 2.0 * x / (1.0 + np.sum(x * x, axis=-1, keepdims=True))


def _angular_order(angle: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Sort by angle, starting after the widest circular gap."""
    order = np.lexsort((radius, angle))
    a = angle[order]
    gaps = np.diff(np.concatenate([a, a[:1] + 2 * np.pi]))
    start = (int(np.argmax(gaps)) + 1) % a.size
    return np.roll(order, -start)


def graham_scan(points) -> np.ndarray:
    """Indices of the hull vertices of ``points`` (counterclockwise)."""
    pts = _as_planar(points)
    keep = _unique(pts)
    if keep.size <= 2:
        return keep
    # lowest in Klein coordinates is always a hull vertex; lowest in ball
    # coordinates is not when the points sit above the centre
    k = to_klein(pts[keep])
    anchor = keep[np.lexsort((k[:, 0], k[:, 1]))[0]]
    others = keep[keep != anchor]
    v = geo.log_map(pts[anchor], pts[others])
    radius = np.linalg.norm(v, axis=1)
    order = others[_angular_order(np.arctan2(v[:, 1], v[:, 0]), radius)]

    stack = [anchor]
    for i in list(order) + [anchor]:
        while len(stack) > 1 and _turn(pts[stack[-2]], pts[stack[-1]], pts[i]) <= 0:
            stack.pop()
        if i != anchor:
            stack.append(i)
    if len(stack) == 1:
        # every point on one geodesic: the hull is the segment's two ends
        stack.append(others[int(np.argmax(radius))])
    return np.asarray(stack, dtype=np.intp)


def _furthest(pts: np.ndarray, cand: np.ndarray, a: np.ndarray, b: np.ndarray) -> int:
    mid = geo.geodesic(a, b, 0.5)
    v = geo.log_map(mid, b)
    plane = geo.Hyperplane(mid, np.array([-v[1], v[0]]))
    d = geo.hyperplane_dist(pts[cand], plane)
    return cand[int(np.argmax(d))]


def _find_hull(pts: np.ndarray, cand: np.ndarray, a: int, b: int) -> list[int]:
    """Hull vertices strictly right of ``a → b``, ordered from ``a`` to ``b``."""
    if cand.size == 0:
        return []
    f = _furthest(pts, cand, pts[a], pts[b])
    rest = cand[cand != f]
    right_af = rest[_turn(pts[a], pts[f], pts[rest]) < 0] if rest.size else rest
    right_fb = rest[_turn(pts[f], pts[b], pts[rest]) < 0] if rest.size else rest
    return _find_hull(pts, right_af, a, f) + [f] + _find_hull(pts, right_fb, f, b)


def quickhull(points) -> np.ndarray:
    """Indices of the hull vertices of ``points`` (counterclockwise)."""
    pts = _as_planar(points)
    keep = _unique(pts)
    if keep.size <= 2:
        return keep
    k = to_klein(pts[keep])
    a = keep[np.lexsort((k[:, 1], k[:, 0]))[0]]
    b = keep[np.lexsort((-k[:, 1], -k[:, 0]))[0]]
    rest = keep[(keep != a) & (keep != b)]
    side = _turn(pts[a], pts[b], pts[rest]) if rest.size else np.empty(0)
    lower = _find_hull(pts, rest[side < 0], a, b)
    upper = _find_hull(pts, rest[side > 0], b, a)
    # right of a→b (a leftmost) is the lower chain, so this walk is counterclockwise
    return np.asarray([a] + lower + [b] + upper, dtype=np.intp)


def hull_vertices(points, method: str = "graham") -> np.ndarray:
    """Hull vertex coordinates using ``method`` in {"graham", "quickhull"}."""
    pts = _as_planar(points)
    if method == "graham":
        return pts[graham_scan(pts)]
    if method == "quickhull":
        return pts[quickhull(pts)]
    raise UsageError(f"unknown hull method {method!r}")


class PointPair(NamedTuple):
    pos: np.ndarray
    neg: np.ndarray
    distance: float
    index: tuple[int, int]


def min_distance_pair(pos, neg, chunk: int = 2048) -> PointPair:
    """Closest pair between two point sets (first minimum in row-major order)."""
    pos = _as_points(pos, "positive points")
    neg = _as_points(neg, "negative points")
    geo._same_dim(pos, neg)
    best, best_ij = np.inf, (0, 0)
    for start in range(0, pos.shape[0], chunk):
        block = pos[start:start + chunk]
        d = geo.dist(block[:, None, :], neg[None, :, :])
        k = int(np.argmin(d))
        i, j = divmod(k, neg.shape[0])
        if d[i, j] < best:
            best, best_ij = float(d[i, j]), (start + i, j)
    i, j = best_ij
    return PointPair(pos[i], neg[j], best, best_ij)


class ReferencePoint(NamedTuple):
    p: np.ndarray
    pair: PointPair
    degenerate: bool


def reference_point(class_pos, class_neg, method: str = "graham") -> ReferencePoint:
    """Geodesic midpoint of the closest pair of hull vertices of the two classes.

    In dimension > 2 the closest pair is taken over all points.  If the
    classes share a point, that point is returned with ``degenerate=True``.
    """
    pos = _as_points(class_pos, "positive class")
    neg = _as_points(class_neg, "negative class")
    geo._same_dim(pos, neg)
    if pos.shape[1] == 2:
        pos = hull_vertices(pos, method)
        neg = hull_vertices(neg, method)
    pair = min_distance_pair(pos, neg)
    if pair.distance == 0.0:
        return ReferencePoint(pair.pos.copy(), pair, True)
    return ReferencePoint(geo.geodesic(pair.pos, pair.neg, 0.5), pair, False)

"""Planar kernels: convex hulls, polygon areas, box overlap."""

from __future__ import annotations

from dataclasses import dataclass

from .types import BoundingBox


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float


@dataclass(frozen=True)
class ConvexPolygon:
    """Hull vertices in counter-clockwise order.

    Degenerate inputs survive as degenerate polygons: a single vertex for a
    point set of size one, two vertices for a collinear set. Both have zero
    area.
    """

    vertices: tuple[Point2D, ...]


def _cross(o: tuple, a: tuple, b: tuple) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> ConvexPolygon:
    """Monotone-chain convex hull, O(n log n).

    Collinear points on the hull boundary are excluded, so the result is
    strictly convex. Duplicate input points collapse first.
    """
    pts = sorted({(float(p.x), float(p.y)) for p in points})
    if not pts:
        raise ValueError("convex hull of an empty point set")
    if len(pts) == 1:
        return ConvexPolygon((Point2D(*pts[0]),))

    def half(seq):
        chain: list[tuple] = []
        for p in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    ring = lower[:-1] + upper[:-1]
    return ConvexPolygon(tuple(Point2D(*p) for p in ring))


def polygon_area(polygon: ConvexPolygon) -> float:
    """Shoelace area; degenerate polygons (fewer than 3 vertices) have area 0."""
    verts = polygon.vertices
    if len(verts) < 3:
        return 0.0
    acc = 0.0
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        acc += a.x * b.y - b.x * a.y
    return abs(acc) / 2.0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    if not (a.is_valid() and b.is_valid()):
        raise ValueError("iou requires non-degenerate boxes")
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area() + b.area() - inter
    return inter / union

"""Axis-aligned rectangle primitives.

Rectangles are stored as center plus half-extents, so a k-expansion is a
multiplication of the two half-extents with the center held fixed.

Array helpers (``batch_*``) take ``(n, 4)`` arrays laid out as
``[center_x, center_y, half_width, half_height]`` and mirror the scalar
functions row by row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class GeometryError(ValueError):
    """Raised for rectangles that violate construction invariants."""


class InvalidFactorError(ValueError):
    """Raised when an enlargement factor is below 1 or not finite."""


@dataclass(frozen=True, slots=True)
class Rect:
    center_x: float
    center_y: float
    half_width: float
    half_height: float

    def __post_init__(self) -> None:
        values = (self.center_x, self.center_y, self.half_width, self.half_height)
        if not all(math.isfinite(v) for v in values):
            raise GeometryError(f"non-finite rectangle field in {values}")
        if self.half_width <= 0 or self.half_height <= 0:
            raise GeometryError(
                f"half-extents must be positive, got ({self.half_width}, {self.half_height})"
            )

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> Rect:
        """Build from two opposite corners, in any order."""
        left, right = min(x0, x1), max(x0, x1)
        bottom, top = min(y0, y1), max(y0, y1)
        return cls(
            (left + right) / 2, (bottom + top) / 2, (right - left) / 2, (top - bottom) / 2
        )

    @classmethod
    def from_center_size(cls, cx: float, cy: float, width: float, height: float) -> Rect:
        """Build from a center and full width/height (the YOLO convention)."""
        return cls(cx, cy, width / 2, height / 2)

    @property
    def left(self) -> float:
        return self.center_x - self.half_width

    @property
    def right(self) -> float:
        return self.center_x + self.half_width

    @property
    def bottom(self) -> float:
        return self.center_y - self.half_height

    @property
    def top(self) -> float:
        return self.center_y + self.half_height

    @property
    def width(self) -> float:
        return 2 * self.half_width

    @property
    def height(self) -> float:
        return 2 * self.half_height

    @property
    def area(self) -> float:
        return 4 * self.half_width * self.half_height

    def corners(self) -> tuple[float, float, float, float]:
        return self.left, self.bottom, self.right, self.top

    def as_array(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y, self.half_width, self.half_height])


def intersection_area(a: Rect, b: Rect) -> float:
    """Overlap area; rectangles that only touch along an edge give 0."""
    ix = min(a.right, b.right) - max(a.left, b.left)
    iy = min(a.top, b.top) - max(a.bottom, b.bottom)
    if ix <= 0 or iy <= 0:
        return 0.0
    return ix * iy


def _corner_area(r: Rect) -> float:
    # same arithmetic as the overlap, so iou(r, r) is exactly 1
    return (r.right - r.left) * (r.top - r.bottom)


def iou(a: Rect, b: Rect) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = _corner_area(a) + _corner_area(b) - inter
    return min(1.0, inter / union)


def intersect(a: Rect, b: Rect) -> Rect | None:
    """The overlap rectangle, or None when the overlap has zero area."""
    left, right = max(a.left, b.left), min(a.right, b.right)
    bottom, top = max(a.bottom, b.bottom), min(a.top, b.top)
    if right <= left or top <= bottom:
        return None
    return Rect.from_corners(left, bottom, right, top)


def expand(r: Rect, k: float) -> Rect:
    """k-expansion: scale both half-extents by ``k >= 1`` about the center."""
    if not math.isfinite(k) or k < 1:
        raise InvalidFactorError(f"enlargement factor must be a finite value >= 1, got {k}")
    return Rect(r.center_x, r.center_y, r.half_width * k, r.half_height * k)


def contains(outer: Rect, inner: Rect, tol: float = TOL) -> bool:
    """Closed containment: ``inner`` touching the boundary of ``outer`` counts."""
    return (
        inner.left >= outer.left - tol
        and inner.right <= outer.right + tol
        and inner.bottom >= outer.bottom - tol
        and inner.top <= outer.top + tol
    )


def min_cover_factor(pr: Rect, gt: Rect) -> float:
    """Smallest k >= 1 such that ``expand(pr, k)`` contains ``gt``.

    Each side of ``gt`` must be reached from the fixed center of ``pr``; the
    required factor for that side is its distance from the center over the
    matching half-extent. The answer is the largest of the four, floored at 1.
    """
    if contains(pr, gt, tol=0.0):
        return 1.0
    w, h = pr.half_width, pr.half_height
    return max(
        1.0,
        (pr.center_x - gt.left) / w,
        (gt.right - pr.center_x) / w,
        (pr.center_y - gt.bottom) / h,
        (gt.top - pr.center_y) / h,
    )


def batch_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ix = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(
        a[:, 0] - a[:, 2], b[:, 0] - b[:, 2]
    )
    iy = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(
        a[:, 1] - a[:, 3], b[:, 1] - b[:, 3]
    )
    inter = np.where((ix > 0) & (iy > 0), ix * iy, 0.0)
    area_a = ((a[:, 0] + a[:, 2]) - (a[:, 0] - a[:, 2])) * ((a[:, 1] + a[:, 3]) - (a[:, 1] - a[:, 3]))
    area_b = ((b[:, 0] + b[:, 2]) - (b[:, 0] - b[:, 2])) * ((b[:, 1] + b[:, 3]) - (b[:, 1] - b[:, 3]))
    union = area_a + area_b - inter
    return np.where(inter > 0, np.minimum(1.0, inter / union), 0.0)


def batch_min_cover_factor(pr: np.ndarray, gt: np.ndarray) -> np.ndarray:
    cx, cy, w, h = pr[:, 0], pr[:, 1], pr[:, 2], pr[:, 3]
    g_left, g_right = gt[:, 0] - gt[:, 2], gt[:, 0] + gt[:, 2]
    g_bottom, g_top = gt[:, 1] - gt[:, 3], gt[:, 1] + gt[:, 3]
    covered = (
        (g_left >= cx - w) & (g_right <= cx + w) & (g_bottom >= cy - h) & (g_top <= cy + h)
    )
    sides = np.stack(
        [(cx - g_left) / w, (g_right - cx) / w, (cy - g_bottom) / h, (g_top - cy) / h]
    )
    return np.where(covered, 1.0, np.maximum(1.0, sides.max(axis=0)))

"""Closed-form enlargement bounds and the motion-planner buffer calculus.

Physical lengths are in meters. The buffer functions are written for the
width axis but apply unchanged to height when given height quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TOL = 1e-9


class DomainError(ValueError):
    """Raised when an argument lies outside a formula's domain."""


def check_alpha(alpha: float) -> float:
    """Validate an IoU threshold, which must lie in (0, 1]."""
    try:
        value = float(alpha)
    except (TypeError, ValueError):
        raise DomainError(f"IoU threshold must be a number, got {alpha!r}") from None
    if isinstance(alpha, bool) or not 0 < value <= 1:
        raise DomainError(f"IoU threshold must lie in (0, 1], got {alpha!r}")
    return value


def _check_factor(k: float, name: str = "k") -> float:
    if not math.isfinite(k) or k < 1:
        raise DomainError(f"{name} must be a finite value >= 1, got {k!r}")
    return float(k)


def _check_positive(x: float, name: str) -> float:
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"{name} must be positive and finite, got {x!r}")
    return float(x)


@dataclass(frozen=True, slots=True)
class BufferSpec:
    """Planner buffer added on each side of a box, plus the largest width it must serve."""

    buffer_x: float
    max_width: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.buffer_x) or self.buffer_x < 0:
            raise DomainError(f"buffer_x must be finite and >= 0, got {self.buffer_x!r}")
        _check_positive(self.max_width, "max_width")


def k_math(alpha: float) -> float:
    """Worst-case enlargement factor guaranteeing cover whenever IoU >= alpha."""
    alpha = check_alpha(alpha)
    return (2 - alpha) / alpha


def safe_iou_for_k(k: float) -> float:
    """Smallest IoU threshold for which a fixed factor ``k`` is always enough."""
    k = _check_factor(k)
    return 2 / (1 + k)


def max_observed_width(length: float, width: float) -> float:
    """Largest projected width of an object: its diagonal, seen broadside.

    >>> round(max_observed_width(7.0, 2.5), 2)
    7.43
    """
    _check_positive(length, "length")
    if not math.isfinite(width) or width < 0:
        raise DomainError(f"width must be finite and >= 0, got {width!r}")
    return math.hypot(length, width)


def buffer_threshold(k_target: float, max_width: float) -> float:
    """Buffer at which the planner alone covers ``k_target``.

    Not a formula of its own: it is where ``k_target - 2x/max_width`` meets the
    floor of 1 in :func:`residual_factor`.
    """
    k_target = _check_factor(k_target, "k_target")
    max_width = _check_positive(max_width, "max_width")
    return max_width * (k_target - 1) / 2


def residual_factor(k_target: float, spec: BufferSpec) -> float:
    """Enlargement the post-processor still applies once the planner buffer is counted.

    Returns exactly 1.0 whenever the buffer reaches :func:`buffer_threshold`.
    """
    k_target = _check_factor(k_target, "k_target")
    if spec.buffer_x >= buffer_threshold(k_target, spec.max_width):
        return 1.0
    return max(k_target - 2 * spec.buffer_x / spec.max_width, 1.0)


def combined_check(buffer_x: float, object_width: float, k_res: float, k_target: float) -> bool:
    """True if buffer plus residual enlargement reaches ``k_target`` for this width."""
    _check_positive(object_width, "object_width")
    if not math.isfinite(buffer_x) or buffer_x < 0:
        raise DomainError(f"buffer_x must be finite and >= 0, got {buffer_x!r}")
    return 2 * buffer_x / object_width + k_res >= k_target - TOL


def buffer_curve(
    k_target: float, max_width: float, x_max: float, steps: int
) -> list[tuple[float, float]]:
    """Residual factor sampled at ``steps + 1`` evenly spaced buffers in [0, x_max]."""
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps!r}")
    if not math.isfinite(x_max) or x_max < 0:
        raise DomainError(f"x_max must be finite and >= 0, got {x_max!r}")
    points = []
    for i in range(steps + 1):
        x = x_max * i / steps
        points.append((x, residual_factor(k_target, BufferSpec(x, max_width))))
    return points

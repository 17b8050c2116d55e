"""Provably safe enlargement of imprecise 2D detection boxes."""

from .geometry import (
    GeometryError,
    InvalidFactorError,
    Rect,
    contains,
    expand,
    intersect,
    iou,
    min_cover_factor,
)
from .theory import (
    BufferSpec,
    DomainError,
    buffer_threshold,
    combined_check,
    k_math,
    max_observed_width,
    residual_factor,
    safe_iou_for_k,
)
from .verifier import VerifyReport, verify_theorem, worst_case_witness

__version__ = "0.1.0"

__all__ = [
    "BufferSpec",
    "DomainError",
    "GeometryError",
    "InvalidFactorError",
    "Rect",
    "VerifyReport",
    "buffer_threshold",
    "combined_check",
    "contains",
    "expand",
    "intersect",
    "iou",
    "k_math",
    "max_observed_width",
    "min_cover_factor",
    "residual_factor",
    "safe_iou_for_k",
    "verify_theorem",
    "worst_case_witness",
]

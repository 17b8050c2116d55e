"""Monte Carlo falsification of the worst-case enlargement bound.

Ground truth is pinned to the unit square. Both IoU and the minimal cover
factor are unchanged by translating or rescaling either axis (applied to
both boxes), so this loses no generality.

Predictions are drawn from a distribution whose support is exactly the
set of boxes that can reach IoU >= alpha with the unit square:

* each side length ``s`` must lie in ``[alpha, 1/alpha]``; a narrower box
  caps the intersection below ``alpha`` and a wider one caps the IoU at
  ``1/s``. Lengths are drawn log-uniformly over that range, which puts
  plenty of mass on extreme aspect ratios.
* the overlap along an axis must be at least ``alpha * max(1, s)``, which
  bounds the center offset by ``(1 + s)/2 - alpha * max(1, s)``.

Candidates are then rejected until the IoU condition holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TOL,
    Rect,
    batch_iou,
    batch_min_cover_factor,
    contains,
    expand,
    iou,
    min_cover_factor,
)
from .theory import check_alpha, k_math

UNIT_SQUARE = Rect(0.5, 0.5, 0.5, 0.5)
RESAMPLE_CAP = 100_000
_CHUNK = 4096
_SEED_MOD = 2**64


class SamplingError(RuntimeError):
    """Rejection sampling exceeded its resampling budget."""


def _draw_candidates(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    log_a = math.log(alpha)
    sx = np.exp(rng.uniform(log_a, -log_a, n))
    sy = np.exp(rng.uniform(log_a, -log_a, n))
    bx = np.maximum(0.0, (1 + sx) / 2 - alpha * np.maximum(1.0, sx))
    by = np.maximum(0.0, (1 + sy) / 2 - alpha * np.maximum(1.0, sy))
    dx = rng.uniform(-1.0, 1.0, n) * bx
    dy = rng.uniform(-1.0, 1.0, n) * by
    return np.column_stack([0.5 + dx, 0.5 + dy, sx / 2, sy / 2])


def sample_predictions(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` prediction boxes, as ``(n, 4)`` rows, with IoU >= alpha against the unit square."""
    alpha = check_alpha(alpha)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if alpha == 1.0:
        # only the square itself qualifies
        return np.tile(UNIT_SQUARE.as_array(), (n, 1))

    gt_row = UNIT_SQUARE.as_array()
    accepted: list[np.ndarray] = []
    have = 0
    attempts = 0
    budget = RESAMPLE_CAP * max(n, 1)
    while have < n:
        if attempts >= budget:
            raise SamplingError(
                f"no more than {have} of {n} samples accepted after {attempts} draws at alpha={alpha}"
            )
        chunk = min(max(_CHUNK, 2 * (n - have)), budget - attempts)
        cand = _draw_candidates(alpha, chunk, rng)
        attempts += chunk
        ok = batch_iou(cand, np.broadcast_to(gt_row, cand.shape)) >= alpha
        good = cand[ok]
        if good.shape[0]:
            good = good[: n - have]
            accepted.append(good)
            have += good.shape[0]
    if not accepted:
        return np.empty((0, 4))
    return np.concatenate(accepted)


def sample_pair(alpha: float, rng: np.random.Generator) -> tuple[Rect, Rect]:
    """One (prediction, ground truth) pair satisfying the IoU hypothesis."""
    row = sample_predictions(alpha, 1, rng)[0]
    return Rect(*map(float, row)), UNIT_SQUARE


def worst_case_witness(alpha: float, transpose: bool = False) -> tuple[Rect, Rect]:
    """Pair attaining the bound: the prediction shares three sides of the unit square.

    With ``transpose`` the deficit sits on the height axis instead of the width.
    """
    alpha = check_alpha(alpha)
    gt = Rect.from_corners(0.0, 0.0, 1.0, 1.0)
    if transpose:
        pr = Rect.from_corners(0.0, 0.0, 1.0, alpha)
    else:
        pr = Rect.from_corners(0.0, 0.0, alpha, 1.0)
    return pr, gt


@dataclass(frozen=True)
class VerifyReport:
    alpha: float
    samples: int
    seed: int
    bound: float
    max_observed_k: float
    violations: int
    worst_pair: tuple[Rect, Rect] | None
    witness_k: float
    transposed_witness_k: float
    witness_iou: float
    shards: int = 1
    worst_pair_covered: bool = field(default=True)

    @property
    def witness_tight(self) -> bool:
        return (
            abs(self.witness_k - self.bound) <= TOL
            and abs(self.transposed_witness_k - self.bound) <= TOL
        )

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.witness_tight and self.worst_pair_covered

    def to_dict(self) -> dict:
        worst = None
        if self.worst_pair is not None:
            pr, gt = self.worst_pair
            worst = {
                "pred": [pr.center_x, pr.center_y, pr.half_width, pr.half_height],
                "gt": [gt.center_x, gt.center_y, gt.half_width, gt.half_height],
                "iou": iou(pr, gt),
            }
        return {
            "alpha": self.alpha,
            "samples": self.samples,
            "seed": self.seed,
            "shards": self.shards,
            "bound": self.bound,
            "max_observed_k": self.max_observed_k,
            "violations": self.violations,
            "worst_pair": worst,
            "worst_pair_covered": self.worst_pair_covered,
            "witness_k": self.witness_k,
            "transposed_witness_k": self.transposed_witness_k,
            "witness_iou": self.witness_iou,
            "witness_tight": self.witness_tight,
            "passed": self.passed,
        }


def _run_shard(alpha: float, samples: int, seed: int) -> VerifyReport:
    bound = k_math(alpha)
    rng = np.random.default_rng(seed)
    preds = sample_predictions(alpha, samples, rng)
    gts = np.broadcast_to(UNIT_SQUARE.as_array(), preds.shape)
    ks = batch_min_cover_factor(preds, gts)

    worst_pair = None
    max_k = 1.0
    covered = True
    if samples:
        i = int(np.argmax(ks))
        pr = Rect(*map(float, preds[i]))
        worst_pair = (pr, UNIT_SQUARE)
        # scalar re-evaluation keeps the array path honest
        max_k = min_cover_factor(pr, UNIT_SQUARE)
        covered = contains(expand(pr, bound), UNIT_SQUARE)

    pr_w, gt_w = worst_case_witness(alpha)
    pr_t, gt_t = worst_case_witness(alpha, transpose=True)
    return VerifyReport(
        alpha=alpha,
        samples=samples,
        seed=seed,
        bound=bound,
        max_observed_k=max_k,
        violations=int(np.count_nonzero(ks > bound + TOL)),
        worst_pair=worst_pair,
        witness_k=min_cover_factor(pr_w, gt_w),
        transposed_witness_k=min_cover_factor(pr_t, gt_t),
        witness_iou=iou(pr_w, gt_w),
        worst_pair_covered=covered,
    )


def merge_reports(a: VerifyReport, b: VerifyReport) -> VerifyReport:
    """Combine two shard reports for the same alpha; the left one wins ties."""
    if a.alpha != b.alpha:
        raise ValueError(f"cannot merge reports for alpha={a.alpha} and alpha={b.alpha}")
    if b.worst_pair is not None and (a.worst_pair is None or b.max_observed_k > a.max_observed_k):
        worst, max_k = b.worst_pair, b.max_observed_k
    else:
        worst, max_k = a.worst_pair, a.max_observed_k
    return VerifyReport(
        alpha=a.alpha,
        samples=a.samples + b.samples,
        seed=a.seed,
        bound=a.bound,
        max_observed_k=max_k,
        violations=a.violations + b.violations,
        worst_pair=worst,
        witness_k=a.witness_k,
        transposed_witness_k=a.transposed_witness_k,
        witness_iou=a.witness_iou,
        shards=a.shards + b.shards,
        worst_pair_covered=a.worst_pair_covered and b.worst_pair_covered,
    )


def verify_theorem(alpha: float, samples: int, seed: int, shards: int = 1) -> VerifyReport:
    """Sample ``samples`` pairs with IoU >= alpha and count factors above the bound.

    Shard ``i`` draws from its own generator seeded with ``seed + i``, so a
    report depends only on ``(alpha, samples, seed, shards)``.
    """
    alpha = check_alpha(alpha)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if shards < 1 or shards > samples:
        raise ValueError(f"shards must lie in [1, samples], got {shards}")
    if not 0 <= seed < _SEED_MOD:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")

    base, extra = divmod(samples, shards)
    report = None
    for i in range(shards):
        shard = _run_shard(alpha, base + (i < extra), (seed + i) % _SEED_MOD)
        report = shard if report is None else merge_reports(report, shard)
    assert report is not None
    return report

"""Measured enlargement factors from annotated datasets.

Predictions are matched to ground truth per image, each matched pair gets
the smallest factor that makes the prediction cover its ground truth, and
those factors are summarized per IoU threshold.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .annotations import Detection
from .geometry import InvalidFactorError, Rect, contains, expand, intersect, iou, min_cover_factor
from .theory import check_alpha, k_math

# Chebyshev: P(|X - mu| >= 6 sigma) <= 1/6**2
CHEBYSHEV_TAIL_6SIGMA = 1 / 36
UNIT_IMAGE = Rect(0.5, 0.5, 0.5, 0.5)
HIST_EPS = 1e-9

SWEEP_COLUMNS = (
    "alpha",
    "k_math",
    "count",
    "k_max_data",
    "k_mu_data",
    "sigma_data",
    "mu_plus_3sigma",
    "mu_plus_6sigma",
)


class InsufficientDataError(ValueError):
    """Statistics were requested over an empty set of factors."""


@dataclass(frozen=True, slots=True)
class MatchedPair:
    image_id: str
    class_id: int
    pred: Rect
    gt: Rect
    iou: float
    k_measured: float


@dataclass(frozen=True, slots=True)
class EnlargementStats:
    alpha: float
    count: int
    k_max_data: float
    k_mu_data: float
    sigma_data: float
    mu_plus_3sigma: float
    mu_plus_6sigma: float
    chebyshev_tail_6sigma: float = CHEBYSHEV_TAIL_6SIGMA


def match(
    preds: Sequence[Detection],
    gts: Sequence[Detection],
    alpha: float,
    image_id: str = "",
) -> list[MatchedPair]:
    """Greedy one-to-one, class-aware matching of predictions to ground truth.

    Every same-class pair with IoU >= alpha is a candidate. Candidates are
    taken in order of decreasing IoU (ties broken by prediction index, then
    ground-truth index) and accepted when neither box is already used.
    """
    alpha = check_alpha(alpha)
    candidates = []
    for pi, p in enumerate(preds):
        for gi, g in enumerate(gts):
            if p.class_id != g.class_id:
                continue
            value = iou(p.box, g.box)
            if value >= alpha:
                candidates.append((-value, pi, gi))
    candidates.sort()

    used_pred: set[int] = set()
    used_gt: set[int] = set()
    pairs = []
    for neg_iou, pi, gi in candidates:
        if pi in used_pred or gi in used_gt:
            continue
        used_pred.add(pi)
        used_gt.add(gi)
        p, g = preds[pi], gts[gi]
        pairs.append(
            MatchedPair(image_id, p.class_id, p.box, g.box, -neg_iou, min_cover_factor(p.box, g.box))
        )
    return pairs


def measure(pairs: Iterable[MatchedPair]) -> list[float]:
    return [min_cover_factor(p.pred, p.gt) for p in pairs]


def aggregate(ks: Sequence[float], alpha: float) -> EnlargementStats:
    """Max, mean and population standard deviation (divides by n) of the factors."""
    alpha = check_alpha(alpha)
    n = len(ks)
    if n == 0:
        raise InsufficientDataError(f"no enlargement factors to aggregate at alpha={alpha}")
    k_max = max(ks)
    # rounding the division can land one ulp outside [min, max]
    mean = min(max(math.fsum(ks) / n, min(ks)), k_max)
    sigma = math.sqrt(math.fsum((k - mean) ** 2 for k in ks) / n)
    return EnlargementStats(
        alpha=alpha,
        count=n,
        k_max_data=k_max,
        k_mu_data=mean,
        sigma_data=sigma,
        mu_plus_3sigma=mean + 3 * sigma,
        mu_plus_6sigma=mean + 6 * sigma,
    )


def collect_pairs(
    gt_set: Mapping[str, Sequence[Detection]],
    pred_set: Mapping[str, Sequence[Detection]],
    alpha: float,
    *,
    class_ids: Iterable[int] | None = None,
    partial_only: bool = False,
) -> list[MatchedPair]:
    """Match every image present in both datasets, in sorted image-id order.

    ``partial_only`` drops pairs whose prediction already covers the ground
    truth (factor exactly 1).
    """
    keep = None if class_ids is None else set(class_ids)
    pairs = []
    for image_id in sorted(set(gt_set) & set(pred_set)):
        preds = pred_set[image_id]
        gts = gt_set[image_id]
        if keep is not None:
            preds = [d for d in preds if d.class_id in keep]
            gts = [d for d in gts if d.class_id in keep]
        pairs.extend(match(preds, gts, alpha, image_id))
    if partial_only:
        pairs = [p for p in pairs if p.k_measured > 1.0]
    return pairs


def unpaired_images(
    gt_set: Mapping[str, object], pred_set: Mapping[str, object]
) -> list[str]:
    warnings = [f"{i}: ground truth only" for i in sorted(set(gt_set) - set(pred_set))]
    warnings += [f"{i}: predictions only" for i in sorted(set(pred_set) - set(gt_set))]
    return warnings


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    k_math: float
    stats: EnlargementStats | None

    @property
    def no_data(self) -> bool:
        return self.stats is None

    @property
    def count(self) -> int:
        return 0 if self.stats is None else self.stats.count


@dataclass(frozen=True)
class SweepTable:
    rows: list[SweepRow]
    warnings: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in self.rows:
            cells = [f"{row.alpha:.3f}", f"{row.k_math:.3f}", str(row.count)]
            if row.stats is None:
                cells += [""] * 5
            else:
                s = row.stats
                cells += [
                    f"{v:.3f}"
                    for v in (s.k_max_data, s.k_mu_data, s.sigma_data, s.mu_plus_3sigma, s.mu_plus_6sigma)
                ]
            writer.writerow(cells)
        return buf.getvalue()

    def to_dict(self) -> dict:
        rows = []
        for row in self.rows:
            entry = {"alpha": row.alpha, "k_math": row.k_math, "count": row.count, "no_data": row.no_data}
            if row.stats is not None:
                stats = asdict(row.stats)
                del stats["alpha"], stats["count"]
                entry.update(stats)
            rows.append(entry)
        return {"rows": rows, "warnings": list(self.warnings)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def read_sweep_csv(text: str) -> list[dict[str, float | int | None]]:
    """Parse CSV written by :meth:`SweepTable.to_csv`; empty cells become None."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
        raise ValueError(f"unexpected sweep header: {reader.fieldnames}")
    rows = []
    for raw in reader:
        row: dict[str, float | int | None] = {}
        for key in SWEEP_COLUMNS:
            cell = raw[key]
            if cell == "":
                row[key] = None
            elif key == "count":
                row[key] = int(cell)
            else:
                row[key] = float(cell)
        rows.append(row)
    return rows


def sweep(
    gt_set: Mapping[str, Sequence[Detection]],
    pred_set: Mapping[str, Sequence[Detection]],
    alphas: Iterable[float],
    *,
    class_ids: Iterable[int] | None = None,
    partial_only: bool = False,
) -> SweepTable:
    """Re-match, measure and aggregate at each threshold.

    A threshold that yields no pairs produces a row with ``stats=None``
    rather than an error.
    """
    class_ids = None if class_ids is None else sorted(set(class_ids))
    rows = []
    for alpha in alphas:
        alpha = check_alpha(alpha)
        pairs = collect_pairs(gt_set, pred_set, alpha, class_ids=class_ids, partial_only=partial_only)
        ks = measure(pairs)
        stats = aggregate(ks, alpha) if ks else None
        rows.append(SweepRow(alpha, k_math(alpha), stats))
    return SweepTable(rows, unpaired_images(gt_set, pred_set))


def histogram(ks: Sequence[float], bin_width: float) -> list[tuple[float, int]]:
    """Counts of factors in contiguous bins ``[1 + i*w, 1 + (i+1)*w)``.

    Bins run from 1 up to the one holding the largest value; empty bins in
    between are kept so the output plots directly.
    """
    if not ks:
        raise InsufficientDataError("histogram of an empty list")
    if not math.isfinite(bin_width) or bin_width <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    counts: dict[int, int] = {}
    for v in ks:
        if not math.isfinite(v) or v < 1 - HIST_EPS:
            raise ValueError(f"enlargement factors must be >= 1, got {v}")
        # the epsilon keeps values on a bin edge (e.g. 1.2 at width 0.1) in the upper bin
        idx = max(0, math.floor((v - 1) / bin_width + HIST_EPS))
        counts[idx] = counts.get(idx, 0) + 1
    return [(round(1 + i * bin_width, 12), counts.get(i, 0)) for i in range(max(counts) + 1)]


def histogram_csv(bins: Sequence[tuple[float, int]]) -> str:
    lines = ["bin_lower,count"] + [f"{lower:.10g},{count}" for lower, count in bins]
    return "\n".join(lines) + "\n"


def apply_spp(
    detections: Mapping[str, Sequence[Detection]], k: float, clip: bool = False
) -> dict[str, list[Detection]]:
    """Enlarge every box by ``k`` about its center.

    With ``clip`` the enlarged box is cut to the unit image square and
    ``clipped`` is set on boxes that changed; those may no longer cover
    their object at the image border.
    """
    if not math.isfinite(k) or k < 1:
        raise InvalidFactorError(f"enlargement factor must be a finite value >= 1, got {k}")
    out: dict[str, list[Detection]] = {}
    for image_id, dets in detections.items():
        enlarged = []
        for det in dets:
            box = expand(det.box, k)
            clipped = False
            if clip and not contains(UNIT_IMAGE, box, tol=0.0):
                cut = intersect(box, UNIT_IMAGE)
                if cut is None:
                    raise ValueError(f"{image_id}: box {det.box} lies outside the image")
                box, clipped = cut, True
            enlarged.append(Detection(det.class_id, box, det.confidence, clipped))
        out[image_id] = enlarged
    return out

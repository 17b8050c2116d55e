"""Reading and writing YOLO-style per-image annotation files.

One ``<image_id>.txt`` per image, one box per line, normalized to the unit
image square::

    class cx cy w h            # ground truth
    class cx cy w h conf       # prediction

Lines starting with ``#`` and blank lines are skipped. Directories are
walked recursively; the image id is the file's path relative to the root,
without the ``.txt`` suffix (just the stem for a flat directory).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .geometry import GeometryError, Rect

EXTENT_TOL = 1e-6


class Kind(str, Enum):
    GROUND_TRUTH = "ground_truth"
    PREDICTION = "prediction"


class AnnotationError(ValueError):
    """A malformed annotation line; the message names the file and line."""

    def __init__(self, path: Path | str, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass(frozen=True, slots=True)
class Detection:
    class_id: int
    box: Rect
    confidence: float | None = None
    # set by apply_spp when clipping altered the enlarged box
    clipped: bool = False


def _parse_number(token: str, what: str, path: Path, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise AnnotationError(path, lineno, f"{what} is not a number: {token!r}") from None
    if not math.isfinite(value):
        raise AnnotationError(path, lineno, f"{what} is not finite: {token!r}")
    return value


def parse_line(
    line: str, kind: Kind, path: Path, lineno: int, *, check_bounds: bool = True
) -> Detection | None:
    """Parse one line; returns None for blank and comment lines.

    With ``check_bounds=False`` boxes may leave the image (enlarged output),
    and prediction lines may carry the trailing 0/1 ``clipped`` column.
    """
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    fields = text.split()
    kind = Kind(kind)
    expected = 5 if kind is Kind.GROUND_TRUTH else 6
    allowed = {expected}
    if not check_bounds and kind is Kind.PREDICTION:
        allowed.add(7)
    if len(fields) not in allowed:
        if kind is Kind.PREDICTION and len(fields) == 5:
            raise AnnotationError(path, lineno, "prediction line is missing its confidence")
        raise AnnotationError(
            path, lineno, f"expected {expected} fields for {kind.value}, got {len(fields)}"
        )

    try:
        class_id = int(fields[0])
    except ValueError:
        raise AnnotationError(path, lineno, f"class id is not an integer: {fields[0]!r}") from None
    if class_id < 0:
        raise AnnotationError(path, lineno, f"class id must be non-negative, got {class_id}")

    cx, cy, w, h = (
        _parse_number(tok, name, path, lineno)
        for tok, name in zip(fields[1:5], ("cx", "cy", "w", "h"))
    )
    if w <= 0 or h <= 0:
        raise AnnotationError(path, lineno, f"box size must be positive, got w={w} h={h}")
    if check_bounds:
        if not (0 <= cx <= 1 and 0 <= cy <= 1):
            raise AnnotationError(path, lineno, f"box center ({cx}, {cy}) outside [0, 1]")
        if w > 1 + 2 * EXTENT_TOL or h > 1 + 2 * EXTENT_TOL:
            raise AnnotationError(path, lineno, f"box size ({w}, {h}) exceeds the image")

    confidence = None
    if kind is Kind.PREDICTION:
        confidence = _parse_number(fields[5], "confidence", path, lineno)
        if not 0 <= confidence <= 1:
            raise AnnotationError(path, lineno, f"confidence {confidence} outside [0, 1]")
    clipped = False
    if len(fields) == 7:
        if fields[6] not in ("0", "1"):
            raise AnnotationError(path, lineno, f"clipped flag must be 0 or 1, got {fields[6]!r}")
        clipped = fields[6] == "1"

    try:
        box = Rect.from_center_size(cx, cy, w, h)
    except GeometryError as exc:
        raise AnnotationError(path, lineno, str(exc)) from None
    return Detection(class_id, box, confidence, clipped)


def parse_file(
    path: Path | str, kind: Kind | str, *, check_bounds: bool = True
) -> list[Detection]:
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            det = parse_line(line, Kind(kind), path, lineno, check_bounds=check_bounds)
            if det is not None:
                out.append(det)
    return out


def parse_annotations(
    root: Path | str,
    kind: Kind | str,
    *,
    min_conf: float | None = None,
    check_bounds: bool = True,
) -> dict[str, list[Detection]]:
    """Load every ``*.txt`` under ``root`` into a map of image id to detections.

    ``min_conf`` drops predictions below that confidence; it has no effect
    on ground truth.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"annotation directory not found: {root}")
    kind = Kind(kind)
    dataset = {}
    for path in sorted(root.rglob("*.txt")):
        if not path.is_file():
            continue
        image_id = path.relative_to(root).with_suffix("").as_posix()
        dets = parse_file(path, kind, check_bounds=check_bounds)
        if min_conf is not None and kind is Kind.PREDICTION:
            dets = [d for d in dets if d.confidence is not None and d.confidence >= min_conf]
        dataset[image_id] = dets
    return dataset


def format_detection(det: Detection, with_clipped: bool = False) -> str:
    b = det.box
    # repr is the shortest string that reads back to the same double
    fields = [str(det.class_id)] + [repr(float(v)) for v in (b.center_x, b.center_y, b.width, b.height)]
    if det.confidence is not None:
        fields.append(repr(float(det.confidence)))
    if with_clipped:
        fields.append("1" if det.clipped else "0")
    return " ".join(fields)


def write_annotations(
    dataset: dict[str, list[Detection]], root: Path | str, *, with_clipped: bool = False
) -> list[Path]:
    """Write a dataset back out as a directory tree mirroring the image ids."""
    root = Path(root)
    written = []
    for image_id in sorted(dataset):
        path = root / f"{image_id}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [format_detection(d, with_clipped) for d in dataset[image_id]]
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        written.append(path)
    return written

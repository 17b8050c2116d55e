import pytest

from boxsafe.annotations import Kind, parse_annotations

from .oracles import make_dataset, write_dataset


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """100 perturbed prediction boxes over 50 images, on disk and as raw tuples."""
    root = tmp_path_factory.mktemp("small")
    gt_rows, pred_rows = make_dataset(seed=11, n_images=50)
    gt_dir = write_dataset(root / "gt", gt_rows)
    pred_dir = write_dataset(root / "pred", pred_rows)
    return {
        "gt_rows": gt_rows,
        "pred_rows": pred_rows,
        "gt_dir": gt_dir,
        "pred_dir": pred_dir,
        "gt": parse_annotations(gt_dir, Kind.GROUND_TRUTH),
        "pred": parse_annotations(pred_dir, Kind.PREDICTION),
    }


@pytest.fixture(scope="session")
def large_dataset(tmp_path_factory):
    """500 images of perturbed boxes."""
    root = tmp_path_factory.mktemp("large")
    gt_rows, pred_rows = make_dataset(seed=2024, n_images=500)
    gt_dir = write_dataset(root / "gt", gt_rows)
    pred_dir = write_dataset(root / "pred", pred_rows)
    return {
        "gt_rows": gt_rows,
        "pred_rows": pred_rows,
        "gt_dir": gt_dir,
        "pred_dir": pred_dir,
        "gt": parse_annotations(gt_dir, Kind.GROUND_TRUTH),
        "pred": parse_annotations(pred_dir, Kind.PREDICTION),
    }

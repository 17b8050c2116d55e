import json
import subprocess
import sys

import pytest

from boxsafe import verifier
from boxsafe.annotations import Kind, parse_annotations
from boxsafe.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, run
from boxsafe.geometry import contains, intersect
from boxsafe.pipeline import UNIT_IMAGE


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_kmath_table(capsys):
    code, out, _ = invoke(capsys, "kmath", "--alpha", "0.1:0.9:0.1")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "alpha,k_math"
    assert [l.split(",")[1] for l in lines[1:]] == [
        "19.000", "9.000", "5.667", "4.000", "3.000", "2.333", "1.857", "1.500", "1.222"
    ]


def test_kmath_list_and_json(capsys):
    code, out, _ = invoke(capsys, "kmath", "--alpha", "0.5,1", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out) == [{"alpha": 0.5, "k_math": 3.0}, {"alpha": 1.0, "k_math": 1.0}]


def test_iou_for_k(capsys):
    assert invoke(capsys, "iou-for-k", "--k", "1.5")[1] == "k,iou\n1.500,0.800\n"


def test_residual_worked_example(capsys):
    code, out, _ = invoke(
        capsys, "residual", "--alpha", "0.5", "--buffer-m", "0.5", "--length-m", "7", "--width-m", "2.5"
    )
    assert code == EXIT_OK
    header, row = out.splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert rec["w_max_m"] == "7.433"
    assert rec["k_res"] == "2.865"


def test_residual_with_measured_factor(capsys):
    code, out, _ = invoke(
        capsys, "residual", "--k-target", "2.0", "--buffer-m", "0", "--length-m", "4", "--width-m", "0",
        "--format", "json",
    )
    rec = json.loads(out)
    assert code == EXIT_OK
    assert rec["alpha"] is None and rec["k_res"] == 2.0


def test_residual_needs_exactly_one_target(capsys):
    base = ["residual", "--buffer-m", "0", "--length-m", "4", "--width-m", "1"]
    assert invoke(capsys, *base)[0] == EXIT_USAGE
    assert invoke(capsys, *base, "--alpha", "0.5", "--k-target", "2")[0] == EXIT_USAGE


def test_buffer_curve(capsys):
    code, out, _ = invoke(
        capsys, "buffer-curve", "--alphas", "0.5,0.9", "--length-m", "7", "--width-m", "2.5",
        "--x-max", "10", "--steps", "4",
    )
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "alpha,k_math,buffer_m,k_res"
    assert len(lines) == 1 + 2 * 5
    assert lines[1] == "0.500,3.000,0.000,3.000"
    assert lines[-1] == "0.900,1.222,10.000,1.000"


@pytest.mark.parametrize(
    "argv",
    [
        ["kmath", "--alpha", "0"],
        ["kmath", "--alpha", "1.2"],
        ["kmath", "--alpha", "nan"],
        ["kmath", "--alpha", "0.9:0.1:0.1"],
        ["iou-for-k", "--k", "0.5"],
        ["verify", "--alpha", "0.5", "--samples", "0", "--seed", "1"],
        ["verify", "--alpha", "0.5", "--samples", "3", "--seed", "1", "--shards", "4"],
        ["verify", "--alpha", "0.5", "--samples", "3", "--seed", "-4"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors_exit_one(capsys, argv):
    assert invoke(capsys, *argv)[0] == EXIT_USAGE


def test_verify_passes(capsys):
    code, out, _ = invoke(capsys, "verify", "--alpha", "0.9", "--samples", "1000", "--seed", "7")
    assert code == EXIT_OK
    assert out.splitlines()[1] == "0.900,1000,7,1.222,1.202,0,1.222,1"


def test_verify_is_deterministic(capsys):
    argv = ["verify", "--alpha", "0.3,0.6", "--samples", "2000", "--seed", "5", "--shards", "2", "--format", "json"]
    first = invoke(capsys, *argv)[1]
    assert invoke(capsys, *argv)[1] == first
    assert all(r["violations"] == 0 for r in json.loads(first))


def test_verify_violation_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(verifier, "k_math", lambda alpha: 1.0)
    code, out, _ = invoke(capsys, "verify", "--alpha", "0.5", "--samples", "200", "--seed", "1")
    assert code == EXIT_VIOLATION
    assert out.splitlines()[1].endswith(",0")


def data_args(ds):
    return ["--gt", str(ds["gt_dir"]), "--pred", str(ds["pred_dir"])]


def test_measure(capsys, small_dataset):
    code, out, _ = invoke(capsys, "measure", *data_args(small_dataset), "--alphas", "0.1:0.9:0.1")
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "alpha,k_math,count,k_max_data,k_mu_data,sigma_data,mu_plus_3sigma,mu_plus_6sigma"
    assert len(lines) == 10
    for line in lines[1:]:
        cells = line.split(",")
        if cells[3]:
            assert float(cells[3]) <= float(cells[1])


def test_measure_options(capsys, small_dataset):
    full = invoke(capsys, "measure", *data_args(small_dataset), "--alphas", "0.5", "--format", "json")[1]
    part = invoke(
        capsys, "measure", *data_args(small_dataset), "--alphas", "0.5", "--format", "json",
        "--partial-only", "--class-id", "0", "--min-conf", "0.3",
    )[1]
    assert json.loads(part)["rows"][0]["count"] < json.loads(full)["rows"][0]["count"]


def test_measure_warns_on_unpaired_images(capsys, tmp_path):
    (tmp_path / "gt").mkdir()
    (tmp_path / "pred").mkdir()
    (tmp_path / "gt" / "a.txt").write_text("0 0.5 0.5 0.2 0.2\n")
    (tmp_path / "gt" / "b.txt").write_text("0 0.5 0.5 0.2 0.2\n")
    (tmp_path / "pred" / "a.txt").write_text("0 0.5 0.5 0.2 0.2 0.9\n")
    code, out, err = invoke(
        capsys, "measure", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"), "--alphas", "0.5"
    )
    assert code == EXIT_OK
    assert "b: ground truth only" in err
    assert "warning" not in out


def test_missing_directory_exits_two(capsys, tmp_path):
    code, _, err = invoke(capsys, "measure", "--gt", str(tmp_path / "no"), "--pred", str(tmp_path), "--alphas", "0.5")
    assert code == EXIT_IO
    assert "error" in err


def test_parse_error_exits_two(capsys, tmp_path):
    (tmp_path / "gt").mkdir()
    (tmp_path / "pred").mkdir()
    bad = tmp_path / "pred" / "x.txt"
    bad.write_text("0 0.5 0.5 0.2 0.2\n")
    code, _, err = invoke(
        capsys, "measure", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"), "--alphas", "0.5"
    )
    assert code == EXIT_IO
    assert f"{bad}:1:" in err


def test_hist(capsys, small_dataset):
    code, out, _ = invoke(capsys, "hist", *data_args(small_dataset), "--alpha", "0.5", "--bin-width", "0.1")
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "bin_lower,count"
    assert lines[1].startswith("1,")
    n_pairs = json.loads(
        invoke(capsys, "measure", *data_args(small_dataset), "--alphas", "0.5", "--format", "json")[1]
    )["rows"][0]["count"]
    assert sum(int(l.split(",")[1]) for l in lines[1:]) == n_pairs


def test_hist_without_pairs_is_an_error(capsys, tmp_path):
    (tmp_path / "gt").mkdir()
    (tmp_path / "pred").mkdir()
    code = invoke(
        capsys, "hist", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"),
        "--alpha", "0.5", "--bin-width", "0.1",
    )[0]
    assert code == EXIT_USAGE


def test_apply_mirrors_tree(capsys, tmp_path, small_dataset):
    out_dir = tmp_path / "enlarged"
    code, out, _ = invoke(
        capsys, "apply", "--pred", str(small_dataset["pred_dir"]), "--k", "2", "--clip", "--out", str(out_dir)
    )
    assert code == EXIT_OK
    src = sorted(p.relative_to(small_dataset["pred_dir"]) for p in small_dataset["pred_dir"].rglob("*.txt"))
    assert sorted(p.relative_to(out_dir) for p in out_dir.rglob("*.txt")) == src
    enlarged = parse_annotations(out_dir, Kind.PREDICTION, check_bounds=False)
    for image_id, dets in small_dataset["pred"].items():
        for before, after in zip(dets, enlarged[image_id]):
            # clipping only removes what lay outside the image
            assert contains(after.box, intersect(before.box, UNIT_IMAGE))
    header, row = out.splitlines()
    assert header == "images,boxes,clipped,k,out"
    assert int(row.split(",")[1]) == sum(len(v) for v in small_dataset["pred"].values())


def test_apply_without_clip_keeps_oversized_boxes(capsys, tmp_path, small_dataset):
    out_dir = tmp_path / "big"
    assert invoke(capsys, "apply", "--pred", str(small_dataset["pred_dir"]), "--k", "5", "--out", str(out_dir))[0] == 0
    grown = parse_annotations(out_dir, Kind.PREDICTION, check_bounds=False)
    assert sum(len(v) for v in grown.values()) == sum(len(v) for v in small_dataset["pred"].values())


def test_output_file(capsys, tmp_path):
    target = tmp_path / "k.csv"
    code, out, _ = invoke(capsys, "kmath", "--alpha", "0.5", "--output", str(target))
    assert code == EXIT_OK and out == ""
    assert target.read_text() == "alpha,k_math\n0.500,3.000\n"


def test_unwritable_output_exits_two(capsys, tmp_path):
    assert invoke(capsys, "kmath", "--alpha", "0.5", "--output", str(tmp_path / "no" / "x.csv"))[0] == EXIT_IO


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "boxsafe", "iou-for-k", "--k", "3"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stdout == "k,iou\n3.000,0.500\n"

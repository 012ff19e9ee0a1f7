import json

import pytest

from helix import CkksParams
from helix.cli import main, rows_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json", "--repeats", "1")
    return code, json.loads(out)


def test_matvec_bsgs_example(capsys):
    code, doc = run_json(capsys, "matvec", "--method", "bsgs", "--rows", "16", "--cols", "16", "--backend", "reference")
    (row,) = doc["rows"]
    assert code == 0 and row["correct"] and row["rotations"] == 6 and row["levels"] == 1
    assert doc["config"]["options"]["method"] == "bsgs"


def test_matvec_row_levels(capsys):
    code, doc = run_json(capsys, "matvec", "--method", "row", "--rows", "4", "--cols", "4")
    assert code == 0 and doc["rows"][0]["levels"] == 2


def test_matvec_all_methods_lattice(capsys):
    code, doc = run_json(capsys, "matvec", "--backend", "lattice", "--rows", "8", "--cols", "8")
    assert code == 0
    assert [r["method"] for r in doc["rows"]] == ["row", "diag", "bsgs"]
    assert all(r["max_abs_err"] < 1e-2 for r in doc["rows"])


def test_unknown_method_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["matvec", "--method", "cubic"])
    assert exc.value.code == 2


def test_bad_dims(capsys):
    code, _, err = run(capsys, "matvec", "--rows", "0")
    assert code == 2 and "positive" in err


def test_matmul_sweep(capsys):
    code, doc = run_json(capsys, "matmul", "--dims", "2,4", "--levels", "2,5")
    assert code == 0
    cells = {(r["d"], r["level"]): r for r in doc["rows"]}
    assert cells[(2, 2)]["rotations"] == 6
    assert cells[(4, 2)]["rotations"] == cells[(4, 5)]["rotations"] == 22
    assert cells[(4, 5)]["modeled_bytes"] > cells[(4, 2)]["modeled_bytes"]
    assert cells[(4, 2)]["modeled_bytes"] > cells[(2, 2)]["modeled_bytes"]


def test_matmul_errors(capsys):
    code, _, err = run(capsys, "matmul", "--dims", "3")
    assert code == 2 and "not a power of two" in err
    code, _, err = run(capsys, "matmul", "--dims", "4", "--levels", "1")
    assert code == 2 and "requires a multiplicative level of 2" in err
    code, _, err = run(capsys, "matmul", "--dims", "64")
    assert code == 2


def test_ffn(capsys):
    code, doc = run_json(capsys, "ffn")
    assert code == 0
    rows = {r["variant"]: r for r in doc["rows"]}
    assert all(r["correct"] for r in rows.values())
    assert rows["merged"]["total_ops"] < rows["no-gelu"]["total_ops"] < rows["with-gelu"]["total_ops"]
    assert rows["merged"]["plan_bootstraps_deg127"] == 0 and rows["with-gelu"]["plan_bootstraps_deg127"] >= 1
    assert rows["merged"]["flop_ratio"] == 8.0 and doc["summary"]["ordering_ok"]


def test_roofline(capsys, tmp_path):
    code, out, _ = run(capsys, "roofline", "--csv", str(tmp_path / "r.csv"), "--svg", str(tmp_path / "r.svg"))
    assert code == 0 and "60/60 rows memory-bound" in out
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 61
    assert (tmp_path / "r.svg").exists()
    code, doc = run_json(capsys, "roofline", "--peak-gops", "1", "--bandwidth-gbs", "1000")
    assert doc["summary"]["ridge_point"] == pytest.approx(0.001)
    assert all(r["bound"] == "compute" for r in doc["rows"])
    code, _, err = run(capsys, "roofline", "--peak-gops", "-1")
    assert code == 2


def test_roofline_profile_file(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"peak_gops": 1, "bandwidth_gbs": 1000}')
    code, doc = run_json(capsys, "roofline", "--profile", str(path), "--levels", "1-3")
    assert code == 0 and len(doc["rows"]) == 9


@pytest.mark.parametrize(
    "argv",
    [
        ["matvec", "--rows", "12", "--cols", "20"],
        ["matmul", "--dims", "2,4,8"],
        ["ffn", "--d-h", "8"],
        ["roofline"],
    ],
)
def test_csv_byte_identical(capsys, tmp_path, argv):
    for name in ("a", "b"):
        assert main(argv + ["--seed", "5", "--repeats", "1", "--csv", str(tmp_path / f"{name}.csv")]) == 0
    capsys.readouterr()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "wall_s" not in (tmp_path / "a.csv").read_text()


def test_params_file_and_env(capsys, tmp_path, monkeypatch):
    path = tmp_path / "p.json"
    CkksParams.generate(ring_degree=256, max_level=4).save(path)
    code, doc = run_json(capsys, "matvec", "--method", "bsgs", "--params", str(path))
    assert code == 0
    monkeypatch.setenv("HELIX_PARAMS", str(path))
    code, doc = run_json(capsys, "matmul", "--dims", "8")
    assert code == 0
    code, _, err = run(capsys, "matmul", "--dims", "16")
    assert code == 2 and "128 available" in err
    code, _, err = run(capsys, "matvec", "--params", str(tmp_path / "missing.json"))
    assert code == 2


def test_parallel_keeps_order(capsys, tmp_path):
    main(["matvec", "--repeats", "1", "--csv", str(tmp_path / "s.csv")])
    main(["matvec", "--repeats", "1", "--parallel", "3", "--csv", str(tmp_path / "p.csv")])
    capsys.readouterr()
    assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "p.csv").read_bytes()


def test_svg_output(capsys, tmp_path):
    assert main(["matmul", "--dims", "2,4", "--repeats", "1", "--svg", str(tmp_path / "m.svg")]) == 0
    capsys.readouterr()
    assert "<svg" in (tmp_path / "m.svg").read_text()


def test_preset_with_lattice_rejected(capsys):
    code, _, err = run(capsys, "matvec", "--preset", "gpt2", "--backend", "lattice")
    assert code == 2


def test_rows_csv_drops_wall_time():
    text = rows_csv([{"a": 1, "wall_s": 0.5, "ok": True, "x": 0.25}])
    assert text == "a,ok,x\n1,true,0.25\n"

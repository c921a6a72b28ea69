"""End-to-end CLI runs on tiny inputs; exit codes are part of the contract."""

import csv
import json

import numpy as np
import pytest
import yaml

from gridflow import resnet
from gridflow.case_io import format_case, load_case, parse_case
from gridflow.cli import main
from gridflow.config import load_config
from gridflow.ppf.report import validate_report

from _cases import case_text

TWO_BUS = case_text([(1, 3, 0, 0), (2, 1, 50, 10)], [(1, 0, 1.0)], [(1, 2, 0.01, 0.1, 0.0)])


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _yaml(path, d):
    path.write_text(yaml.safe_dump(d))
    return str(path)


@pytest.fixture(scope="module")
def data30(tmp_path_factory):
    out = tmp_path_factory.mktemp("data30")
    assert main(["gen-data", "--config", "ieee30_gauss", "--n", "60", "--out", str(out)]) == 0
    return out


def test_solve_two_bus(tmp_path, capsys):
    case = tmp_path / "two.m"
    case.write_text(TWO_BUS)
    assert main(["solve", "--case", str(case), "--out", str(tmp_path)]) == 0
    sol = _rows(tmp_path / "solution.csv")
    assert [r["bus"] for r in sol] == ["1", "2"]
    assert float(sol[1]["P"]) == pytest.approx(-0.5, abs=1e-8)
    assert float(sol[1]["Q"]) == pytest.approx(-0.1, abs=1e-8)
    assert float(sol[1]["Vm"]) < 1.0
    flows = _rows(tmp_path / "flows.csv")
    assert len(flows) == 1
    # slack supplies load plus series loss
    assert float(flows[0]["P_from"]) > 0.5
    assert "converged" in capsys.readouterr().err


def test_solve_ieee30_reports_small_mismatch(tmp_path, capsys):
    assert main(["solve", "--case", "case30", "--out", str(tmp_path)]) == 0
    err = capsys.readouterr().err
    mis = float(err.split("max mismatch ")[1].split()[0])
    assert mis < 1e-8
    assert len(_rows(tmp_path / "solution.csv")) == 30


def test_corrupt_case_exits_1(tmp_path, capsys):
    bad = TWO_BUS.replace("2 1 50 10", "2 1 fifty 10")
    (tmp_path / "bad.m").write_text(bad)
    assert main(["solve", "--case", str(tmp_path / "bad.m"), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "MalformedRow" in err
    assert err.count("\n") == 1


def test_missing_case_exits_1(tmp_path):
    assert main(["solve", "--case", str(tmp_path / "nope.m"), "--out", str(tmp_path)]) == 1


def test_overloaded_case_exits_2(tmp_path, capsys):
    # 20 p.u. across x = 0.1 exceeds the maximum transfer of 10 p.u.
    (tmp_path / "heavy.m").write_text(
        case_text([(1, 3, 0, 0), (2, 1, 2000, 0)], [(1, 0, 1.0)], [(1, 2, 0.0, 0.1, 0.0)]))
    assert main(["solve", "--case", str(tmp_path / "heavy.m"), "--out", str(tmp_path)]) == 2
    assert "Diverged" in capsys.readouterr().err


def test_emit_case_round_trip(tmp_path):
    out = tmp_path / "c30.m"
    assert main(["emit-case", "--case", "case30", "--out", str(out)]) == 0
    net = load_case("case30")
    again = parse_case(out.read_text())
    assert again.buses == net.buses and again.branches == net.branches
    assert np.array_equal(again.Y, net.Y)
    assert out.read_text() == format_case(net)


def test_gen_data_smoke_and_replay(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["gen-data", "--config", "ieee30_gauss", "--n", "10", "--out", str(d)]) == 0
    assert "dropped 0 of 10" in capsys.readouterr().err
    assert (a / "X.csv").read_bytes() == (b / "X.csv").read_bytes()
    assert (a / "Y.csv").read_bytes() == (b / "Y.csv").read_bytes()
    meta = json.loads((a / "meta.json").read_text())
    assert meta["splits"] == {"train": 6, "val": 2, "test": 2}
    assert meta["spec_hash"] == load_config("ieee30_gauss").scenario_spec(10).digest()


def test_gen_data_seed_changes_samples(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["gen-data", "--config", "ieee30_gauss", "--n", "10", "--out", str(a)])
    main(["gen-data", "--config", "ieee30_gauss", "--n", "10", "--seed", "7", "--out", str(b)])
    assert (a / "X.csv").read_bytes() != (b / "X.csv").read_bytes()


def test_gen_data_divergence_exits_3(tmp_path, capsys):
    cfg = _yaml(tmp_path / "wild.yaml", {
        "case": "case30",
        "scenario": {"gaussian": [{"quantity": "load", "buses": "loads", "ratio": 4.0}]},
    })
    assert main(["gen-data", "--config", cfg, "--n", "50", "--out", str(tmp_path / "d")]) == 3
    assert "TooManyDivergences" in capsys.readouterr().err


def test_unknown_config_key_exits_1(tmp_path, capsys):
    cfg = _yaml(tmp_path / "typo.yaml", {"case": "case30", "trian": {"max_epochs": 3}})
    assert main(["gen-data", "--config", cfg, "--n", "10", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "ConfigError" in err and "trian" in err


def test_train_writes_checkpoint_and_trace(tmp_path, data30, net30):
    out = tmp_path / "m"
    rc = main(["train", "--config", "ieee30_gauss", "--data", str(data30), "--epochs", "3",
               "--out", str(out)])
    assert rc == 0
    trace = _rows(out / "trace.csv")
    assert [r["epoch"] for r in trace] == ["1", "2", "3"]
    assert set(trace[0]) == {"epoch", "train_mse", "val_mse", "seconds"}
    model = resnet.load_checkpoint(out / "model.ckpt")
    assert model.spec.layer_sizes[0] == net30.dim
    extra = resnet.checkpoint_extra(out / "model.ckpt")
    assert extra["scheme"] == "lpf"
    assert extra["dataset_spec_hash"] == json.loads((data30 / "meta.json").read_text())["spec_hash"]


def _linear_dataset(path, n=64, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2)) * 0.1
    A = np.array([[0.3, -0.1], [0.05, 0.2]])
    Y = X @ A.T + np.array([0.01, 1.0])
    path.mkdir()
    for name, M in (("X.csv", X), ("Y.csv", Y)):
        path.joinpath(name).write_text(
            "a,b\n" + "".join(",".join(repr(float(v)) for v in r) + "\n" for r in M))
    path.joinpath("meta.json").write_text(json.dumps(
        {"splits": {"train": n // 2, "val": n // 4, "test": n - n // 2 - n // 4}}))
    return X, Y


def test_train_linear_data_near_zero_first_epoch(tmp_path):
    (tmp_path / "two.m").write_text(TWO_BUS)
    _linear_dataset(tmp_path / "lin")
    cfg = _yaml(tmp_path / "lin.yaml", {
        "case": "two.m", "net": {"hidden": [8]},
        "init": {"scheme": "data", "zero_last": True, "ridge_lambda": 0.0},
    })
    out = tmp_path / "m"
    assert main(["train", "--config", cfg, "--data", str(tmp_path / "lin"), "--epochs", "2",
                 "--out", str(out)]) == 0
    assert float(_rows(out / "trace.csv")[0]["train_mse"]) < 1e-10


def test_train_nan_target_exits_4(tmp_path, capsys):
    (tmp_path / "two.m").write_text(TWO_BUS)
    _linear_dataset(tmp_path / "lin")
    y = (tmp_path / "lin" / "Y.csv").read_text().splitlines()
    y[3] = "nan," + y[3].split(",")[1]
    (tmp_path / "lin" / "Y.csv").write_text("\n".join(y) + "\n")
    cfg = _yaml(tmp_path / "lin.yaml", {"case": "two.m", "net": {"hidden": [8]},
                                         "init": {"scheme": "random"}})
    rc = main(["train", "--config", cfg, "--data", str(tmp_path / "lin"), "--epochs", "2",
               "--out", str(tmp_path / "m")])
    assert rc == 4
    err = capsys.readouterr().err
    assert "NonFiniteLoss" in err and "epoch 1" in err


def test_ppf_compare_nr_writes_valid_report(tmp_path, data30):
    out = tmp_path / "ppf"
    rc = main(["ppf", "--config", "ieee30_gauss", "--affine", "lpf", "--data", str(data30),
               "--compare", "nr", "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    validate_report(rep)
    assert rep["reference"] == "nr" and rep["solver"] == "affine:linearized_pf"
    assert rep["accuracy"]["armse_vm"] < 1e-2
    timing = json.loads((out / "timing.json").read_text())
    assert timing["acceleration_ratio"] > 0
    for info in rep["kde"].values():
        assert (out / info["file"]).exists()
        assert info["integral"] == pytest.approx(1.0, abs=1e-3)


def test_ppf_missing_checkpoint_exits_1(tmp_path, capsys):
    rc = main(["ppf", "--config", "ieee30_gauss", "--model", str(tmp_path / "none.ckpt"),
               "--out", str(tmp_path)])
    assert rc == 1
    assert "checkpoint not found" in capsys.readouterr().err


def test_ppf_with_trained_checkpoint(tmp_path, data30):
    m = tmp_path / "m"
    main(["train", "--config", "ieee30_gauss", "--data", str(data30), "--epochs", "1",
          "--out", str(m)])
    out = tmp_path / "ppf"
    assert main(["ppf", "--config", "ieee30_gauss", "--model", str(m / "model.ckpt"),
                 "--data", str(data30), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["solver"] == "resnet:linearized_pf" and rep["reference"] is None


def test_risk_writes_json_and_csv(tmp_path, data30):
    out = tmp_path / "risk"
    assert main(["risk", "--config", "ieee30_gauss", "--affine", "jac", "--data", str(data30),
                 "--compare", "nr", "--out", str(out)]) == 0
    d = json.loads((out / "risk.json").read_text())
    rows = _rows(out / "risk.csv")
    assert len(rows) == len(d["risk"]) > 0
    assert {r["quantity"] for r in rows} == {r["quantity"] for r in d["risk"]}
    assert d["risk_deltas"]["max_abs_probability_delta"] <= 1.0


def test_bad_flag_value_is_input_error(capsys):
    # argparse would exit 2, which is reserved for divergence
    assert main(["train", "--data", "x", "--scheme", "magic"]) == 1
    assert "invalid choice" in capsys.readouterr().err

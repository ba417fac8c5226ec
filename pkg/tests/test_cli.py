import json
from pathlib import Path

import numpy as np
import pytest

from pinnbarrier.artifacts import load_dataset, read_csv
from pinnbarrier.cli import main
from pinnbarrier.pareto import pareto_front
from pinnbarrier.scenarios import build_scenario

TINY = {"schema_version": 1, "schedule": {"warmup_epochs": 2, "adamw_epochs": 3, "lbfgs_epochs": 4,
                                           "record_stride": 2}, "alphas": [0.2, 0.8]}


def _write_config(tmp_path, **extra):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({**TINY, **extra}))
    return str(p)


def _data_files(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for sub in ("datasets", "fd", "summary")
            for p in sorted((root / sub).rglob("*")) if p.is_file()}


def _config_without_out(root: Path) -> dict:
    cfg = json.loads((root / "config.json").read_text())
    cfg.pop("out")
    return cfg


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    root = tmp_path_factory.mktemp("gen")
    assert main(["generate-data", "--out", str(root / "a"), "--tag", "C1"]) == 0
    assert main(["generate-data", "--out", str(root / "a"), "--tag", "analytical"]) == 0
    return root / "a"


def test_generate_data_outputs(generated):
    _, rows = read_csv(generated / "summary/standard/table1.csv", "table1")
    assert rows[0][0] == "Analytical" and float(rows[0][1]) == 0.0
    _, rows = read_csv(generated / "fd/standard/C1/nu_0.01.csv", "fd-solution")
    assert len(rows) == 81
    for p in generated.rglob("*.csv"):
        assert p.read_text().startswith("# schema: ")
    assert (generated / "config.json").exists()


def test_table_summaries(tmp_path):
    assert main(["generate-data", "--out", str(tmp_path), "--tag", "C1"]) == 0
    _, rows = read_csv(tmp_path / "summary/standard/table1.csv", "table1")
    assert rows[0][0] == "C1" and float(rows[0][1]) == pytest.approx(8.4e-2, rel=0.05)
    _, rows = read_csv(tmp_path / "summary/standard/table3_reference.csv", "table3-reference")
    assert float(rows[0][2]) == pytest.approx(2.81e-1, rel=0.05)


def test_generate_data_is_byte_identical(tmp_path, generated):
    assert main(["generate-data", "--out", str(tmp_path), "--tag", "C1"]) == 0
    assert main(["generate-data", "--out", str(tmp_path), "--tag", "analytical"]) == 0
    assert _data_files(tmp_path) == _data_files(generated)
    assert _config_without_out(tmp_path) == _config_without_out(generated)


def test_dataset_reload_is_exact(generated, provider):
    ds = load_dataset(generated, "standard", "C1")
    ref = build_scenario("standard", "C1", provider=provider)
    for name in ("collocation", "train", "test", "bc"):
        a, b = getattr(ds, name), getattr(ref, name)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.nu, b.nu)
        if b.label is not None:
            assert np.array_equal(a.label, b.label)


def test_train_evaluate_pareto(tmp_path, generated):
    cfg = _write_config(tmp_path)
    out = str(generated)
    assert main(["train", "--config", cfg, "--out", out, "--tag", "C1"]) == 0
    run = generated / "runs/standard/C1-lbpinn-seed0"
    first = {n: (run / n).read_bytes() for n in ("trace.csv", "summary.json", "checkpoint.json")}
    assert main(["train", "--config", cfg, "--out", out, "--tag", "C1"]) == 0
    assert first == {n: (run / n).read_bytes() for n in first}
    summary = json.loads(first["summary.json"])
    assert summary["iterations"] == (2 + 3) * 2 + 4
    assert "rmse_vs_analytic" in summary and "wall_time" not in json.dumps(summary)
    assert summary["evaluation"]["numeric_vs_analytic_rmse"]["0.01"] == pytest.approx(2.81e-1, rel=0.05)

    assert main(["evaluate", "--config", cfg, "--out", out, "--tag", "C1"]) == 0
    ev = json.loads((generated / "eval/standard/C1-C1-lbpinn-seed0/eval.json").read_text())
    assert ev["rmse_vs_analytic_at_nodes"]["0.01"] == pytest.approx(summary["rmse_vs_analytic"])
    assert main(["evaluate", "--config", cfg, "--out", out, "--tag", "C1", "--preset", "paper"]) == 2
    assert main(["evaluate", "--config", cfg, "--out", out, "--tag", "C1", "--checkpoint", "nope.json"]) == 3

    assert main(["pareto", "--config", cfg, "--out", out, "--tag", "C1"]) == 0
    d = generated / "pareto/standard/C1-seed0"
    cols, rows = read_csv(d / "trajectories.csv", "pareto")
    assert cols == ["alpha", "iter", "l_pde", "l_d", "is_final"]
    assert sum(1 for r in rows if r[0] == "lbpinn" and r[4] == "1") == 1
    _, front = read_csv(d / "front.csv", "pareto-front")
    P = np.array([[float(r[1]), float(r[2])] for r in front])
    assert len(pareto_front(P)) == len(P)


def test_fixed_weighting_run_name(tmp_path, generated):
    cfg = _write_config(tmp_path)
    assert main(["train", "--config", cfg, "--out", str(generated), "--tag", "analytical",
                 "--weighting", "fixed", "--alpha", "0.25"]) == 0
    assert (generated / "runs/standard/Analytical-fixed-0.25-seed0/trace.csv").exists()


def test_missing_dataset(tmp_path):
    assert main(["train", "--out", str(tmp_path), "--tag", "C2"]) == 3


def test_bad_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema_version": 1, "weighting": "nope"}))
    assert main(["train", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert main(["train", "--config", str(tmp_path / "absent.json")]) == 3


def test_non_convergence_exit(tmp_path):
    cfg = _write_config(tmp_path, fd={"max_iters": 10})
    assert main(["generate-data", "--config", cfg, "--out", str(tmp_path), "--tag", "C1"]) == 5
    flag = json.loads((tmp_path / "summary/standard/generate.json").read_text())
    assert flag["complete"] is False


def test_numeric_fault_exit(tmp_path, generated):
    out = tmp_path / "o"
    assert main(["generate-data", "--out", str(out), "--tag", "analytical"]) == 0
    train_csv = out / "datasets/standard/Analytical/train.csv"
    lines = train_csv.read_text().splitlines()
    parts = lines[2].split(",")
    parts[3] = "nan"
    lines[2] = ",".join(parts)
    train_csv.write_text("\n".join(lines) + "\n")
    assert main(["train", "--config", _write_config(tmp_path), "--out", str(out)]) == 4


def test_corrupt_schema_is_missing_input(tmp_path):
    out = tmp_path / "o"
    assert main(["generate-data", "--out", str(out), "--tag", "analytical"]) == 0
    p = out / "datasets/standard/Analytical/test.csv"
    p.write_text(p.read_text().replace("# schema: dataset/1", "# schema: dataset/9"))
    assert main(["train", "--out", str(out)]) == 3

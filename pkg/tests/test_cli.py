"""Experiment configs, schema validation, output files, determinism, exit codes."""

import json

import numpy as np
import pytest

import crlab.cli as cli
from crlab.cli import EXIT_ERROR, EXIT_INDECISIVE, EXIT_OK, ExperimentConfig, run
from crlab.exceptions import ConfigError


def trivial_problem_json(weights=(1.0, 1.0), shifts=(0, 0), s_max=12.0, n_prime=6.0):
    def end(sign, w, sd):
        return {"sign": sign, "weight": w, "shift_dims": sd,
                "asymptotic": {"dim": 2, "period": 1.0, "coeff": {"kind": "zero"}}}
    return {
        "domain_kind": "cylinder",
        "ends": [end("negative", weights[0], shifts[0]),
                 end("positive", weights[1], shifts[1])],
        "fiber": "complex_line",
        "truncation": {"s_max": s_max, "n_prime": n_prime},
    }


def contact_problem_json(diag_m, diag_p, weights=(0.0, 0.0), s_max=12.0, n_prime=3.0):
    def end(sign, w, vals):
        return {"sign": sign, "weight": w, "shift_dims": 0,
                "asymptotic": {"dim": 2, "coeff": {"kind": "diag", "values": vals}}}
    return {
        "domain_kind": "cylinder",
        "ends": [end("negative", weights[0], diag_m), end("positive", weights[1], diag_p)],
        "fiber": "contact_fiber",
        "truncation": {"s_max": s_max, "n_prime": n_prime},
    }


def test_config_roundtrip():
    cfg = ExperimentConfig(name="x", kind="index",
                           inputs={"problem": trivial_problem_json()},
                           output_dir="out", seed=3)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg


def test_schema_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"name": "x", "kind": "nonsense"})


def test_schema_reports_pointer():
    bad = {"name": "x", "kind": "index",
           "inputs": {"problem": {"domain_kind": "torus", "ends": [], "fiber": "complex_line",
                                  "truncation": {"s_max": 12.0, "n_prime": 6.0}}}}
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json(bad)
    assert "inputs" in err.value.pointer


def test_spectrum_experiment_is_deterministic(tmp_path):
    cfg = ExperimentConfig(
        name="spec0", kind="spectrum",
        inputs={"spec": {"dim": 2, "coeff": {"kind": "zero"}}, "t_resolution": 64},
        output_dir=str(tmp_path))
    assert run(cfg) == EXIT_OK
    p = tmp_path / "spec0" / "spectrum.csv"
    first = p.read_bytes()
    data = json.loads((tmp_path / "spec0" / "spectrum.json").read_text())
    vals = [e["value"] for e in data["eigenvalues"] if abs(e["value"]) < 10]
    assert any(abs(v) < 1e-9 for v in vals)
    assert all(e["multiplicity"] == 2 for e in data["eigenvalues"]
               if abs(e["value"]) < 10 and e["reliable"])
    assert run(cfg) == EXIT_OK
    assert p.read_bytes() == first
    assert b"\r" not in first


def test_index_experiment_exit_codes(tmp_path):
    good = ExperimentConfig(
        name="idx", kind="index",
        inputs={"problem": trivial_problem_json(), "expect_index": -2},
        output_dir=str(tmp_path))
    assert run(good) == EXIT_OK
    text = (tmp_path / "idx" / "index.csv").read_text()
    assert "-2" in text
    bad = ExperimentConfig(
        name="idx_bad", kind="index",
        inputs={"problem": trivial_problem_json(), "expect_index": 5},
        output_dir=str(tmp_path))
    assert run(bad) == EXIT_ERROR


def test_index_experiment_matrix_export(tmp_path):
    cfg = ExperimentConfig(
        name="mx", kind="index",
        inputs={"problem": trivial_problem_json(s_max=6.0, n_prime=3.0),
                "grid": {"s_nodes": 48, "t_nodes": 16}, "export_matrix": True},
        output_dir=str(tmp_path))
    assert run(cfg) == EXIT_OK
    assert (tmp_path / "mx" / "operator.mtx").exists()


def test_indecisive_exit_code(tmp_path, monkeypatch):
    cfg = ExperimentConfig(
        name="ind2", kind="index",
        inputs={"problem": trivial_problem_json()},
        output_dir=str(tmp_path))
    real = cli.numerical_index

    def flagged(op, policy=None):
        rep = real(op)
        rep.decisive = False
        return rep

    monkeypatch.setattr(cli, "numerical_index", flagged)
    assert run(cfg) == EXIT_INDECISIVE


def test_sweep_experiment(tmp_path):
    cfg = ExperimentConfig(
        name="sw", kind="sweep",
        inputs={"problem": trivial_problem_json(weights=(-1.0, 1.0)),
                "deltas": [0.3, 1.0, 2.0, 3.0]},
        output_dir=str(tmp_path))
    assert run(cfg) == EXIT_OK
    lines = (tmp_path / "sw" / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 5
    assert all(line.split(",")[1] == "0" for line in lines[1:])
    jumps = (tmp_path / "sw" / "jumps.csv").read_text().strip().splitlines()
    assert len(jumps) == 4


def test_glue_experiment(tmp_path):
    cfg = ExperimentConfig(
        name="gl", kind="glue",
        inputs={"problem_u": contact_problem_json([-2.0, -2.0], [1.0, 1.0], (1.0, 0.5)),
                "problem_w": contact_problem_json([1.0, 1.0], [3.0, 3.0], (-0.5, 1.5)),
                "taus": [6.0, 8.0]},
        output_dir=str(tmp_path))
    assert run(cfg) == EXIT_OK
    rows = (tmp_path / "gl" / "glue.csv").read_text().strip().splitlines()
    assert rows[0].startswith("tau,ind_u,ind_w,ind_glued")
    assert len(rows) == 3


def test_vdim_experiment(tmp_path):
    from crlab.dimension import broken_glued, broken_pair
    cfg = ExperimentConfig(
        name="vd", kind="vdim",
        inputs={"graphs": [broken_pair(1, 1).to_json(), broken_glued(2).to_json()],
                "pairs": [{"degenerate": 0, "smooth": 1, "expect_codim": 1}],
                "cases": ["one_bubble", "multi_multi_split"], "variants": 10},
        output_dir=str(tmp_path), seed=11)
    assert run(cfg) == EXIT_OK
    assert (tmp_path / "vd" / "dims.csv").exists()
    assert (tmp_path / "vd" / "codims.csv").exists()
    wrong = ExperimentConfig(
        name="vd_bad", kind="vdim",
        inputs={"graphs": [broken_pair(1, 1).to_json(), broken_glued(2).to_json()],
                "pairs": [{"degenerate": 0, "smooth": 1, "expect_codim": 3}]},
        output_dir=str(tmp_path))
    assert run(wrong) == EXIT_ERROR


def test_error_exit_and_summary(tmp_path):
    cfg = ExperimentConfig(
        name="boom", kind="index",
        inputs={"problem": trivial_problem_json(weights=(9.0, 1.0))},
        output_dir=str(tmp_path))
    assert run(cfg) == EXIT_ERROR
    assert "ERROR" in (tmp_path / "boom" / "summary.txt").read_text()


def test_main_entry_with_config_file(tmp_path):
    cfg = {"name": "fromfile", "kind": "index",
           "inputs": {"problem": trivial_problem_json(), "expect_index": -2},
           "output_dir": str(tmp_path)}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["index", "--config", str(path)]) == EXIT_OK
    # grid override via the command line
    assert cli.main(["index", "--config", str(path), "--grid", "96x16"]) == EXIT_OK
    assert cli.main(["index", "--config", str(path), "--grid", "junk"]) == EXIT_ERROR


def test_main_rejects_mismatched_subcommand(tmp_path):
    cfg = {"name": "x", "kind": "index",
           "inputs": {"problem": trivial_problem_json()}, "output_dir": str(tmp_path)}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["sweep-delta", "--config", str(path)]) == EXIT_ERROR


def test_float_formatting_fixed_width():
    assert cli.fmt(np.float64(1.0) / 3.0) == "0.33333333333333331"
    assert cli.fmt(7) == "7"
    assert cli.fmt(True) == "true"

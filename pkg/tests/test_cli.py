import csv
import json
import subprocess
import sys

import pytest

from conftest import CONFIGS
from dispersive_parity.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_REGIME, execute


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def two_mode_circuit(g=0.02, wd=5.33):
    return {
        "modes": [
            {"name": "a", "role": "ancilla", "freq": 5.0, "anharm": -0.3, "levels": 3},
            {"name": "b", "role": "data", "freq": wd, "anharm": -0.2, "levels": 3},
        ],
        "edges": [{"a": "a", "b": "b", "g": g}],
    }


def report(out, name):
    return json.loads((out / f"{name}.json").read_text())


class TestCommands:
    def test_build(self, tmp_path):
        assert execute(["build", "--config", str(CONFIGS / "table1.json"), "--out", str(tmp_path)]) == EXIT_OK
        r = report(tmp_path, "build")
        assert r["dimension"] == 81
        assert r["hermiticity_error"] <= 1e-12
        assert r["seed"] == 0 and "version" in r and r["config"]["circuit"]["modes"]

    def test_shifts_golden(self, tmp_path):
        assert execute(["shifts", "--config", str(CONFIGS / "table1.json"), "--out", str(tmp_path)]) == EXIT_OK
        rows = list(csv.DictReader((tmp_path / "shifts.csv").open()))
        assert len(rows) == 11
        golden = report(tmp_path, "shifts")["golden"]
        assert golden["tolerance_mhz"] == 0.1
        # recorded honestly: the pair rows do not all reach the 0.1 MHz tolerance
        assert golden["pass"] is (golden["max_abs_diff_mhz"] <= 0.1)

    def test_reduce(self, tmp_path):
        assert execute(["reduce", "--config", str(CONFIGS / "unit_cell.json"), "--out", str(tmp_path)]) == EXIT_OK
        r = report(tmp_path, "reduce")
        assert r["validity"]["epsilon_mhz"] <= 1.0
        assert r["effective"]["provenance"]["applied"] == ["edge", "center"]
        assert (tmp_path / "effective_circuit.json").exists()

    def test_lattice(self, tmp_path):
        cfg = CONFIGS / "lattice_assignment.json"
        assert execute(["lattice-check", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
        assert report(tmp_path, "lattice-check")["lattice_check"]["global_min_detuning_mhz"] == 30.0

    def test_compare_flags(self, tmp_path):
        code = execute(["compare", "--n-cnots", "2", "4", "--f-cnot", "0.985", "--single-shot", "0.97", "--out", str(tmp_path)])
        assert code == EXIT_OK
        rows = list(csv.DictReader((tmp_path / "compare.csv").open()))
        assert [r["scheme"] for r in rows] == ["cnot-chain-2", "cnot-chain-4", "single-shot"]
        assert float(rows[1]["fidelity"]) == pytest.approx(0.9413, abs=1e-4)

    def test_compare_from_gate_report(self, tmp_path):
        (tmp_path / "gate.json").write_text(json.dumps({"gate": {"fidelity_corrected": 0.9}}))
        path = write_config(tmp_path, {"compare": {"n_cnots": 4, "gate_report": "gate.json"}})
        assert execute(["compare", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
        rows = report(tmp_path / "o", "compare")["comparison"]["rows"]
        assert rows[-1] == {"scheme": "single-shot", "n_cnots": 0, "fidelity": 0.9}

    def test_evolve_zero_drive(self, tmp_path):
        cfg = {
            "circuit": two_mode_circuit(),
            "evolve": {
                "drives": [{"amp": 0.0, "freq": "auto:1"}],
                "t_gate_ns": 50,
                "frame": "rotating",
                "ideal": "identity",
                "phase_correction": "diagonal",
            },
        }
        path = write_config(tmp_path, cfg)
        assert execute(["evolve", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
        gate = report(tmp_path, "evolve")["gate"]
        assert gate["fidelity_corrected"] == pytest.approx(1.0, abs=1e-9)
        assert gate["leakage_total"] == pytest.approx(0.0, abs=1e-12)
        lines = (tmp_path / "unitary_abs.csv").read_text().splitlines()
        assert len(lines) == 5 and lines[0].startswith("out\\in,00,01")

    def test_evolve_overrides(self, tmp_path):
        cfg = {"circuit": two_mode_circuit(), "evolve": {"drives": [{"amp": 0.002, "freq": 4.99}], "t_gate_ns": 10}}
        path = write_config(tmp_path, cfg)
        args = ["evolve", "--config", str(path), "--out", str(tmp_path), "--frame", "rotating", "--dt-ps", "50", "--t1-us", "50"]
        assert execute(args) == EXIT_OK
        r = report(tmp_path, "evolve")
        assert r["config"]["evolve"]["dt_ps"] == 50 and r["gate"]["frame"] == "rotating"
        assert "decoherence" in r and "fidelity_corrected_diagonal" in r
        assert r["gate"]["dt_ps"] == 50

    def test_frame_override_drops_foreign_step(self, tmp_path):
        # a lab-frame step carried into the rotating frame would mean 1000x more steps
        evolve = {"drives": [{"amp": 0.002, "freq": 4.99}], "t_gate_ns": 10, "frame": "lab", "dt_ps": 1.0}
        path = write_config(tmp_path, {"circuit": two_mode_circuit(), "evolve": evolve})
        assert execute(["evolve", "--config", str(path), "--out", str(tmp_path), "--frame", "rotating"]) == EXIT_OK
        assert report(tmp_path, "evolve")["gate"]["dt_ps"] == 100.0
        assert execute(["evolve", "--config", str(path), "--out", str(tmp_path), "--frame", "lab"]) == EXIT_OK
        assert report(tmp_path, "evolve")["gate"]["dt_ps"] == 1.0

    def test_search_small(self, tmp_path):
        cfg = {
            "circuit": "table1_circuit.json",
            "search": {"bounds": [{"param": "g:anc,q2", "lo": 0.02, "hi": 0.022}], "n_samples": 4, "n_refine": 1, "maxiter": 5},
        }
        path = CONFIGS.parent / "configs" / "_tmp_search.json"
        try:
            path.write_text(json.dumps(cfg))
            assert execute(["search", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
        finally:
            path.unlink()
        assert (tmp_path / "candidates.csv").read_text().startswith("stage,g:anc,q2,objective")
        assert "verdict" in report(tmp_path, "search")["result"]


class TestErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        assert execute(["shifts", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "does not exist" in capsys.readouterr().err

    def test_config_required(self, tmp_path):
        assert execute(["shifts", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_field_path_in_message(self, tmp_path, capsys):
        cfg = {"circuit": {"modes": [{"name": "a", "role": "ancilla", "freq": 5.0}]}}
        assert execute(["build", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "circuit.modes[0]" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        assert execute(["build", "--config", str(write_config(tmp_path, {"circut": {}})), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_drive(self, tmp_path, capsys):
        cfg = {"circuit": two_mode_circuit(), "evolve": {"drives": [{"amp": 0.01, "freq": "fast"}]}}
        assert execute(["evolve", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "evolve.drives[0]" in capsys.readouterr().err

    def test_regime_refusal(self, tmp_path):
        # three resonant, mutually coupled modes: one single-excitation label keeps
        # only a third of its population, so eigenstate labeling is refused
        modes = [{"name": n, "role": r, "freq": 5.0, "anharm": -0.2} for n, r in (("a", "ancilla"), ("b", "data"), ("c", "data"))]
        pairs = [("a", "b"), ("a", "c"), ("b", "c")]
        cfg = {"circuit": {"modes": modes, "edges": [{"a": x, "b": y, "g": 0.02} for x, y in pairs]}}
        assert execute(["shifts", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_REGIME

    def test_numerical_refusal(self, tmp_path):
        cfg = {"circuit": two_mode_circuit(), "evolve": {"drives": [], "t_gate_ns": 1, "dt_ps": 50, "frame": "lab"}}
        assert execute(["evolve", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_NUMERICAL


class TestDeterminism:
    def test_identical_reports(self, tmp_path):
        args = ["shifts", "--config", str(CONFIGS / "table1.json"), "--seed", "7"]
        assert execute(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert execute(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        for name in ("shifts.json", "shifts.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert report(tmp_path / "a", "shifts")["seed"] == 7
        meta = json.loads((tmp_path / "a" / "shifts.meta.json").read_text())
        assert "timestamp" in meta and "shifts.csv" in meta["files"]

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "dispersive_parity", "compare", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "compare.csv").exists()

"""Command-line entry point.

    dispersive-parity <command> --config run.json --out results/ [flags]

Commands: build, reduce, shifts, search, evolve, lattice-check, compare,
repro-table1. Every command writes ``<command>.json`` (deterministic for a
fixed config and seed) and ``<command>.meta.json`` (timestamp, runtime).
Exit codes: 0 success, 2 config error, 3 regime refusal, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import RunConfig, load_json
from .dynamics import (
    DressedFrame,
    DriveSpec,
    decohered_fidelity,
    parity_drive_frequencies,
    score_gate,
    simulate_gate,
)
from .errors import ConfigError, NumericalError, ParityError, RegimeError
from .fockspace import CircuitSpec, assemble_hamiltonian, basis_for, hermiticity_error
from .regimes import LatticeAssignment, RegimeTarget, ancilla_pairs, lattice_detuning_check, regime_search
from .shifts import ShiftTable, shift_table
from .stabilizers import cnot_chain_fidelity
from .swreduce import reduce_cell, sw_validity_report

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_NUMERICAL = 0, 2, 3, 4

DEFAULT_TABLE1 = Path(__file__).resolve().parents[2] / "configs" / "table1.json"


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Outputs:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def text(self, name: str, content: str) -> Path:
        path = self.dir / name
        path.write_text(content)
        self.written.append(name)
        return path

    def report(self, name: str, body: dict, cfg: RunConfig, started: float) -> Path:
        report = {"command": name, "version": __version__, "seed": cfg.seed, "config": cfg.resolved(), **body}
        meta = {
            "command": name,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "runtime_s": round(time.time() - started, 3),
            "files": sorted(self.written + [f"{name}.json"]),
        }
        self.text(f"{name}.meta.json", dumps(meta))
        return self.text(f"{name}.json", dumps(report))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_build(cfg: RunConfig, out: Outputs) -> dict:
    spec = cfg.circuit()
    basis = basis_for(spec)
    H = assemble_hamiltonian(spec, basis=basis)
    dense = H.toarray() if hasattr(H, "toarray") else H
    evals = np.linalg.eigvalsh(dense) if basis.dim <= 4000 else None
    body = {
        "dimension": basis.dim,
        "levels": list(spec.levels),
        "hermiticity_error": hermiticity_error(H),
    }
    if evals is not None:
        body["lowest_energies_ghz"] = evals[: min(10, len(evals))] - evals[0]
    return body


def cmd_reduce(cfg: RunConfig, out: Outputs) -> dict:
    opts = cfg.section("reduce")
    spec = cfg.circuit()
    formula = opts.get("formula", "printed")
    bound = float(opts.get("bound", 0.15))
    report = sw_validity_report(spec, formula=formula, bound=bound, cutoff=int(opts.get("cutoff", 4)))
    dressed = reduce_cell(spec, formula=formula, bound=bound)
    out.text("effective_circuit.json", dumps(dressed.to_dict()))
    return {"validity": report.to_dict(), "effective": dressed.to_dict()}


def _golden_diff(table: ShiftTable, golden_path: Path) -> dict:
    golden = ShiftTable.from_csv(golden_path)
    rows = []
    for key, (_, full) in golden.entries.items():
        ours = table.chi(key)
        rows.append({"subset": "+".join(key), "golden": full, "computed": ours, "diff": ours - full})
    worst = max(abs(r["diff"]) for r in rows)
    return {"rows": rows, "max_abs_diff_mhz": worst}


def cmd_shifts(cfg: RunConfig, out: Outputs) -> dict:
    opts = cfg.section("shifts")
    table = shift_table(cfg.circuit(), opts.get("method", "exact"))
    out.text("shifts.csv", table.to_csv())
    body = {"shift_table": table.to_dict(), "recursion_residual_mhz": table.recursion_residual()}
    if opts.get("golden"):
        tol = float(opts.get("tolerance_mhz", 0.1))
        diff = _golden_diff(table, cfg.base_dir / opts["golden"])
        diff["tolerance_mhz"] = tol
        diff["pass"] = diff["max_abs_diff_mhz"] <= tol
        body["golden"] = diff
    return body


def cmd_search(cfg: RunConfig, out: Outputs) -> dict:
    opts = dict(cfg.section("search"))
    spec = cfg.circuit()
    if "target_pairs" not in opts:
        opts["target_pairs"] = [sorted(p) for p in ancilla_pairs(spec)]
    target = RegimeTarget.from_dict(opts, "search")
    result = regime_search(
        target,
        spec,
        seed=cfg.seed,
        n_samples=int(opts.get("n_samples", 512)),
        n_refine=int(opts.get("n_refine", 4)),
        maxiter=int(opts.get("maxiter", 200)),
    )
    out.text("candidates.csv", result.candidates_csv())
    out.text("best_shifts.csv", result.table.to_csv())
    return {"target": target.to_dict(), "result": result.to_dict()}


def _drives(spec: CircuitSpec, items) -> list[DriveSpec]:
    if not isinstance(items, list):
        raise ConfigError("drives must be a list", "evolve.drives")
    drives = []
    autos = {}
    for k, d in enumerate(items):
        where = f"evolve.drives[{k}]"
        try:
            freq = d["freq"]
            if isinstance(freq, str):
                if not freq.startswith("auto:"):
                    raise ConfigError(f"frequency string must look like 'auto:<weight>', got {freq!r}", where)
                w = int(freq.split(":", 1)[1])
                if w not in autos:
                    autos[w] = parity_drive_frequencies(spec, [w])[0]
                freq = autos[w]
            target = d.get("target") or spec.by_role("ancilla")[0]
            spec.index(target)
            drives.append(
                DriveSpec(
                    target,
                    float(d["amp"]),
                    float(freq),
                    float(d.get("phase", 0.0)),
                    d.get("envelope", "flat"),
                    float(d.get("ramp_ns", 0.0)),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", where) from None
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], where) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), where) from None
    return drives


def _ideal(spec: CircuitSpec, name: str):
    if name == "parity":
        return None
    if name == "identity":
        return np.eye(2 ** len(spec.qubits))
    raise ConfigError(f"ideal must be 'parity' or 'identity', got {name!r}", "evolve.ideal")


def run_evolve(cfg: RunConfig, out: Outputs) -> dict:
    opts = cfg.section("evolve")
    spec = cfg.circuit()
    drives = _drives(spec, opts.get("drives", []))
    t_gate = float(opts.get("t_gate_ns", 600.0))
    frame = opts.get("frame", "lab")
    if frame not in ("lab", "rotating"):
        raise ConfigError(f"frame must be 'lab' or 'rotating', got {frame!r}", "evolve.frame")
    parity = opts.get("parity", "odd")
    mode = opts.get("phase_correction", "local")
    scale = float(opts.get("drive_scale", 0.5))
    cut = float(opts.get("rwa_cut", 0.5))
    result = simulate_gate(
        spec,
        drives,
        t_gate,
        dt_ps=opts.get("dt_ps"),
        frame=frame,
        parity=parity,
        phase_mode=mode,
        ideal=_ideal(spec, opts.get("ideal", "parity")),
        drive_scale=scale,
        rwa_cut=cut,
        seed=cfg.seed,
    )
    out.text("unitary_abs.csv", result.magnitude_csv())
    body = {
        "drives": [d.to_dict() for d in drives],
        "gate": result.to_dict(),
        "infidelity": 1.0 - result.fidelity_corrected,
    }
    other = "diagonal" if mode == "local" else "local"
    alt = score_gate(
        DressedFrame.from_spec(spec),
        result.unitary_dressed,
        t_gate,
        parity=parity,
        phase_mode=other,
        ideal=result.ideal,
        frame_kind=frame,
        seed=cfg.seed,
    )
    body[f"fidelity_corrected_{other}"] = alt.fidelity_corrected
    t1 = opts.get("t1_us")
    if t1 is not None:
        dec = decohered_fidelity(
            spec,
            drives,
            t_gate,
            t1,
            dt_ps=float(opts.get("decoherence_dt_ps", 100.0)),
            parity=parity,
            phase_mode=opts.get("decoherence_phase_correction", "diagonal"),
            drive_scale=scale,
            rwa_cut=cut,
            seed=cfg.seed,
        )
        body["decoherence"] = dec.to_dict()
    return body


def cmd_lattice(cfg: RunConfig, out: Outputs) -> dict:
    if "lattice" not in cfg.raw:
        raise ConfigError("lattice-check needs a lattice", "lattice")
    lattice = LatticeAssignment.from_dict(cfg.raw["lattice"])
    threshold = float(cfg.section("lattice_check").get("min_detuning_mhz", 25.0))
    return {"lattice_check": lattice_detuning_check(lattice, threshold)}


def _compare_rows(opts: dict) -> dict:
    f = float(opts.get("f_cnot", 0.985))
    ns = opts.get("n_cnots", [2, 4])
    ns = [ns] if isinstance(ns, int) else list(ns)
    rows = [{"scheme": f"cnot-chain-{n}", "n_cnots": n, "fidelity": cnot_chain_fidelity(n, f)} for n in ns]
    if opts.get("single_shot") is not None:
        rows.append({"scheme": "single-shot", "n_cnots": 0, "fidelity": float(opts["single_shot"])})
    return {"f_cnot": f, "rows": rows}


def _compare_csv(table: dict) -> str:
    lines = ["scheme,n_cnots,fidelity"]
    lines += [f"{r['scheme']},{r['n_cnots']},{r['fidelity']:.6f}" for r in table["rows"]]
    return "\n".join(lines) + "\n"


def cmd_compare(cfg: RunConfig, out: Outputs) -> dict:
    opts = cfg.section("compare")
    if opts.get("single_shot") is None and opts.get("gate_report"):
        report = load_json(cfg.base_dir / opts["gate_report"], "compare.gate_report")
        opts["single_shot"] = report.get("gate", {}).get("fidelity_corrected")
    table = _compare_rows(opts)
    out.text("compare.csv", _compare_csv(table))
    return {"comparison": table}


def cmd_repro_table1(cfg: RunConfig, out: Outputs) -> dict:
    body = {"shifts": cmd_shifts(cfg, out)}
    body["evolve"] = run_evolve(cfg, out)
    opts = cfg.section("compare")
    opts.setdefault("single_shot", body["evolve"]["gate"]["fidelity_corrected"])
    table = _compare_rows(opts)
    out.text("compare.csv", _compare_csv(table))
    body["comparison"] = table
    return body


COMMANDS: dict[str, Callable[[RunConfig, Outputs], dict]] = {
    "build": cmd_build,
    "reduce": cmd_reduce,
    "shifts": cmd_shifts,
    "search": cmd_search,
    "evolve": run_evolve,
    "lattice-check": cmd_lattice,
    "compare": cmd_compare,
    "repro-table1": cmd_repro_table1,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dispersive-parity", description="Dispersive parity-gate toolkit")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="run configuration JSON")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="cap on BLAS threads")
    p.add_argument("--dt-ps", type=float, dest="dt_ps")
    p.add_argument("--t-gate-ns", type=float, dest="t_gate_ns")
    p.add_argument("--levels", type=int)
    p.add_argument("--frame", choices=["lab", "rotating"])
    p.add_argument("--phase-correction", choices=["local", "diagonal"], dest="phase_correction")
    p.add_argument("--t1-us", type=float, dest="t1_us")
    p.add_argument("--n-cnots", type=int, nargs="+", dest="n_cnots")
    p.add_argument("--f-cnot", type=float, dest="f_cnot")
    p.add_argument("--single-shot", type=float, dest="single_shot")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _load_config(args) -> RunConfig:
    if args.config is not None:
        return RunConfig.load(args.config)
    if args.command == "repro-table1":
        return RunConfig.load(DEFAULT_TABLE1)
    if args.command == "compare":
        return RunConfig.from_dict({})
    raise ConfigError("--config is required for this command", "--config")


def execute(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = _load_config(args)
        cfg.override(None, "seed", args.seed)
        cfg.override(None, "levels", args.levels)
        evolve = cfg.raw.get("evolve")
        if isinstance(evolve, dict) and args.frame and args.dt_ps is None and evolve.get("frame", "lab") != args.frame:
            # a step size chosen for the other frame would be wrong by orders of magnitude
            evolve.pop("dt_ps", None)
        for key in ("dt_ps", "t_gate_ns", "frame", "phase_correction", "t1_us"):
            cfg.override("evolve", key, getattr(args, key))
        for key in ("n_cnots", "f_cnot", "single_shot"):
            cfg.override("compare", key, getattr(args, key))
        out = Outputs(args.out)
        if args.threads:
            with threadpool_limits(limits=args.threads):
                body = COMMANDS[args.command](cfg, out)
        else:
            body = COMMANDS[args.command](cfg, out)
        path = out.report(args.command, body, cfg, started)
        print(f"wrote {path}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime refusal: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ParityError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()

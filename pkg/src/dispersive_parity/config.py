"""Run configuration: one JSON document drives every CLI command.

Top-level keys (all optional except where a command needs them)::

    circuit      inline circuit object or a path to one (relative to the config)
    seed         integer, default 0
    levels       truncation override applied to every mode
    shifts       {"method": "exact" | "pt2" | "pt3" | "pt4", "golden": path}
    reduce       {"formula": "printed" | "derived", "bound": 0.15, "cutoff": 4}
    evolve       {"drives": [...], "t_gate_ns", "dt_ps", "frame", "parity",
                  "phase_correction", "drive_scale", "rwa_cut", "t1_us", "ideal"}
    search       {"target_pairs", "target_chi", "equal_tol", "unwanted_cap",
                  "bounds": [{"param", "lo", "hi"}], "n_samples", "n_refine", "maxiter"}
    lattice      inline lattice object or a path; {"qubits": [...], "cells": [...]}
    lattice_check {"min_detuning_mhz": 25}
    compare      {"n_cnots": [2, 4], "f_cnot": 0.985, "single_shot": float}

A drive ``freq`` may be the string ``"auto:w"``: the ancilla transition with
``w`` data qubits excited, read off the dressed spectrum.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .fockspace import CircuitSpec

KNOWN_KEYS = {
    "circuit",
    "seed",
    "levels",
    "shifts",
    "reduce",
    "evolve",
    "search",
    "lattice",
    "lattice_check",
    "compare",
    "description",
}


def load_json(path: str | Path, where: str = "config") -> Any:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"file {str(p)!r} does not exist", where)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}", where) from None


def _resolve(value: Any, base: Path, where: str) -> Any:
    if isinstance(value, str):
        return load_json(base / value, where)
    return value


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        data = load_json(path)
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", "config")
        return cls.from_dict(data, path.parent)

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: str | Path = ".") -> "RunConfig":
        data = copy.deepcopy(dict(data))
        unknown = set(data) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "config")
        base = Path(base_dir)
        for key in ("circuit", "lattice"):
            if key in data:
                data[key] = _resolve(data[key], base, key)
        seed = data.setdefault("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed must be an integer", "seed")
        for key in ("shifts", "reduce", "evolve", "search", "lattice_check", "compare"):
            if key in data and not isinstance(data[key], dict):
                raise ConfigError("must be an object", key)
        return cls(data, base)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def section(self, name: str) -> dict:
        return self.raw.setdefault(name, {})

    def circuit(self) -> CircuitSpec:
        if "circuit" not in self.raw:
            raise ConfigError("this command needs a circuit", "circuit")
        spec = CircuitSpec.from_dict(self.raw["circuit"], "circuit")
        if self.raw.get("levels") is not None:
            levels = self.raw["levels"]
            if not isinstance(levels, int) or levels < 2:
                raise ConfigError("levels must be an integer >= 2", "levels")
            spec = spec.with_levels(levels)
        return spec

    def override(self, section: str | None, key: str, value: Any) -> None:
        """Apply a command-line override; ``None`` means the flag was not given."""
        if value is None:
            return
        if section is None:
            self.raw[key] = value
        else:
            self.section(section)[key] = value

    def resolved(self) -> dict:
        return copy.deepcopy(self.raw)

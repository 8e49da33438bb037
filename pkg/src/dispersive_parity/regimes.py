"""Parameter-regime search for equal ancilla-data shifts, and lattice detuning checks.

The objective for a candidate circuit is

    J = sum_pairs (chi_pair - target)^2 + w * sum_unwanted max(0, |chi| - cap)^2

over the full shifts of the exact shift table (MHz). Pairs are the wanted
ancilla-data subsets; every other subset is unwanted. The search samples the
parameter box with a scrambled Sobol sequence and polishes the best few
candidates with bounded Nelder-Mead.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import ConfigError, RegimeError
from .fockspace import CircuitSpec
from .shifts import ShiftTable, shift_table

UNWANTED_WEIGHT = 10.0
DISPERSIVE_BOUND = 0.15


Bound = tuple[str, float, float]  # "freq:name" / "anharm:name" / "g:a,b", lo, hi


@dataclass(frozen=True)
class RegimeTarget:
    target_pairs: tuple[frozenset, ...]
    target_chi: float = -5.0
    equal_tol: float = 0.02
    unwanted_cap: float = 0.5
    bounds: tuple[Bound, ...] = ()
    weight: float = UNWANTED_WEIGHT

    def __post_init__(self):
        pairs = tuple(frozenset(p) for p in self.target_pairs)
        object.__setattr__(self, "target_pairs", pairs)
        if not pairs:
            raise ConfigError("at least one target pair is required", "target_pairs")
        if self.unwanted_cap < 0 or not math.isfinite(self.unwanted_cap):
            raise ConfigError("cap must be non-negative and finite", "unwanted_cap")
        if self.equal_tol < 0:
            raise ConfigError("equal_tol must be non-negative", "equal_tol")
        for k, (name, lo, hi) in enumerate(self.bounds):
            if not lo <= hi:
                raise ConfigError(f"empty interval [{lo}, {hi}]", f"bounds[{k}]")
            _parse_param(name)

    def check_ancilla(self, spec: CircuitSpec) -> None:
        anc = set(spec.by_role("ancilla"))
        for pair in self.target_pairs:
            if not pair & anc:
                raise ConfigError(f"target pair {sorted(pair)} does not include the ancilla", "target_pairs")

    @classmethod
    def from_dict(cls, data: Mapping, path: str = "target") -> "RegimeTarget":
        try:
            bounds = tuple((b["param"], float(b["lo"]), float(b["hi"])) for b in data.get("bounds", []))
            return cls(
                target_pairs=tuple(frozenset(p) for p in data["target_pairs"]),
                target_chi=float(data.get("target_chi", -5.0)),
                equal_tol=float(data.get("equal_tol", 0.02)),
                unwanted_cap=float(data.get("unwanted_cap", 0.5)),
                bounds=bounds,
                weight=float(data.get("weight", UNWANTED_WEIGHT)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", path) from None
        except ConfigError as exc:
            raise ConfigError(str(exc), path) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), path) from None

    def to_dict(self) -> dict:
        return {
            "target_pairs": [sorted(p) for p in self.target_pairs],
            "target_chi": self.target_chi,
            "equal_tol": self.equal_tol,
            "unwanted_cap": self.unwanted_cap,
            "weight": self.weight,
            "bounds": [{"param": n, "lo": lo, "hi": hi} for n, lo, hi in self.bounds],
        }


def ancilla_pairs(spec: CircuitSpec) -> tuple[frozenset, ...]:
    anc = spec.by_role("ancilla")
    if len(anc) != 1:
        raise ConfigError(f"expected exactly one ancilla, found {len(anc)}")
    return tuple(frozenset((anc[0], q)) for q in spec.by_role("data"))


def _split(table: ShiftTable, target: RegimeTarget):
    wanted, unwanted = {}, {}
    for key, (_, full) in table.entries.items():
        (wanted if frozenset(key) in target.target_pairs else unwanted)[key] = full
    missing = set(target.target_pairs) - {frozenset(k) for k in wanted}
    if missing:
        raise ConfigError(f"target pairs {[sorted(m) for m in missing]} are not in the shift table")
    return wanted, unwanted


def objective_from_table(table: ShiftTable, target: RegimeTarget) -> float:
    wanted, unwanted = _split(table, target)
    j = sum((chi - target.target_chi) ** 2 for chi in wanted.values())
    j += target.weight * sum(max(0.0, abs(chi) - target.unwanted_cap) ** 2 for chi in unwanted.values())
    return float(j)


def regime_objective(spec: CircuitSpec, target: RegimeTarget) -> float:
    return objective_from_table(shift_table(spec), target)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    worst_pair_rel: float
    worst_unwanted_mhz: float
    worst_unwanted_subset: tuple[str, ...] | None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_pair_relative_error": self.worst_pair_rel,
            "worst_unwanted_mhz": self.worst_unwanted_mhz,
            "worst_unwanted_subset": list(self.worst_unwanted_subset) if self.worst_unwanted_subset else None,
        }


def regime_verdict(table: ShiftTable, target: RegimeTarget) -> Verdict:
    """Pass when every pair is within ``equal_tol`` of the target and every other shift within the cap."""
    wanted, unwanted = _split(table, target)
    scale = abs(target.target_chi)
    if scale > 0:
        rel = max(abs(chi - target.target_chi) / scale for chi in wanted.values())
    else:
        rel = max(abs(chi) for chi in wanted.values())
    worst_key = max(unwanted, key=lambda k: abs(unwanted[k]), default=None)
    worst = abs(unwanted[worst_key]) if worst_key else 0.0
    passed = rel <= target.equal_tol and worst <= target.unwanted_cap
    return Verdict(bool(passed), float(rel), float(worst), worst_key)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _parse_param(name: str) -> tuple[str, tuple[str, ...]]:
    kind, _, rest = name.partition(":")
    if kind not in ("freq", "anharm", "g") or not rest:
        raise ConfigError(f"parameter {name!r} must look like freq:<mode>, anharm:<mode> or g:<a>,<b>")
    names = tuple(rest.split(","))
    if (kind == "g") != (len(names) == 2):
        raise ConfigError(f"parameter {name!r} names the wrong number of modes")
    return kind, names


def get_param(spec: CircuitSpec, name: str) -> float:
    kind, names = _parse_param(name)
    if kind == "g":
        return spec.coupling(*names)
    return getattr(spec.mode(names[0]), kind)


def apply_params(spec: CircuitSpec, names: Sequence[str], values: Sequence[float]) -> CircuitSpec:
    for name, value in zip(names, values):
        kind, modes = _parse_param(name)
        if kind == "g":
            spec = spec.with_coupling(*modes, float(value))
        else:
            spec = spec.with_mode(modes[0], **{kind: float(value)})
    return spec


def dispersive_ok(spec: CircuitSpec, bound: float = DISPERSIVE_BOUND) -> bool:
    for e in spec.edges:
        d = spec.mode(e.a).freq - spec.mode(e.b).freq
        if e.g != 0.0 and (d == 0.0 or abs(e.g / d) > bound):
            return False
    return True


@dataclass
class SearchResult:
    spec: CircuitSpec
    table: ShiftTable
    verdict: Verdict
    objective: float
    params: dict[str, float]
    candidates: list[dict] = field(default_factory=list)

    def candidates_csv(self) -> str:
        if not self.candidates:
            return ""
        cols = list(self.candidates[0])
        lines = [",".join(cols)]
        for row in self.candidates:
            lines.append(",".join(_csv_cell(row[c]) for c in cols))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "params": self.params,
            "verdict": self.verdict.to_dict(),
            "spec": self.spec.to_dict(),
            "shift_table": self.table.to_dict(),
            "n_candidates": len(self.candidates),
        }


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def regime_search(
    target: RegimeTarget,
    base_spec: CircuitSpec,
    seed: int = 0,
    *,
    n_samples: int = 512,
    n_refine: int = 4,
    maxiter: int = 200,
    bound: float = DISPERSIVE_BOUND,
) -> SearchResult:
    """Sobol sampling of ``target.bounds`` followed by Nelder-Mead polish.

    Zero-width intervals pin a parameter. With every interval pinned the base
    values are returned unchanged. Candidates that break the dispersive bound
    or fail eigenstate labeling score ``inf``.
    """
    target.check_ancilla(base_spec)
    names = [b[0] for b in target.bounds]
    for n in names:
        get_param(base_spec, n)  # validates the name against the spec
    lo = np.array([b[1] for b in target.bounds], dtype=float)
    hi = np.array([b[2] for b in target.bounds], dtype=float)
    free = hi > lo
    candidates: list[dict] = []

    def evaluate(x: np.ndarray, stage: str) -> float:
        x = np.clip(x, lo, hi)
        spec = apply_params(base_spec, names, x)
        j = math.inf
        if dispersive_ok(spec, bound):
            try:
                j = objective_from_table(shift_table(spec), target)
            except RegimeError:
                j = math.inf
        row = {"stage": stage, **{n: float(v) for n, v in zip(names, x)}, "objective": j}
        candidates.append(row)
        return j

    if not free.any():
        x_best = lo.copy()
        j_best = evaluate(x_best, "fixed")
    else:
        sampler = qmc.Sobol(d=int(free.sum()), scramble=True, seed=seed)
        m = max(0, math.ceil(math.log2(max(n_samples, 1))))
        unit = sampler.random_base2(m)[:n_samples] if 2**m == n_samples else sampler.random(n_samples)
        pts = np.tile(lo, (len(unit), 1))
        pts[:, free] = lo[free] + unit * (hi[free] - lo[free])
        scores = np.array([evaluate(p, "sample") for p in pts])
        finite = np.isfinite(scores)
        if not finite.any():
            raise RegimeError("no sampled candidate satisfies the dispersive bound and labeling")
        order = np.argsort(np.where(finite, scores, np.inf), kind="stable")[:n_refine]
        x_best, j_best = pts[order[0]].copy(), float(scores[order[0]])
        span = hi[free] - lo[free]

        for k in order:
            start = pts[k][free]

            def f(z, _start=start):
                x = lo.copy()
                x[free] = z
                return evaluate(x, "refine")

            res = minimize(
                f,
                start,
                method="Nelder-Mead",
                bounds=list(zip(lo[free], hi[free])),
                options={"maxiter": maxiter, "xatol": 1e-6 * float(span.max()), "fatol": 1e-10},
            )
            if res.fun < j_best:
                x_best = lo.copy()
                x_best[free] = np.clip(res.x, lo[free], hi[free])
                j_best = float(res.fun)

    if all(get_param(base_spec, n) == v for n, v in zip(names, x_best)):
        spec = base_spec
    else:
        spec = apply_params(base_spec, names, x_best)
    if not math.isfinite(j_best):
        raise RegimeError("best candidate violates the dispersive bound")
    table = shift_table(spec)
    return SearchResult(
        spec=spec,
        table=table,
        verdict=regime_verdict(table, target),
        objective=j_best,
        params={n: float(v) for n, v in zip(names, x_best)},
        candidates=candidates,
    )


# ---------------------------------------------------------------------------
# lattice frequency check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeAssignment:
    qubits: Mapping[str, tuple[float, float]]
    cells: tuple[frozenset, ...] = ()
    ancillas: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(frozenset(c) for c in self.cells))
        object.__setattr__(self, "ancillas", frozenset(self.ancillas))
        for k, cell in enumerate(self.cells):
            unknown = cell - set(self.qubits)
            if unknown:
                raise ConfigError(f"unknown qubits {sorted(unknown)}", f"cells[{k}]")
            n_anc = len(cell & self.ancillas)
            if self.ancillas and n_anc != 1:
                raise ConfigError(f"cell has {n_anc} ancillas, expected 1", f"cells[{k}]")

    @classmethod
    def from_dict(cls, data: Mapping, path: str = "lattice") -> "LatticeAssignment":
        try:
            qubits = {}
            ancillas = set()
            for k, q in enumerate(data["qubits"]):
                qubits[q["name"]] = (float(q["freq"]), float(q.get("anharm", 0.0)))
                if q.get("role") == "ancilla":
                    ancillas.add(q["name"])
            if len(qubits) != len(data["qubits"]):
                raise ConfigError("duplicate qubit names", f"{path}.qubits")
            return cls(qubits, tuple(data.get("cells", ())), frozenset(ancillas))
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", path) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), path) from None


def _min_detuning(names: Iterable[str], qubits) -> tuple[float, tuple[str, str] | None]:
    best, pair = math.inf, None
    for a, b in itertools.combinations(sorted(names), 2):
        # round to the kHz so 5.43 - 5.40 reads as 30 MHz, not 29.9999...
        d = round(abs(qubits[a][0] - qubits[b][0]) * 1e3, 6)
        if d < best:
            best, pair = d, (a, b)
    return best, pair


def lattice_detuning_check(lattice: LatticeAssignment, min_detuning: float = 25.0) -> dict:
    """Minimum pairwise detuning (MHz) per cell and over the whole pool."""
    glob, pair = _min_detuning(lattice.qubits, lattice.qubits)
    cells = []
    for cell in lattice.cells:
        d, p = _min_detuning(cell, lattice.qubits)
        cells.append({"members": sorted(cell), "min_detuning_mhz": d, "pair": list(p) if p else None, "pass": d >= min_detuning})
    return {
        "threshold_mhz": min_detuning,
        "global_min_detuning_mhz": glob,
        "global_pair": list(pair) if pair else None,
        "cells": cells,
        "margin_mhz": glob - min_detuning,
        "pass": bool(glob >= min_detuning and all(c["pass"] for c in cells)),
    }

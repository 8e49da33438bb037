"""Closed-form coupler elimination (second-order Schrieffer-Wolff) and its checks.

Two stages act on a unit cell of four data qubits, one ancilla, four ring
couplers and one central coupler:

1. ``eliminate_edge_couplers`` removes every coupler with no ancilla neighbour,
   dressing qubit frequencies and adding coupler-mediated qubit couplings.
2. ``eliminate_central_coupler`` removes the coupler shared with the ancilla.

Each eliminated coupler stays in the circuit as an edgeless spectator with a
shifted frequency, so basis labels keep their layout across stages.

Two formula sets are available. ``"printed"`` is the literal parameter map in
the usual published form::

    w_x  += g_xc^2 (1/D_xc + 1/S_xc)
    w_c  += sum_x g_xc^2 (1/D_xc + 1/S_xc)
    g_xy += g_xc g_yc (1/D_xc + 1/D_yc - 1/S_xc - 1/S_yc)

with ``D_xc = w_x - w_c`` and ``S_xc = w_x + w_c``. ``"derived"`` is what a
direct second-order expansion of the ``g (x - x^dag)(c - c^dag)`` coupling gives::

    w_x  += g_xc^2 (1/D_xc - 1/S_xc)
    w_c  -= sum_x g_xc^2 (1/D_xc + 1/S_xc)
    g_xy -= g_xc g_yc (1/D_xc + 1/D_yc - 1/S_xc - 1/S_yc) / 2

The two agree on which terms appear and differ in signs and a factor of two;
``derived`` is the one that tracks exact diagonalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np

from .errors import ConfigError, DispersiveBoundError, RegimeError
from .fockspace import CircuitSpec, CouplingEdge, ModeSpec, assemble_hamiltonian, basis_for

Formula = Literal["printed", "derived"]

DISPERSIVE_BOUND = 0.15
MIN_DETUNING_GHZ = 1e-3
SPECTRAL_CUTOFF = 4
BUDGET_FACTOR = 5.0


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------


def edge_couplers(spec: CircuitSpec) -> tuple[str, ...]:
    """Couplers with no ancilla neighbour."""
    anc = set(spec.by_role("ancilla"))
    return tuple(
        c for c in spec.by_role("coupler") if not any(n in anc for n, _ in spec.neighbours(c))
    )


def central_couplers(spec: CircuitSpec) -> tuple[str, ...]:
    anc = set(spec.by_role("ancilla"))
    return tuple(c for c in spec.by_role("coupler") if any(n in anc for n, _ in spec.neighbours(c)))


def check_unit_cell(spec: CircuitSpec) -> list[str]:
    """Return the list of ways ``spec`` differs from the ring-plus-hub unit cell.

    The expected wiring: data qubits d0..d3 (listing order) in a ring, ring
    coupler k joins d_k and d_(k+1 mod 4), and one central coupler touches every
    data qubit and the ancilla. Couplers touch nothing else.
    """
    problems = []
    data = spec.by_role("data")
    anc = spec.by_role("ancilla")
    couplers = spec.by_role("coupler")
    if len(data) != 4:
        problems.append(f"expected 4 data qubits, found {len(data)}")
    if len(anc) != 1:
        problems.append(f"expected 1 ancilla, found {len(anc)}")
    if len(couplers) != 5:
        problems.append(f"expected 5 couplers, found {len(couplers)}")
    if problems:
        return problems
    centre = central_couplers(spec)
    ring = edge_couplers(spec)
    if len(centre) != 1:
        return [f"expected one coupler touching the ancilla, found {list(centre)}"]
    hub = centre[0]
    if {n for n, _ in spec.neighbours(hub)} != set(data) | set(anc):
        problems.append(f"central coupler {hub} must touch every data qubit and the ancilla")
    wanted = {frozenset((data[k], data[(k + 1) % 4])) for k in range(4)}
    seen = set()
    for c in ring:
        nbrs = frozenset(n for n, _ in spec.neighbours(c))
        if nbrs not in wanted:
            problems.append(f"ring coupler {c} touches {sorted(nbrs)}, not an adjacent data pair")
        seen.add(nbrs)
    if seen != wanted:
        problems.append("ring couplers do not close the data-qubit ring")
    for a, b in ((e.a, e.b) for e in spec.edges):
        roles = {spec.mode(a).role, spec.mode(b).role}
        if roles == {"coupler"}:
            problems.append(f"direct coupler-coupler edge {a}-{b}")
    return problems


@dataclass(frozen=True)
class DressedSpec:
    """Circuit after one or both eliminations, with its history."""

    circuit: CircuitSpec
    provenance: tuple[str, ...] = ()
    spectator_couplings: Mapping[frozenset, float] = field(default_factory=dict)
    topology_validated: bool = False
    formula: Formula = "printed"

    def effective(self) -> CircuitSpec:
        return self.circuit

    def to_dict(self) -> dict:
        return {
            "circuit": self.circuit.to_dict(),
            "provenance": {
                "applied": list(self.provenance),
                "formula": self.formula,
                "topology": "unit-cell" if self.topology_validated else "unvalidated topology",
                "spectator_couplings": [
                    {"a": a, "b": b, "g": g} for (a, b), g in _sorted_pairs(self.spectator_couplings)
                ],
            },
        }


def _sorted_pairs(couplings: Mapping[frozenset, float]):
    return sorted(((tuple(sorted(k)), v) for k, v in couplings.items()))


# ---------------------------------------------------------------------------
# the elimination step
# ---------------------------------------------------------------------------


def _check_dispersive(x: str, c: str, g: float, delta: float, bound: float) -> None:
    if abs(delta) < MIN_DETUNING_GHZ:
        raise DispersiveBoundError(
            f"{x}-{c} detuning {delta * 1e3:.3f} MHz is within 1 MHz of resonance", g=g, delta=delta
        )
    if abs(g / delta) > bound:
        raise DispersiveBoundError(
            f"{x}-{c}: |g/delta| = {abs(g / delta):.3f} exceeds the dispersive bound {bound} "
            f"(g = {g * 1e3:.2f} MHz, delta = {delta * 1e3:.1f} MHz)",
            g=g,
            delta=delta,
        )


def _eliminate(
    spec: CircuitSpec,
    couplers: tuple[str, ...],
    formula: Formula,
    bound: float,
) -> tuple[CircuitSpec, dict[frozenset, float]]:
    """Remove ``couplers`` using pairwise second-order formulas.

    All shifts are evaluated from the input frequencies, so the result does not
    depend on the order in which couplers are processed.
    """
    if formula not in ("printed", "derived"):
        raise ConfigError(f"unknown formula {formula!r}")
    freq = {m.name: m.freq for m in spec.modes}
    new_freq = dict(freq)
    g_new = {e.key: e.g for e in spec.edges}
    spectator: dict[frozenset, float] = {}
    removed = set(couplers)

    for c in couplers:
        nbrs = [(x, g) for x, g in spec.neighbours(c) if g != 0.0]
        for x, g in nbrs:
            _check_dispersive(x, c, g, freq[x] - freq[c], bound)
        inv_d = {x: 1.0 / (freq[x] - freq[c]) for x, _ in nbrs}
        inv_s = {x: 1.0 / (freq[x] + freq[c]) for x, _ in nbrs}
        for x, g in nbrs:
            if formula == "printed":
                new_freq[x] += g * g * (inv_d[x] + inv_s[x])
                new_freq[c] += g * g * (inv_d[x] + inv_s[x])
            else:
                new_freq[x] += g * g * (inv_d[x] - inv_s[x])
                new_freq[c] -= g * g * (inv_d[x] + inv_s[x])
        for k, (x, gx) in enumerate(nbrs):
            for y, gy in nbrs[k + 1 :]:
                if y in removed or x in removed:
                    continue
                term = gx * gy * (inv_d[x] + inv_d[y] - inv_s[x] - inv_s[y])
                if formula == "derived":
                    term = -0.5 * term
                key = frozenset((x, y))
                if spec.mode(x).role == "coupler" or spec.mode(y).role == "coupler":
                    spectator[key] = spectator.get(key, 0.0) + term
                else:
                    g_new[key] = g_new.get(key, 0.0) + term
        # coupler reached through a qubit that also touches c
        for x, gx in nbrs:
            for y, gxy in spec.neighbours(x):
                if y == c or y in removed or spec.mode(y).role != "coupler":
                    continue
                key = frozenset((c, y))
                spectator[key] = spectator.get(key, 0.0) + gx * gxy * (inv_d[x] + inv_s[x])

    modes = tuple(
        ModeSpec(m.name, m.role, new_freq[m.name], m.anharm, m.levels) if new_freq[m.name] != m.freq else m
        for m in spec.modes
    )
    edges = []
    seen = set()
    for e in spec.edges:
        if e.key in seen or e.a in removed or e.b in removed:
            continue
        seen.add(e.key)
        edges.append(CouplingEdge(e.a, e.b, g_new[e.key]))
    for key, g in g_new.items():
        if key in seen or key & removed:
            continue
        a, b = sorted(key, key=spec.index)
        edges.append(CouplingEdge(a, b, g))
        seen.add(key)
    for m in modes:
        if not math.isfinite(m.freq):
            raise RegimeError(f"dressed frequency of {m.name} is not finite")
    return CircuitSpec(modes, tuple(edges)), spectator


def eliminate_edge_couplers(
    cell: CircuitSpec,
    *,
    formula: Formula = "printed",
    bound: float = DISPERSIVE_BOUND,
) -> DressedSpec:
    """First stage: drop every coupler that does not touch the ancilla."""
    if isinstance(cell, DressedSpec):
        raise ConfigError("input is already dressed; edge elimination applies to the bare cell")
    problems = check_unit_cell(cell)
    ring = edge_couplers(cell)
    circuit, spectator = _eliminate(cell, ring, formula, bound)
    return DressedSpec(circuit, ("edge",), spectator, not problems, formula)


def eliminate_central_coupler(
    dressed: DressedSpec,
    *,
    bound: float = DISPERSIVE_BOUND,
    allow_bare: bool = False,
) -> DressedSpec:
    """Second stage: drop the coupler shared by the ancilla and the data qubits.

    Coupler-coupler couplings from the first stage are discarded here since
    couplers carry no excitations.
    """
    if isinstance(dressed, CircuitSpec):
        if not allow_bare:
            raise ConfigError("central elimination expects the output of eliminate_edge_couplers")
        dressed = DressedSpec(dressed, ("edge",), {}, not check_unit_cell(dressed))
    if "center" in dressed.provenance:
        raise ConfigError("central coupler already eliminated")
    if "edge" not in dressed.provenance:
        raise ConfigError("edge couplers must be eliminated first")
    spec = dressed.circuit
    hubs = tuple(c for c in central_couplers(spec) if spec.neighbours(c))
    circuit, _ = _eliminate(spec, hubs, dressed.formula, bound)
    return DressedSpec(
        circuit, dressed.provenance + ("center",), {}, dressed.topology_validated, dressed.formula
    )


def reduce_cell(cell: CircuitSpec, *, formula: Formula = "printed", bound: float = DISPERSIVE_BOUND) -> DressedSpec:
    return eliminate_central_coupler(eliminate_edge_couplers(cell, formula=formula, bound=bound), bound=bound)


# ---------------------------------------------------------------------------
# validity report
# ---------------------------------------------------------------------------


def _lambdas(spec: CircuitSpec, couplers) -> dict[str, float]:
    out: dict[str, float] = {}
    for c in couplers:
        wc = spec.mode(c).freq
        for x, g in spec.neighbours(c):
            d = spec.mode(x).freq - wc
            lam = abs(g / d) if d else math.inf
            out[x] = max(out.get(x, 0.0), lam)
    return out


def _low_labels(spec: CircuitSpec, max_total: int = 2) -> list[tuple[int, ...]]:
    idx = [k for k, m in enumerate(spec.modes) if m.role != "coupler"]
    labels = []

    def rec(pos: int, left: int, current: list[int]):
        if pos == len(idx):
            lab = [0] * len(spec.modes)
            for k, v in zip(idx, current):
                lab[k] = v
            labels.append(tuple(lab))
            return
        cap = min(left, spec.modes[idx[pos]].levels - 1)
        for v in range(cap + 1):
            rec(pos + 1, left - v, current + [v])

    rec(0, max_total, [])
    return labels


def spectral_deviation(
    full: CircuitSpec,
    effective: CircuitSpec,
    *,
    cutoff: int = SPECTRAL_CUTOFF,
    max_total: int = 2,
) -> dict:
    """Compare low-lying levels of ``effective`` with ``full`` under an excitation cutoff.

    Energies are measured from each model's own ground state; couplers are held
    at zero occupation in the compared labels.
    """
    from .shifts import labeled_spectrum

    labels = _low_labels(full, max_total)
    out = {}
    for name, spec in (("full", full), ("effective", effective)):
        basis = basis_for(spec, cutoff)
        H = assemble_hamiltonian(spec, basis=basis, sparse=False)
        spec_ = labeled_spectrum(H, basis, labels, spec.names)
        ground = spec_.energy(labels[0])
        out[name] = {lab: spec_.energy(lab) - ground for lab in labels}
    dev = {lab: abs(out["full"][lab] - out["effective"][lab]) * 1e3 for lab in labels}
    worst = max(dev, key=dev.get)
    return {
        "n_levels": len(labels),
        "basis_dim_full": basis_for(full, cutoff).dim,
        "max_deviation_mhz": dev[worst],
        "worst_label": list(worst),
    }


@dataclass(frozen=True)
class ValidityReport:
    lambda_edge: dict[str, float]
    lambda_center: dict[str, float]
    epsilon_mhz: float
    counter_rotating_mhz: dict[str, float]
    bound: float
    flags: tuple[str, ...]
    spectral: dict | None
    budget_mhz: float | None

    @property
    def max_lambda_edge(self) -> float:
        return max(self.lambda_edge.values(), default=0.0)

    @property
    def max_lambda_center(self) -> float:
        return max(self.lambda_center.values(), default=0.0)

    @property
    def spectral_ok(self) -> bool | None:
        if self.spectral is None:
            return None
        return self.spectral["max_deviation_mhz"] <= self.budget_mhz + 1e-12

    def to_dict(self) -> dict:
        return {
            "lambda_edge": self.lambda_edge,
            "lambda_center": self.lambda_center,
            "max_lambda_edge": self.max_lambda_edge,
            "max_lambda_center": self.max_lambda_center,
            "epsilon_mhz": self.epsilon_mhz,
            "counter_rotating_mhz": self.counter_rotating_mhz,
            "dispersive_bound": self.bound,
            "flags": list(self.flags),
            "spectral": self.spectral,
            "budget_mhz": self.budget_mhz,
            "spectral_ok": self.spectral_ok,
        }


def sw_validity_report(
    cell: CircuitSpec,
    *,
    formula: Formula = "printed",
    bound: float = DISPERSIVE_BOUND,
    cutoff: int = SPECTRAL_CUTOFF,
    spectral: bool = True,
) -> ValidityReport:
    """Small-parameter sizes, commutator-error proxy and a spectral cross-check.

    The proxy is ``eps = max_i(lambda_edge_i * lambda_center_i) * max|g| / 2`` in
    MHz. Nothing here raises on a regime violation; violations are listed in
    ``flags`` and the spectral check is still attempted with the bound lifted.
    """
    flags = []
    problems = check_unit_cell(cell)
    if problems:
        flags.append("unvalidated topology: " + "; ".join(problems))
    ring = edge_couplers(cell)
    hubs = central_couplers(cell)
    lam_e = _lambdas(cell, ring)
    lam_e = {k: v for k, v in lam_e.items() if cell.mode(k).role != "coupler"}
    first, _ = _eliminate(cell, ring, formula, math.inf)
    lam_c = _lambdas(first, hubs)
    lam_c = {k: v for k, v in lam_c.items() if cell.mode(k).role != "coupler"}
    g_max = max((abs(e.g) for e in cell.edges), default=0.0)
    products = [lam_e.get(x, 0.0) * lam_c.get(x, 0.0) for x in set(lam_e) | set(lam_c)]
    eps = 0.5 * max(products, default=0.0) * g_max * 1e3
    counter = {}
    for c in ring + hubs:
        for x, g in cell.neighbours(c):
            d = cell.mode(x).freq - cell.mode(c).freq
            counter[f"{x}-{c}"] = abs(g * g / d) * 1e3 if d else math.inf
    for name, lam in {**{f"edge:{k}": v for k, v in lam_e.items()}, **{f"center:{k}": v for k, v in lam_c.items()}}.items():
        if lam > bound:
            flags.append(f"{name} lambda {lam:.3f} exceeds bound {bound}")
    if eps > 1.0:
        flags.append(f"commutator-error proxy {eps:.3f} MHz exceeds 1 MHz")

    spec_report = None
    budget = None
    if spectral:
        try:
            reduced = eliminate_central_coupler(
                DressedSpec(first, ("edge",), {}, not problems, formula), bound=math.inf
            ).circuit
            spec_report = spectral_deviation(cell, reduced, cutoff=cutoff)
        except RegimeError as exc:
            flags.append(f"spectral check failed: {exc}")
        lam = max([*lam_e.values(), *lam_c.values(), 0.0])
        max_delta = max(
            (
                abs(cell.mode(x).freq - cell.mode(c).freq)
                for c in ring + hubs
                for x, _ in cell.neighbours(c)
            ),
            default=0.0,
        )
        budget = BUDGET_FACTOR * lam * lam * max_delta * 1e3
        if spec_report is not None and spec_report["max_deviation_mhz"] > budget:
            flags.append(
                f"spectral deviation {spec_report['max_deviation_mhz']:.3f} MHz exceeds budget {budget:.3f} MHz"
            )
    return ValidityReport(lam_e, lam_c, eps, counter, bound, tuple(flags), spec_report, budget)


def table_like_cell(levels: int = 3) -> CircuitSpec:
    """A representative ring-plus-hub cell used in examples and tests.

    Qubits sit between 4.95 and 5.48 GHz, couplers between 6.3 and 7.0 GHz and
    couplings between 20 and 80 MHz.
    """
    data = [("q1", 5.28, -0.20), ("q2", 5.40, -0.20), ("q3", 5.48, -0.19), ("q4", 5.35, -0.21)]
    modes = [ModeSpec("a", "ancilla", 4.95, -0.30, levels)]
    modes += [ModeSpec(n, "data", f, al, levels) for n, f, al in data]
    ring_freqs = [6.30, 6.45, 6.60, 6.75]
    modes += [ModeSpec(f"c{k + 1}", "coupler", f, -0.10, levels) for k, f in enumerate(ring_freqs)]
    modes.append(ModeSpec("c5", "coupler", 7.00, -0.10, levels))
    edges = []
    for k in range(4):
        edges.append(CouplingEdge(data[k][0], f"c{k + 1}", 0.05))
        edges.append(CouplingEdge(data[(k + 1) % 4][0], f"c{k + 1}", 0.05))
    for n, _, _ in data:
        edges.append(CouplingEdge(n, "c5", 0.06))
    edges.append(CouplingEdge("a", "c5", 0.08))
    return CircuitSpec(tuple(modes), tuple(edges))

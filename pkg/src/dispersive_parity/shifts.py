"""n-body dispersive shifts from labeled spectra.

For a subset S of modes the bare shift is the alternating sum

    chi_bare(S) = E(S) - sum_{i in S} E(i) + (|S| - 1) E(0)

where E(X) is the energy of the state with exactly the modes in X excited once.
The full shift strips every lower-order contribution,

    chi_full(S) = chi_bare(S) - sum_{T strict subset of S, |T| >= 2} chi_full(T),

so pairwise shifts have full == bare. Energies come either from exact
diagonalization with greedy max-overlap labeling or from numeric
Rayleigh-Schroedinger perturbation theory on the uncoupled basis.

Shift values are MHz everywhere in this module; energies are GHz.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NearDegenerateError, OverlapError, RegimeError
from .fockspace import (
    CircuitSpec,
    FockBasis,
    assemble_hamiltonian,
    bare_energies,
    basis_for,
)

GHZ_TO_MHZ = 1e3
OVERLAP_THRESHOLD = 0.5
PT_GUARD_GHZ = 0.010


Label = tuple[int, ...]


@dataclass(frozen=True)
class LabeledSpectrum:
    """Energies (GHz) and assignment overlaps keyed by bare occupation label."""

    mode_names: tuple[str, ...]
    entries: Mapping[Label, tuple[float, float]]
    method: str = "exact"

    def energy(self, label: Sequence[int]) -> float:
        try:
            return self.entries[tuple(label)][0]
        except KeyError:
            raise ConfigError(f"label {tuple(label)} not in spectrum") from None

    def overlap(self, label: Sequence[int]) -> float:
        return self.entries[tuple(label)][1]

    def excited(self, names: Iterable[str]) -> Label:
        names = set(names)
        unknown = names - set(self.mode_names)
        if unknown:
            raise ConfigError(f"unknown modes {sorted(unknown)}")
        return tuple(1 if n in names else 0 for n in self.mode_names)

    def transition(self, lower: Sequence[int], upper: Sequence[int]) -> float:
        return self.energy(upper) - self.energy(lower)


def _eigh(H) -> tuple[np.ndarray, np.ndarray]:
    if sp.issparse(H):
        H = H.toarray()
    return np.linalg.eigh(H)


def assign_labels(vectors: np.ndarray, rows: Sequence[int]) -> dict[int, tuple[int, float]]:
    """Greedy max-overlap assignment of eigenvectors to basis rows.

    Returns ``row -> (eigen column, overlap probability)``. Pairs are taken in
    order of descending overlap; each row and each eigenvector is used once.
    """
    rows = list(rows)
    probs = np.abs(vectors[rows, :]) ** 2
    order = np.argsort(-probs, axis=None, kind="stable")
    taken_rows: dict[int, tuple[int, float]] = {}
    taken_cols: set[int] = set()
    for flat in order:
        r, c = divmod(int(flat), probs.shape[1])
        if rows[r] in taken_rows or c in taken_cols:
            continue
        taken_rows[rows[r]] = (c, float(probs[r, c]))
        taken_cols.add(c)
        if len(taken_rows) == len(rows):
            break
    return taken_rows


def labeled_spectrum(
    H,
    basis: FockBasis,
    labels: Iterable[Sequence[int]],
    mode_names: Sequence[str] | None = None,
    threshold: float = OVERLAP_THRESHOLD,
) -> LabeledSpectrum:
    """Diagonalize ``H`` and attach each requested bare label to one eigenvalue."""
    labels = [tuple(int(v) for v in lab) for lab in labels]
    rows = [basis.index(lab) for lab in labels]
    dense = H.toarray() if sp.issparse(H) else np.asarray(H)
    off = dense - np.diag(np.diag(dense))
    if not np.any(off):
        # uncoupled: eigenvectors are the basis itself, no eigensolver ambiguity
        diag = np.real(np.diag(dense))
        entries = {lab: (float(diag[r]), 1.0) for lab, r in zip(labels, rows)}
    else:
        evals, evecs = _eigh(dense)
        picked = assign_labels(evecs, rows)
        entries = {}
        for lab, r in zip(labels, rows):
            col, prob = picked[r]
            entries[lab] = (float(evals[col]), prob)
        worst = min(entries, key=lambda lab: entries[lab][1])
        if entries[worst][1] < threshold:
            raise OverlapError(
                f"label {worst} has overlap {entries[worst][1]:.3f} < {threshold}; "
                "the spectrum is not dispersive",
                label=worst,
                overlap=entries[worst][1],
            )
    names = tuple(mode_names) if mode_names is not None else tuple(f"m{k}" for k in range(len(basis.levels)))
    return LabeledSpectrum(names, entries, "exact")


def computational_labels(spec: CircuitSpec) -> list[Label]:
    """All labels with 0/1 on the non-coupler modes and 0 on couplers."""
    qubit_idx = [k for k, m in enumerate(spec.modes) if m.role != "coupler"]
    out = []
    for bits in itertools.product((0, 1), repeat=len(qubit_idx)):
        lab = [0] * len(spec.modes)
        for k, b in zip(qubit_idx, bits):
            lab[k] = b
        out.append(tuple(lab))
    return out


def spectrum_of(
    spec: CircuitSpec,
    labels: Iterable[Sequence[int]] | None = None,
    *,
    max_excitations: int | None = None,
    threshold: float = OVERLAP_THRESHOLD,
) -> LabeledSpectrum:
    basis = basis_for(spec, max_excitations)
    H = assemble_hamiltonian(spec, basis=basis, sparse=False)
    labels = computational_labels(spec) if labels is None else labels
    return labeled_spectrum(H, basis, labels, spec.names, threshold)


# ---------------------------------------------------------------------------
# shift algebra
# ---------------------------------------------------------------------------


def _subset_key(subset: Iterable[str], order: Sequence[str]) -> tuple[str, ...]:
    s = set(subset)
    unknown = s - set(order)
    if unknown:
        raise ConfigError(f"unknown modes {sorted(unknown)} in subset")
    return tuple(n for n in order if n in s)


def bare_shift(spectrum: LabeledSpectrum, subset: Iterable[str]) -> float:
    """Alternating energy sum for ``subset``, in MHz."""
    key = _subset_key(subset, spectrum.mode_names)
    if not key:
        raise ConfigError("empty subset")
    total = spectrum.energy(spectrum.excited(key))
    for name in key:
        total -= spectrum.energy(spectrum.excited((name,)))
    total += (len(key) - 1) * spectrum.energy(spectrum.excited(()))
    return total * GHZ_TO_MHZ


def strict_subsets(key: Sequence[str], min_size: int = 2):
    for r in range(min_size, len(key)):
        yield from itertools.combinations(key, r)


def full_shift(full_values: Mapping[tuple[str, ...], float], subset: Sequence[str], bare: float) -> float:
    """Subtract every lower-order full shift of ``subset`` from its bare value.

    ``full_values`` must already hold all strict subsets of size >= 2, keyed by
    name tuples in the same order as ``subset``.
    """
    subset = tuple(subset)
    value = bare
    for sub in strict_subsets(subset):
        if sub not in full_values:
            raise ConfigError(f"prerequisite subset {sub} missing for {subset}")
        value -= full_values[sub]
    return value


@dataclass
class ShiftTable:
    mode_names: tuple[str, ...]
    entries: dict[tuple[str, ...], tuple[float, float]] = field(default_factory=dict)
    method: str = "exact"

    def chi(self, subset: Iterable[str], kind: str = "full") -> float:
        key = _subset_key(subset, self.mode_names)
        bare, full = self.entries[key]
        return full if kind == "full" else bare

    def subsets(self) -> list[tuple[str, ...]]:
        return list(self.entries)

    def recursion_residual(self) -> float:
        """Largest violation of ``full(S) + sum_T full(T) == bare(S)``, MHz."""
        worst = 0.0
        for key, (bare, full) in self.entries.items():
            lower = sum(self.entries[t][1] for t in strict_subsets(key))
            worst = max(worst, abs(full + lower - bare))
        return worst

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subset", "chi_bare_mhz", "chi_full_mhz", "method"])
        for key, (bare, full) in self.entries.items():
            w.writerow(["+".join(key), _fmt(bare), _fmt(full), self.method])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, mode_names: Sequence[str] | None = None) -> "ShiftTable":
        text = Path(source).read_text() if _is_path(source) else str(source)
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ConfigError("empty shift table")
        names: list[str] = list(mode_names or [])
        entries = {}
        method = rows[0].get("method", "exact")
        for row in rows:
            key = tuple(row["subset"].split("+"))
            if not mode_names:
                for n in key:
                    if n not in names:
                        names.append(n)
            full = float(row["chi_full_mhz"])
            bare = float(row["chi_bare_mhz"]) if row.get("chi_bare_mhz") not in (None, "") else math.nan
            entries[key] = (bare, full)
        return cls(tuple(names), entries, method)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "modes": list(self.mode_names),
            "shifts": [
                {"subset": list(k), "chi_bare_mhz": b, "chi_full_mhz": f} for k, (b, f) in self.entries.items()
            ],
        }


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.6f}"


def _is_path(source) -> bool:
    if isinstance(source, Path):
        return True
    return "\n" not in str(source) and Path(str(source)).exists()


def table_from_spectrum(spectrum: LabeledSpectrum, names: Sequence[str], method: str) -> ShiftTable:
    table = ShiftTable(tuple(names), {}, method)
    full_values: dict[tuple[str, ...], float] = {}
    for r in range(2, len(names) + 1):
        for key in itertools.combinations(names, r):
            bare = bare_shift(spectrum, key)
            full = full_shift(full_values, key, bare)
            full_values[key] = full
            table.entries[key] = (bare, full)
    return table


def shift_table(
    spec: CircuitSpec,
    method: str = "exact",
    *,
    max_excitations: int | None = None,
    threshold: float = OVERLAP_THRESHOLD,
    guard: float = PT_GUARD_GHZ,
) -> ShiftTable:
    """Shift table over every subset (size >= 2) of the non-coupler modes.

    ``method`` is ``"exact"`` or ``"pt2"``, ``"pt3"``, ``"pt4"``.
    """
    qubits = spec.qubits
    idle = [m.name for m in spec.modes if m.role == "coupler" and not spec.neighbours(m.name)]
    if idle:
        # edgeless spectator couplers only add a constant ladder; leave them out
        spec = spec.subcircuit([n for n in spec.names if n not in idle])
    if len(qubits) < 2:
        raise ConfigError("need at least two non-coupler modes for a shift table")
    labels = computational_labels(spec)
    if method == "exact":
        spectrum = spectrum_of(spec, labels, max_excitations=max_excitations, threshold=threshold)
    elif method.startswith("pt") and method[2:].isdigit():
        spectrum = pt_energies(spec, int(method[2:]), labels, guard=guard, max_excitations=max_excitations)
    else:
        raise ConfigError(f"unknown shift method {method!r}")
    # mode_names of the spectrum include couplers; the table is over qubits only
    return table_from_spectrum(spectrum, qubits, spectrum.method)


# ---------------------------------------------------------------------------
# perturbation theory
# ---------------------------------------------------------------------------


def pt_energies(
    spec: CircuitSpec,
    order: int,
    labels: Iterable[Sequence[int]] | None = None,
    *,
    guard: float = PT_GUARD_GHZ,
    max_excitations: int | None = None,
) -> LabeledSpectrum:
    """Non-degenerate Rayleigh-Schroedinger energies through ``order``.

    The unperturbed part is the uncoupled Hamiltonian; the perturbation is
    every coupling term. Any intermediate state reached with an energy
    denominator below ``guard`` (GHz) raises rather than returning a divergent
    number.
    """
    if order not in (2, 3, 4):
        raise ConfigError(f"perturbation order must be 2, 3 or 4, got {order}")
    basis = basis_for(spec, max_excitations)
    e0 = bare_energies(spec, basis)
    H = assemble_hamiltonian(spec, basis=basis, sparse=True)
    V = (H - sp.diags(e0)).tocsr()
    labels = computational_labels(spec) if labels is None else [tuple(l) for l in labels]
    entries = {}
    for lab in labels:
        n = basis.index(lab)
        corrections = _rs_series(e0, V, n, order, guard, basis)
        entries[tuple(lab)] = (float(e0[n] + sum(corrections)), 1.0)
    return LabeledSpectrum(spec.names, entries, f"pt{order}")


def _rs_series(e0: np.ndarray, V, n: int, order: int, guard: float, basis: FockBasis) -> list[float]:
    dim = len(e0)
    gaps = e0[n] - e0
    psi = [np.zeros(dim)]
    psi[0][n] = 1.0
    energies = [0.0]  # E^(0) is e0[n], carried separately
    for m in range(1, order + 1):
        energies.append(float((V[n] @ psi[m - 1])[0]))
        if m == order:
            break
        rhs = V @ psi[m - 1] - sum(energies[k] * psi[m - k] for k in range(1, m + 1))
        rhs[n] = 0.0
        reached = np.nonzero(np.abs(rhs) > 1e-15)[0]
        close = reached[np.abs(gaps[reached]) < guard - 1e-12]
        if close.size:
            k = int(close[np.argmin(np.abs(gaps[close]))])
            raise NearDegenerateError(
                f"energy denominator {abs(gaps[k]) * 1e3:.3f} MHz between {basis.label(n)} and "
                f"{basis.label(k)} is below the {guard * 1e3:.1f} MHz guard at order {m + 1}",
                pair=(basis.label(n), basis.label(k)),
                gap=float(gaps[k]),
            )
        nxt = np.zeros(dim)
        nxt[reached] = rhs[reached] / gaps[reached]
        psi.append(nxt)
    return energies[1:]


def pairwise_shift_second_order(spec: CircuitSpec, i: str, j: str) -> float:
    """Closed-form second-order ZZ shift of a coupled pair, MHz.

    For coupling ``g (x - x^dag)(y - y^dag)`` with detuning ``d = w_i - w_j`` and
    sum ``s = w_i + w_j``:

        -4g^2/(a_i+a_j+s) + 2g^2/(a_i+s) - 2g^2/(a_i+d) + 2g^2/(a_j+s) - 2g^2/(a_j-d)

    The remaining ``+-g^2/s`` and ``+-g^2/d`` terms of the expansion cancel
    identically and are left out. Only the direct coupling between ``i`` and
    ``j`` enters.
    """
    mi, mj = spec.mode(i), spec.mode(j)
    g = spec.coupling(i, j)
    if g == 0.0:
        return 0.0
    d = mi.freq - mj.freq
    s = mi.freq + mj.freq
    ai, aj = mi.anharm, mj.anharm
    denominators = {
        "a_i+a_j+s": ai + aj + s,
        "a_i+s": ai + s,
        "a_i+d": ai + d,
        "a_j+s": aj + s,
        "a_j-d": aj - d,
    }
    for name, value in denominators.items():
        if abs(value) < 1e-3:
            raise RegimeError(f"denominator {name} = {value * 1e3:.3f} MHz is within 1 MHz of zero")
    g2 = g * g
    chi = (
        -4 * g2 / denominators["a_i+a_j+s"]
        + 2 * g2 / denominators["a_i+s"]
        - 2 * g2 / denominators["a_i+d"]
        + 2 * g2 / denominators["a_j+s"]
        - 2 * g2 / denominators["a_j-d"]
    )
    return chi * GHZ_TO_MHZ

"""Truncated multi-mode bosonic operators and Hamiltonian assembly.

Every mode is a Duffing oscillator

    H_0 = freq * n + (anharm / 2) * n (n - 1)

and every coupling edge contributes ``g (x - x^dag)(y - y^dag)``, counter-rotating
parts included. Frequencies are plain GHz throughout; the 2*pi only appears in
the propagators.

Basis ordering is row-major with the first listed mode as the most significant
digit, so for four three-level modes ``|1000>`` sits at index 27.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NumericalError

Role = Literal["data", "ancilla", "coupler"]
ROLES = ("data", "ancilla", "coupler")

DEFAULT_MAX_DIM = 200_000
DENSE_MAX_DIM = 1_000


@dataclass(frozen=True)
class ModeSpec:
    name: str
    role: Role
    freq: float  # GHz
    anharm: float  # GHz, usually negative
    levels: int = 3

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("mode name must be a non-empty string", "name")
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r}, expected one of {ROLES}", f"{self.name}.role")
        if int(self.levels) != self.levels or self.levels < 2:
            raise ConfigError(f"levels must be an integer >= 2, got {self.levels}", f"{self.name}.levels")
        if not (math.isfinite(self.freq) and self.freq > 0):
            raise ConfigError(f"freq must be positive and finite, got {self.freq}", f"{self.name}.freq")
        if not math.isfinite(self.anharm):
            raise ConfigError("anharm must be finite", f"{self.name}.anharm")
        if self.anharm > 0:
            warnings.warn(f"mode {self.name} has positive anharmonicity {self.anharm}", stacklevel=3)


@dataclass(frozen=True)
class CouplingEdge:
    a: str
    b: str
    g: float  # GHz

    def __post_init__(self):
        if self.a == self.b:
            raise ConfigError(f"self-coupling on {self.a!r}", "edges")
        if not math.isfinite(self.g):
            raise ConfigError(f"coupling {self.a}-{self.b} is not finite", "edges")

    @property
    def key(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class CircuitSpec:
    modes: tuple[ModeSpec, ...]
    edges: tuple[CouplingEdge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "edges", tuple(self.edges))
        names = [m.name for m in self.modes]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate mode names in {names}", "modes")
        seen = set()
        for k, e in enumerate(self.edges):
            for end in (e.a, e.b):
                if end not in names:
                    raise ConfigError(f"edge endpoint {end!r} is not a mode", f"edges[{k}]")
            if e.key in seen:
                raise ConfigError(f"duplicate edge {e.a}-{e.b}", f"edges[{k}]")
            seen.add(e.key)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(m.levels for m in self.modes)

    @property
    def dim(self) -> int:
        return math.prod(self.levels)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown mode {name!r}") from None

    def mode(self, name: str) -> ModeSpec:
        return self.modes[self.index(name)]

    def coupling(self, a: str, b: str) -> float:
        key = frozenset((a, b))
        for e in self.edges:
            if e.key == key:
                return e.g
        return 0.0

    def neighbours(self, name: str) -> list[tuple[str, float]]:
        out = []
        for e in self.edges:
            if e.a == name:
                out.append((e.b, e.g))
            elif e.b == name:
                out.append((e.a, e.g))
        return out

    def by_role(self, role: Role) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes if m.role == role)

    @property
    def qubits(self) -> tuple[str, ...]:
        """Non-coupler modes in listing order (data and ancilla)."""
        return tuple(m.name for m in self.modes if m.role != "coupler")

    def with_levels(self, levels: int | Mapping[str, int]) -> "CircuitSpec":
        if isinstance(levels, Mapping):
            modes = [replace(m, levels=levels.get(m.name, m.levels)) for m in self.modes]
        else:
            modes = [replace(m, levels=int(levels)) for m in self.modes]
        return CircuitSpec(tuple(modes), self.edges)

    def with_mode(self, name: str, **changes) -> "CircuitSpec":
        modes = [replace(m, **changes) if m.name == name else m for m in self.modes]
        return CircuitSpec(tuple(modes), self.edges)

    def with_coupling(self, a: str, b: str, g: float) -> "CircuitSpec":
        key = frozenset((a, b))
        edges = [e for e in self.edges if e.key != key]
        edges.append(CouplingEdge(a, b, g))
        return CircuitSpec(self.modes, tuple(edges))

    def without_couplings(self) -> "CircuitSpec":
        return CircuitSpec(self.modes, tuple(CouplingEdge(e.a, e.b, 0.0) for e in self.edges))

    def subcircuit(self, names: Iterable[str]) -> "CircuitSpec":
        keep = set(names)
        modes = tuple(m for m in self.modes if m.name in keep)
        edges = tuple(e for e in self.edges if e.a in keep and e.b in keep)
        return CircuitSpec(modes, edges)

    def to_dict(self) -> dict:
        return {
            "modes": [
                {"name": m.name, "role": m.role, "freq": m.freq, "anharm": m.anharm, "levels": m.levels}
                for m in self.modes
            ],
            "edges": [{"a": e.a, "b": e.b, "g": e.g} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping, path: str = "circuit") -> "CircuitSpec":
        if not isinstance(data, Mapping):
            raise ConfigError("expected an object with 'modes' and 'edges'", path)
        unknown = set(data) - {"modes", "edges", "description"}
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}", path)
        raw_modes = data.get("modes")
        if not isinstance(raw_modes, list) or not raw_modes:
            raise ConfigError("'modes' must be a non-empty list", f"{path}.modes")
        modes = []
        for k, m in enumerate(raw_modes):
            where = f"{path}.modes[{k}]"
            if not isinstance(m, Mapping):
                raise ConfigError("mode entry must be an object", where)
            missing = {"name", "role", "freq", "anharm"} - set(m)
            if missing:
                raise ConfigError(f"missing fields {sorted(missing)}", where)
            unknown = set(m) - {"name", "role", "freq", "anharm", "levels"}
            if unknown:
                raise ConfigError(f"unknown fields {sorted(unknown)}", where)
            try:
                modes.append(
                    ModeSpec(
                        name=str(m["name"]),
                        role=m["role"],
                        freq=float(m["freq"]),
                        anharm=float(m["anharm"]),
                        levels=int(m.get("levels", 3)),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), where) from None
        edges = []
        for k, e in enumerate(data.get("edges", [])):
            where = f"{path}.edges[{k}]"
            if not isinstance(e, Mapping) or set(e) != {"a", "b", "g"}:
                raise ConfigError("edge needs exactly the fields a, b, g", where)
            try:
                edges.append(CouplingEdge(str(e["a"]), str(e["b"]), float(e["g"])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), where) from None
        try:
            return cls(tuple(modes), tuple(edges))
        except ConfigError as exc:
            raise ConfigError(str(exc), path) from None


# ---------------------------------------------------------------------------
# basis bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FockBasis:
    """Enumerated occupation basis, optionally cut at a total excitation number.

    Without a cutoff this is the full tensor product in row-major order. With
    ``max_excitations`` only labels whose occupations sum to at most that
    number are kept, in the same relative order.
    """

    levels: tuple[int, ...]
    max_excitations: int | None = None
    max_dim: int = DEFAULT_MAX_DIM
    _labels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(x) for x in self.levels))
        full = math.prod(self.levels)
        if self.max_excitations is None:
            if full > self.max_dim:
                raise NumericalError(
                    f"Hilbert dimension {full} exceeds the cap of {self.max_dim} basis states; "
                    "lower the truncation or set an excitation cutoff"
                )
            labels = np.array(list(itertools.product(*(range(n) for n in self.levels))), dtype=np.int64)
        else:
            labels = np.array(
                [t for t in _bounded_labels(self.levels, self.max_excitations)], dtype=np.int64
            ).reshape(-1, len(self.levels))
            if len(labels) > self.max_dim:
                raise NumericalError(
                    f"cut basis has {len(labels)} states, above the cap of {self.max_dim}"
                )
        object.__setattr__(self, "_labels", labels)

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def dim(self) -> int:
        return len(self._labels)

    @cached_property
    def _lookup(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in row): i for i, row in enumerate(self._labels)}

    def index(self, label: Sequence[int]) -> int:
        label = tuple(int(v) for v in label)
        if len(label) != len(self.levels):
            raise ConfigError(f"label {label} has {len(label)} entries, expected {len(self.levels)}")
        for n, lv in zip(label, self.levels):
            if n < 0 or n >= lv:
                raise ConfigError(f"occupation {n} outside truncation {lv} in label {label}")
        try:
            return self._lookup[label]
        except KeyError:
            raise ConfigError(f"label {label} is beyond the excitation cutoff {self.max_excitations}") from None

    def label(self, index: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self._labels[index])

    def computational_indices(self, modes: Sequence[int]) -> list[int]:
        """Indices of labels with occupations in {0,1} on ``modes`` and 0 elsewhere.

        Ordered row-major over ``modes``.
        """
        out = []
        for bits in itertools.product((0, 1), repeat=len(modes)):
            lab = [0] * len(self.levels)
            for m, b in zip(modes, bits):
                lab[m] = b
            out.append(self.index(lab))
        return out


def _bounded_labels(levels: Sequence[int], budget: int):
    if not levels:
        yield ()
        return
    for n in range(min(levels[0] - 1, budget) + 1):
        for rest in _bounded_labels(levels[1:], budget - n):
            yield (n,) + rest


def basis_for(spec: CircuitSpec, max_excitations: int | None = None, max_dim: int = DEFAULT_MAX_DIM) -> FockBasis:
    return FockBasis(spec.levels, max_excitations, max_dim)


def basis_index(spec: CircuitSpec, label: Sequence[int]) -> int:
    """Row-major index of an occupation label, first mode most significant."""
    label = tuple(int(v) for v in label)
    if len(label) != len(spec.modes):
        raise ConfigError(f"label {label} does not match {len(spec.modes)} modes")
    for n, m in zip(label, spec.modes):
        if not 0 <= n < m.levels:
            raise ConfigError(f"occupation {n} of mode {m.name} outside 0..{m.levels - 1}")
    return int(np.ravel_multi_index(label, spec.levels))


def basis_label(spec: CircuitSpec, index: int) -> tuple[int, ...]:
    if not 0 <= index < spec.dim:
        raise ConfigError(f"index {index} outside 0..{spec.dim - 1}")
    return tuple(int(v) for v in np.unravel_index(index, spec.levels))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def ladder_term(basis: FockBasis, shifts: Mapping[int, int]) -> sp.csr_matrix:
    """Matrix of a product of ladder operators on distinct modes.

    ``shifts`` maps mode index to -1 (annihilation) or +1 (creation). Elements are
    evaluated label by label, so products are exact even in a cut basis where
    multiplying truncated matrices would drop intermediate states.
    """
    labels = basis.labels
    rows, vals = [], []
    target = labels.copy()
    amp = np.ones(len(labels))
    ok = np.ones(len(labels), dtype=bool)
    for mode, d in shifts.items():
        n = labels[:, mode]
        if d == -1:
            ok &= n > 0
            amp *= np.sqrt(np.maximum(n, 0))
        elif d == 1:
            ok &= n + 1 < basis.levels[mode]
            amp *= np.sqrt(n + 1)
        else:
            raise ValueError(f"shift must be +-1, got {d}")
        target[:, mode] = n + d
    cols = np.nonzero(ok)[0]
    if basis.max_excitations is None:
        rows = np.ravel_multi_index(target[cols].T, basis.levels)
        vals = amp[cols]
    else:
        lookup = basis._lookup
        kept = []
        for col in cols:
            row = lookup.get(tuple(int(v) for v in target[col]))
            if row is not None:
                rows.append(row)
                kept.append(col)
                vals.append(amp[col])
        cols = kept
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def build_operators(spec: CircuitSpec, mode: str, basis: FockBasis | None = None, sparse: bool | None = None):
    """Annihilation operator of ``mode`` embedded in the full space."""
    k = spec.index(mode)
    basis = basis or basis_for(spec)
    op = ladder_term(basis, {k: -1})
    return _maybe_dense(op, sparse)


def number_operator(spec: CircuitSpec, mode: str | None = None, basis: FockBasis | None = None):
    basis = basis or basis_for(spec)
    if mode is None:
        n = basis.labels.sum(axis=1)
    else:
        n = basis.labels[:, spec.index(mode)]
    return np.diag(n.astype(float))


def bare_energies(spec: CircuitSpec, basis: FockBasis | None = None) -> np.ndarray:
    """Diagonal of the uncoupled Hamiltonian, sum over modes of freq*n + anharm/2*n(n-1)."""
    basis = basis or basis_for(spec)
    n = basis.labels.astype(float)
    freq = np.array([m.freq for m in spec.modes])
    anh = np.array([m.anharm for m in spec.modes])
    return n @ freq + (n * (n - 1)) @ anh / 2


def assemble_hamiltonian(
    spec: CircuitSpec,
    *,
    rwa: bool = False,
    max_excitations: int | None = None,
    max_dim: int = DEFAULT_MAX_DIM,
    sparse: bool | None = None,
    basis: FockBasis | None = None,
):
    """Static Hamiltonian in GHz.

    ``rwa=True`` keeps only the number-conserving part ``-g (x^dag y + x y^dag)``
    of each coupling; it exists for testing block structure.
    Returns a dense array up to ``DENSE_MAX_DIM`` rows unless ``sparse`` says otherwise.
    """
    basis = basis or basis_for(spec, max_excitations, max_dim)
    H = sp.diags(bare_energies(spec, basis)).tocsr()
    for e in spec.edges:
        if e.g == 0.0:
            continue
        i, j = spec.index(e.a), spec.index(e.b)
        # (x - x^dag)(y - y^dag) = xy - x y^dag - x^dag y + x^dag y^dag
        term = -ladder_term(basis, {i: -1, j: 1}) - ladder_term(basis, {i: 1, j: -1})
        if not rwa:
            term = term + ladder_term(basis, {i: -1, j: -1}) + ladder_term(basis, {i: 1, j: 1})
        H = H + e.g * term
    H = H.tocsr()
    if sparse is None:
        sparse = basis.dim > DENSE_MAX_DIM
    return H if sparse else H.toarray()


def drive_operator(spec: CircuitSpec, mode: str, basis: FockBasis | None = None) -> np.ndarray:
    """``a + a^dag`` on one mode, dense."""
    a = build_operators(spec, mode, basis, sparse=False)
    return a + a.T


def hermiticity_error(H) -> float:
    """Relative Frobenius norm of ``H - H^dag``."""
    if sp.issparse(H):
        diff = spla.norm(H - H.conj().T)
        norm = spla.norm(H)
    else:
        diff = np.linalg.norm(H - H.conj().T)
        norm = np.linalg.norm(H)
    return float(diff / norm) if norm else float(diff)


def _maybe_dense(op: sp.csr_matrix, sparse: bool | None):
    if sparse is None:
        sparse = op.shape[0] > DENSE_MAX_DIM
    return op if sparse else op.toarray()

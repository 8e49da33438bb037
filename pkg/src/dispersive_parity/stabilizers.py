"""Ideal parity gates, X/Z stabilizer conversion and the CNOT-chain baseline.

Registers are ordered lists of qubit names; basis index bits follow the same
convention as the Fock basis (first listed qubit is the most significant bit).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigError

Parity = Literal["odd", "even"]

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


@dataclass(frozen=True)
class ParityGateSpec:
    data_modes: tuple[str, ...]
    ancilla: str
    parity: Parity = "odd"

    def __post_init__(self):
        object.__setattr__(self, "data_modes", tuple(self.data_modes))
        if self.parity not in ("odd", "even"):
            raise ConfigError(f"parity must be 'odd' or 'even', got {self.parity!r}")
        if self.ancilla in self.data_modes:
            raise ConfigError(f"ancilla {self.ancilla!r} is also listed as a data qubit")
        if len(set(self.data_modes)) != len(self.data_modes):
            raise ConfigError("duplicate data qubits")

    def default_register(self) -> tuple[str, ...]:
        return (self.ancilla, *self.data_modes)


def _register(gate: ParityGateSpec, register: Sequence[str] | int | None) -> tuple[str, ...]:
    if register is None:
        return gate.default_register()
    if isinstance(register, int):
        reg = gate.default_register()
        if register < len(reg):
            raise ConfigError(f"register of {register} qubits cannot hold {len(reg)} named modes")
        extra = tuple(f"_idle{k}" for k in range(register - len(reg)))
        return reg + extra
    reg = tuple(register)
    if len(set(reg)) != len(reg):
        raise ConfigError("register names collide")
    missing = set(gate.default_register()) - set(reg)
    if missing:
        raise ConfigError(f"register lacks {sorted(missing)}")
    return reg


def parity_permutation(gate: ParityGateSpec, register: Sequence[str] | int | None = None) -> np.ndarray:
    """Image index of every basis state under the ideal gate."""
    reg = _register(gate, register)
    n = len(reg)
    anc = reg.index(gate.ancilla)
    data = [reg.index(d) for d in gate.data_modes]
    want = 1 if gate.parity == "odd" else 0
    image = np.empty(2**n, dtype=int)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=n)):
        out = list(bits)
        if sum(bits[k] for k in data) % 2 == want:
            out[anc] ^= 1
        image[idx] = int("".join(map(str, out)), 2)
    return image


def ideal_parity_unitary(gate: ParityGateSpec, register: Sequence[str] | int | None = None) -> np.ndarray:
    """Permutation matrix flipping the ancilla exactly when the data parity matches."""
    image = parity_permutation(gate, register)
    U = np.zeros((len(image), len(image)))
    U[image, np.arange(len(image))] = 1.0
    return U


def _hadamards(register: Sequence[str], on: Sequence[str]) -> np.ndarray:
    on = set(on)
    unknown = on - set(register)
    if unknown:
        raise ConfigError(f"unknown qubits {sorted(unknown)}")
    out = np.ones((1, 1))
    for name in register:
        out = np.kron(out, HADAMARD if name in on else np.eye(2))
    return out


def x_from_z_transform(U: np.ndarray, data_modes: Sequence[str], register: Sequence[str]) -> np.ndarray:
    """Conjugate ``U`` by Hadamards on ``data_modes``.

    Passing a subset of the data qubits gives mixed stabilizers such as XZZX.
    """
    register = tuple(register)
    U = np.asarray(U)
    if U.shape != (2 ** len(register),) * 2:
        raise ConfigError(f"operator shape {U.shape} does not match a {len(register)}-qubit register")
    H = _hadamards(register, data_modes)
    return H @ U @ H


def cnot_chain_fidelity(n_cnots: int, f_cnot: float) -> float:
    """Product model: every CNOT in the chain succeeds independently."""
    if not 0.0 <= f_cnot <= 1.0:
        raise ConfigError(f"f_cnot must be in [0, 1], got {f_cnot}")
    if n_cnots < 0:
        raise ConfigError("n_cnots must be non-negative")
    return float(f_cnot) ** int(n_cnots)


def concatenated_parity(
    gates: Sequence[ParityGateSpec],
    register: Sequence[str] | None = None,
    atol: float = 1e-12,
    allow_overlap: bool = False,
) -> tuple[np.ndarray, bool | None]:
    """Product of parity gates applied left to right, plus an equivalence verdict.

    The verdict compares the product with the single odd-parity gate over the
    union of data qubits. It is ``None`` unless every gate is odd and the data
    sets are disjoint. Overlapping data sets raise unless ``allow_overlap``.
    """
    if not gates:
        raise ConfigError("need at least one parity gate")
    if not allow_overlap:
        check_disjoint(gates)
    anc = {g.ancilla for g in gates}
    if len(anc) != 1:
        raise ConfigError(f"gates must share one ancilla, found {sorted(anc)}")
    ancilla = anc.pop()
    union: list[str] = []
    for g in gates:
        for d in g.data_modes:
            if d not in union:
                union.append(d)
    if register is None:
        register = (ancilla, *union)
    total = None
    for g in gates:
        U = ideal_parity_unitary(g, register)
        total = U if total is None else U @ total
    verdict = None
    if all(g.parity == "odd" for g in gates):
        if sum(len(g.data_modes) for g in gates) == len(union):
            whole = ideal_parity_unitary(ParityGateSpec(tuple(union), ancilla, "odd"), register)
            verdict = bool(np.allclose(total, whole, atol=atol, rtol=0))
    return total, verdict


def check_disjoint(gates: Sequence[ParityGateSpec]) -> None:
    seen: set[str] = set()
    for g in gates:
        overlap = seen & set(g.data_modes)
        if overlap:
            raise ConfigError(f"data qubits {sorted(overlap)} appear in more than one gate")
        seen |= set(g.data_modes)

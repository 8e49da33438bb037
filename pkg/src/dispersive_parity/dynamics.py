"""Driven gate simulation: propagation, projection, phase correction and scoring.

Drive convention (GHz, plain frequency)::

    H_drive(t) = s * sum_k amp_k * env_k(t) * cos(2 pi f_k t + phase_k) * (a + a^dag)

with ``s = DRIVE_SCALE = 0.5``. In the rotating-wave limit a resonant drive then
Rabi-oscillates at ``amp / 2``, so a full population transfer takes ``1 / amp``.
``drive_scale=1`` gives the other common convention.

All propagation happens in the dressed eigenbasis of the static Hamiltonian,
with eigenvectors attached to bare labels by greedy overlap. Two integrators:

``lab``
    Strang splitting: exact free evolution for half steps around a drive kick
    ``exp(-2 pi i f(t_mid) X dt)`` evaluated through the eigendecomposition of
    the dressed drive operator ``X``.
``rotating``
    Interaction picture with respect to the dressed static Hamiltonian, keeping
    drive matrix elements whose rotating frequency is below ``rwa_cut``
    (rotating-wave approximation on the drive only). Midpoint exponential per
    step, then mapped back to the lab frame.

Both return the lab-frame propagator.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, NumericalError, OverlapError
from .fockspace import CircuitSpec, assemble_hamiltonian, basis_for, drive_operator
from .shifts import assign_labels
from .stabilizers import ParityGateSpec, ideal_parity_unitary

Frame = Literal["lab", "rotating"]
PhaseMode = Literal["local", "diagonal"]

DRIVE_SCALE = 0.5
RWA_CUT_GHZ = 0.5
STEPS_PER_PERIOD = 20
DEFAULT_DT_PS = {"lab": 1.0, "rotating": 100.0}
UNITARITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# drives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriveSpec:
    target: str
    amp: float
    freq: float
    phase: float = 0.0
    envelope: Literal["flat", "cosine-ramp"] = "flat"
    ramp_ns: float = 0.0

    def __post_init__(self):
        if not self.amp >= 0:
            raise ConfigError(f"drive amplitude must be >= 0, got {self.amp}", "amp")
        if not self.freq > 0:
            raise ConfigError(f"drive frequency must be > 0, got {self.freq}", "freq")
        if self.envelope not in ("flat", "cosine-ramp"):
            raise ConfigError(f"unknown envelope {self.envelope!r}", "envelope")
        if self.ramp_ns < 0:
            raise ConfigError("ramp_ns must be >= 0", "ramp_ns")

    def shape(self, t: np.ndarray, t_gate: float) -> np.ndarray:
        """Envelope in [0, 1] at times ``t`` (ns)."""
        t = np.asarray(t, dtype=float)
        if self.envelope == "flat" or self.ramp_ns == 0:
            return np.ones_like(t)
        r = min(self.ramp_ns, t_gate / 2)
        rise = 0.5 * (1 - np.cos(np.pi * np.clip(t / r, 0, 1)))
        fall = 0.5 * (1 - np.cos(np.pi * np.clip((t_gate - t) / r, 0, 1)))
        return np.minimum(rise, fall)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "amp": self.amp,
            "freq": self.freq,
            "phase": self.phase,
            "envelope": self.envelope,
            "ramp_ns": self.ramp_ns,
        }


# ---------------------------------------------------------------------------
# dressed frame
# ---------------------------------------------------------------------------


def computational_labels_of(spec: CircuitSpec) -> list[tuple[int, ...]]:
    idx = [k for k, m in enumerate(spec.modes) if m.role != "coupler"]
    out = []
    for bits in itertools.product((0, 1), repeat=len(idx)):
        lab = [0] * len(spec.modes)
        for k, b in zip(idx, bits):
            lab[k] = b
        out.append(tuple(lab))
    return out


@dataclass(frozen=True)
class DressedFrame:
    """Eigenbasis of the static Hamiltonian, columns ordered like the bare basis."""

    spec: CircuitSpec
    energies: np.ndarray
    vectors: np.ndarray
    overlaps: np.ndarray

    @classmethod
    def from_spec(cls, spec: CircuitSpec, threshold: float = 0.5) -> "DressedFrame":
        basis = basis_for(spec)
        H = assemble_hamiltonian(spec, basis=basis, sparse=False)
        evals, evecs = np.linalg.eigh(H)
        picked = assign_labels(evecs, range(basis.dim))
        cols = np.array([picked[r][0] for r in range(basis.dim)])
        overlaps = np.array([picked[r][1] for r in range(basis.dim)])
        V = evecs[:, cols]
        signs = np.sign(np.diag(V))
        signs[signs == 0] = 1.0
        V = V * signs
        frame = cls(spec, evals[cols], V, overlaps)
        comp = frame.computational_indices()
        worst = int(comp[np.argmin(overlaps[comp])])
        if overlaps[worst] < threshold:
            raise OverlapError(
                f"computational state {basis.label(worst)} has overlap {overlaps[worst]:.3f}",
                label=basis.label(worst),
                overlap=float(overlaps[worst]),
            )
        return frame

    @property
    def dim(self) -> int:
        return len(self.energies)

    def computational_indices(self) -> np.ndarray:
        basis = basis_for(self.spec)
        return np.array([basis.index(lab) for lab in computational_labels_of(self.spec)])

    def to_dressed(self, U: np.ndarray) -> np.ndarray:
        return self.vectors.T @ U @ self.vectors

    def to_bare(self, U: np.ndarray) -> np.ndarray:
        return self.vectors @ U @ self.vectors.T

    def drive_matrix(self, target: str) -> np.ndarray:
        return self.vectors.T @ drive_operator(self.spec, target) @ self.vectors

    def energy(self, label: Sequence[int]) -> float:
        return float(self.energies[basis_for(self.spec).index(label)])


def parity_drive_frequencies(spec: CircuitSpec, weights: Sequence[int] = (1, 3)) -> list[float]:
    """Ancilla transition frequency with ``w`` data qubits excited, for each ``w``.

    Averaged over all data subsets of that weight.
    """
    frame = DressedFrame.from_spec(spec)
    anc = spec.by_role("ancilla")
    if len(anc) != 1:
        raise ConfigError("parity drives need exactly one ancilla")
    data = spec.by_role("data")
    out = []
    for w in weights:
        if not 0 <= w <= len(data):
            raise ConfigError(f"weight {w} outside 0..{len(data)}")
        vals = []
        for subset in itertools.combinations(data, w):
            low = tuple(1 if n in subset else 0 for n in spec.names)
            high = tuple(1 if (n in subset or n == anc[0]) else 0 for n in spec.names)
            vals.append(frame.energy(high) - frame.energy(low))
        out.append(float(np.mean(vals)))
    return out


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


def _check_dt(dt_ns: float, fmax: float, what: str) -> None:
    if not dt_ns > 0:
        raise NumericalError(f"time step must be positive, got {dt_ns} ns")
    limit = 1.0 / (STEPS_PER_PERIOD * fmax) if fmax > 0 else math.inf
    if dt_ns > limit * (1 + 1e-9):
        raise NumericalError(
            f"dt = {dt_ns * 1e3:.3g} ps is too coarse for the {what} ({fmax:.3f} GHz); "
            f"need dt <= {limit * 1e3:.3g} ps"
        )


def _n_steps(t_gate: float, dt: float) -> tuple[int, float]:
    if not t_gate >= 0:
        raise ConfigError(f"gate time must be >= 0, got {t_gate}")
    n = max(1, int(math.ceil(t_gate / dt - 1e-9))) if t_gate > 0 else 0
    return n, (t_gate / n if n else 0.0)


def _drive_groups(frame: DressedFrame, drives: Sequence[DriveSpec]) -> dict[str, list[DriveSpec]]:
    groups: dict[str, list[DriveSpec]] = {}
    for d in drives:
        frame.spec.index(d.target)
        groups.setdefault(d.target, []).append(d)
    return groups


def _propagate_lab(frame, drives, t_gate, dt, scale) -> np.ndarray:
    fmax = max([m.freq for m in frame.spec.modes] + [d.freq for d in drives])
    _check_dt(dt, fmax, "fastest lab-frame frequency")
    n, h = _n_steps(t_gate, dt)
    E = frame.energies
    if n == 0:
        return np.eye(frame.dim, dtype=complex)
    groups = _drive_groups(frame, drives)
    if not groups:
        return np.diag(np.exp(-2j * np.pi * E * t_gate))
    t_mid = (np.arange(n) + 0.5) * h
    kicks = []
    for target, ds in groups.items():
        lam, W = np.linalg.eigh(frame.drive_matrix(target))
        f = sum(scale * d.amp * d.shape(t_mid, t_gate) * np.cos(2 * np.pi * d.freq * t_mid + d.phase) for d in ds)
        kicks.append((lam, W.astype(complex), f))
    half = np.exp(-1j * np.pi * E * h)
    full = half * half
    if len(kicks) == 1:
        # stay in the drive eigenbasis between kicks; one matrix product per step
        lam, W, f = kicks[0]
        Wd = W.conj().T
        free = Wd @ (full[:, None] * W)
        M = Wd @ np.diag(half)
        for k in range(n):
            M = np.exp(-2j * np.pi * f[k] * h * lam)[:, None] * M
            if k < n - 1:
                M = free @ M
        U = half[:, None] * (W @ M)
    else:
        U = np.diag(half).astype(complex)
        for k in range(n):
            for lam, W, f in kicks:
                U = W @ (np.exp(-2j * np.pi * f[k] * h * lam)[:, None] * (W.conj().T @ U))
            U = (full if k < n - 1 else half)[:, None] * U
    return U


def _rotating_terms(frame, drives, scale, cut):
    E = frame.energies
    gap = E[:, None] - E[None, :]
    terms = []
    for target, ds in _drive_groups(frame, drives).items():
        X = frame.drive_matrix(target)
        for d in ds:
            for sign in (+1, -1):
                nu = gap + sign * d.freq
                keep = (np.abs(nu) < cut) & (np.abs(X) > 0)
                rows, cols = np.nonzero(keep)
                amp = 0.5 * scale * d.amp * X[rows, cols]
                terms.append((d, rows, cols, amp, nu[rows, cols], sign * d.phase))
    return terms


def _rotating_step_hamiltonian(terms, dim, t, t_gate):
    H = np.zeros((dim, dim), dtype=complex)
    for d, rows, cols, amp, nu, ph in terms:
        env = d.shape(np.array([t]), t_gate)[0]
        np.add.at(H, (rows, cols), env * amp * np.exp(1j * (2 * np.pi * nu * t + ph)))
    return H


def _interaction_steps(frame, drives, t_gate, dt, scale, cut):
    """Yield (t_end, step propagator) in the interaction picture."""
    _check_dt(dt, cut, "rotating-wave cut")
    n, h = _n_steps(t_gate, dt)
    terms = _rotating_terms(frame, drives, scale, cut)
    for k in range(n):
        t = (k + 0.5) * h
        H = _rotating_step_hamiltonian(terms, frame.dim, t, t_gate)
        H = 0.5 * (H + H.conj().T)
        w, v = np.linalg.eigh(H)
        yield (k + 1) * h, (v * np.exp(-2j * np.pi * w * h)) @ v.conj().T


def _propagate_rotating(frame, drives, t_gate, dt, scale, cut) -> np.ndarray:
    U = np.eye(frame.dim, dtype=complex)
    for _, step in _interaction_steps(frame, drives, t_gate, dt, scale, cut):
        U = step @ U
    return np.exp(-2j * np.pi * frame.energies * t_gate)[:, None] * U


def propagate_dressed(
    frame: DressedFrame,
    drives: Sequence[DriveSpec],
    t_gate: float,
    dt_ps: float | None = None,
    frame_kind: Frame = "lab",
    *,
    drive_scale: float = DRIVE_SCALE,
    rwa_cut: float = RWA_CUT_GHZ,
) -> np.ndarray:
    """Lab-frame propagator expressed in the dressed basis."""
    if frame_kind not in ("lab", "rotating"):
        raise ConfigError(f"unknown frame {frame_kind!r}")
    dt = (DEFAULT_DT_PS[frame_kind] if dt_ps is None else dt_ps) * 1e-3
    if frame_kind == "lab":
        U = _propagate_lab(frame, drives, t_gate, dt, drive_scale)
    else:
        U = _propagate_rotating(frame, drives, t_gate, dt, drive_scale, rwa_cut)
    if not np.all(np.isfinite(U)):
        raise NumericalError("propagator has non-finite entries")
    err = unitarity_error(U)
    if err > UNITARITY_TOL:
        raise NumericalError(f"propagator is not unitary (max |U^dag U - I| = {err:.2e})")
    return U


def propagate_unitary(
    spec: CircuitSpec,
    drives: Sequence[DriveSpec],
    t_gate: float,
    dt_ps: float | None = None,
    frame: Frame = "lab",
    *,
    drive_scale: float = DRIVE_SCALE,
    rwa_cut: float = RWA_CUT_GHZ,
) -> np.ndarray:
    """Lab-frame propagator in the bare Fock basis. ``t_gate`` in ns, ``dt_ps`` in ps."""
    fr = DressedFrame.from_spec(spec)
    U = propagate_dressed(fr, drives, t_gate, dt_ps, frame, drive_scale=drive_scale, rwa_cut=rwa_cut)
    return fr.to_bare(U)


def unitarity_error(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(len(U)))))


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Projection:
    projected: np.ndarray
    leakage_per_column: np.ndarray
    leakage_total: float
    in_subspace_error: float | None


def project_and_leak(
    U: np.ndarray,
    indices: Sequence[int],
    ideal: np.ndarray | None = None,
) -> Projection:
    """Computational block of ``U`` and the population each column loses outside it.

    With ``ideal`` given, ``in_subspace_error`` is the population that stays in
    the subspace but lands on the wrong state, averaged over columns.
    """
    idx = np.asarray(indices)
    P = U[np.ix_(idx, idx)]
    kept = np.sum(np.abs(P) ** 2, axis=0)
    leak = np.clip(1.0 - kept, 0.0, 1.0)
    wrong = None
    if ideal is not None:
        right = np.sum(np.abs(P) ** 2 * (np.abs(ideal) > 0.5), axis=0)
        wrong = float(np.mean(kept - right))
    return Projection(P, leak, float(np.mean(leak)), wrong)


def process_fidelity(U1: np.ndarray, U2: np.ndarray) -> float:
    U1, U2 = np.asarray(U1), np.asarray(U2)
    if U1.shape != U2.shape or U1.shape[0] != U1.shape[1]:
        raise ConfigError(f"shape mismatch {U1.shape} vs {U2.shape}")
    return float(abs(np.trace(U1.conj().T @ U2)) / U1.shape[0])


def bit_table(n_qubits: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n_qubits)), dtype=float)


def local_phase_operator(angles: Sequence[float], n_qubits: int) -> np.ndarray:
    """Diagonal of ``exp(i (a0 + sum_k a_k n_k))`` over the qubit register."""
    angles = np.asarray(angles, dtype=float)
    return np.exp(1j * (angles[0] + bit_table(n_qubits) @ angles[1:]))


def _wrap(a: np.ndarray) -> np.ndarray:
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class PhaseCorrection:
    fidelity: float
    angles: np.ndarray
    mode: str

    def operator(self, n_qubits: int) -> np.ndarray:
        if self.mode == "local":
            return local_phase_operator(self.angles, n_qubits)
        return np.exp(1j * self.angles)


def phase_correct(
    projected: np.ndarray,
    ideal: np.ndarray,
    mode: PhaseMode = "local",
    *,
    n_starts: int = 8,
    seed: int = 0,
) -> PhaseCorrection:
    """Best ``|Tr(ideal^dag Phi^dag projected)| / d`` over diagonal phase gates ``Phi``.

    ``local``: ``Phi`` is a global phase times one Z rotation per qubit; the
    returned angles are (global, qubit 1, ..., qubit n) and describe the phases
    present in ``projected``. Nelder-Mead from ``n_starts`` seeded starts.

    ``diagonal``: ``Phi`` is any diagonal unitary, solved in closed form.
    """
    P, I = np.asarray(projected), np.asarray(ideal)
    if P.shape != I.shape:
        raise ConfigError(f"shape mismatch {P.shape} vs {I.shape}")
    d = P.shape[0]
    M = np.diag(P @ I.conj().T)  # Tr(I^dag D^dag P) = sum_k conj(D_k) M_k
    if mode == "diagonal":
        angles = np.angle(M)
        return PhaseCorrection(float(np.sum(np.abs(M)) / d), angles, mode)
    if mode != "local":
        raise ConfigError(f"unknown phase mode {mode!r}")
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise ConfigError(f"local phases need a qubit register, got dimension {d}")
    Z = bit_table(n)

    def overlap(theta: np.ndarray) -> complex:
        return np.sum(np.exp(-1j * (Z @ theta)) * M)

    def cost(theta):
        return -abs(overlap(theta)) / d

    rng = np.random.default_rng(seed)
    starts = [np.zeros(n)] + [rng.uniform(-np.pi, np.pi, n) for _ in range(max(0, n_starts - 1))]
    best = None
    for x0 in starts:
        res = minimize(cost, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
        if best is None or res.fun < best.fun - 1e-15:
            best = res
    theta = _wrap(best.x)
    glob = float(np.angle(overlap(theta)))
    return PhaseCorrection(float(-best.fun), _wrap(np.concatenate([[glob], theta])), mode)


@dataclass
class GateResult:
    unitary_full: np.ndarray
    unitary_dressed: np.ndarray
    projected: np.ndarray
    ideal: np.ndarray
    leakage_per_column: np.ndarray
    leakage_total: float
    in_subspace_error: float
    fidelity_raw: float
    fidelity_corrected: float
    phases: np.ndarray
    phase_mode: str
    t_gate: float
    frame: str
    register: tuple[str, ...]
    extra: dict = field(default_factory=dict)

    @property
    def population_fidelity(self) -> float:
        return float(np.sum(np.abs(self.projected) ** 2 * (self.ideal > 0.5)) / len(self.ideal))

    def to_dict(self) -> dict:
        return {
            "t_gate_ns": self.t_gate,
            "frame": self.frame,
            "register": list(self.register),
            "fidelity_raw": self.fidelity_raw,
            "fidelity_corrected": self.fidelity_corrected,
            "phase_mode": self.phase_mode,
            "phases": [float(p) for p in self.phases],
            "population_fidelity": self.population_fidelity,
            "leakage_total": self.leakage_total,
            "leakage_per_column": [float(x) for x in self.leakage_per_column],
            "in_subspace_error": self.in_subspace_error,
            **self.extra,
        }

    def magnitude_csv(self) -> str:
        labels = ["".join(map(str, bits)) for bits in itertools.product((0, 1), repeat=len(self.register))]
        lines = ["out\\in," + ",".join(labels)]
        for k, row in enumerate(np.abs(self.projected)):
            lines.append(labels[k] + "," + ",".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"


def parity_gate_for(spec: CircuitSpec, parity: str = "odd") -> tuple[ParityGateSpec, tuple[str, ...]]:
    anc = spec.by_role("ancilla")
    if len(anc) != 1:
        raise ConfigError(f"a parity gate needs exactly one ancilla, found {len(anc)}")
    register = spec.qubits
    return ParityGateSpec(spec.by_role("data"), anc[0], parity), register


def score_gate(
    frame: DressedFrame,
    U_dressed: np.ndarray,
    t_gate: float,
    *,
    parity: str = "odd",
    phase_mode: PhaseMode = "local",
    ideal: np.ndarray | None = None,
    frame_kind: str = "lab",
    seed: int = 0,
) -> GateResult:
    gate, register = parity_gate_for(frame.spec, parity)
    if ideal is None:
        ideal = ideal_parity_unitary(gate, register)
    proj = project_and_leak(U_dressed, frame.computational_indices(), ideal)
    corr = phase_correct(proj.projected, ideal, phase_mode, seed=seed)
    return GateResult(
        unitary_full=frame.to_bare(U_dressed),
        unitary_dressed=U_dressed,
        projected=proj.projected,
        ideal=ideal,
        leakage_per_column=proj.leakage_per_column,
        leakage_total=proj.leakage_total,
        in_subspace_error=float(proj.in_subspace_error),
        fidelity_raw=process_fidelity(ideal, proj.projected),
        fidelity_corrected=corr.fidelity,
        phases=corr.angles,
        phase_mode=phase_mode,
        t_gate=t_gate,
        frame=frame_kind,
        register=register,
    )


def simulate_gate(
    spec: CircuitSpec,
    drives: Sequence[DriveSpec],
    t_gate: float,
    *,
    dt_ps: float | None = None,
    frame: Frame = "lab",
    parity: str = "odd",
    phase_mode: PhaseMode = "local",
    ideal: np.ndarray | None = None,
    drive_scale: float = DRIVE_SCALE,
    rwa_cut: float = RWA_CUT_GHZ,
    seed: int = 0,
) -> GateResult:
    fr = DressedFrame.from_spec(spec)
    U = propagate_dressed(fr, drives, t_gate, dt_ps, frame, drive_scale=drive_scale, rwa_cut=rwa_cut)
    result = score_gate(fr, U, t_gate, parity=parity, phase_mode=phase_mode, ideal=ideal, frame_kind=frame, seed=seed)
    result.extra["dt_ps"] = float(dt_ps if dt_ps is not None else DEFAULT_DT_PS[frame])
    return result


# ---------------------------------------------------------------------------
# amplitude damping
# ---------------------------------------------------------------------------


def damping_kraus(levels: int, p: float) -> list[np.ndarray]:
    """Kraus operators of bosonic amplitude damping with one-quantum loss probability ``p``."""
    ops = []
    for l in range(levels):
        K = np.zeros((levels, levels))
        for n in range(l, levels):
            K[n - l, n] = math.sqrt(math.comb(n, l) * (1 - p) ** (n - l) * p**l)
        ops.append(K)
    return ops


def damping_superoperator(levels: int, p: float) -> np.ndarray:
    """``S[a, b, c, d]`` with ``rho'[a, b] = sum S[a, b, c, d] rho[c, d]``."""
    return sum(np.einsum("ac,bd->abcd", K, K.conj()) for K in damping_kraus(levels, p))


def _apply_local_channel(rho: np.ndarray, S: np.ndarray, k: int, n_modes: int) -> np.ndarray:
    """Apply a single-mode superoperator to a batch of tensor-shaped density matrices."""
    # rho: (batch, l0..l_{n-1}, l0..l_{n-1})
    ax_r, ax_c = 1 + k, 1 + n_modes + k
    out = np.tensordot(rho, S, axes=([ax_r, ax_c], [2, 3]))
    # tensordot appends the new (a, b) axes at the end; move them back
    return np.moveaxis(out, [-2, -1], [ax_r, ax_c])


@dataclass(frozen=True)
class DecoherenceResult:
    fidelity: float
    coherent_fidelity: float
    basis_fidelity_coherent: float
    basis_fidelity_damped: float
    deficit: float
    trace_error: float
    min_population: float
    t1_us: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "coherent_fidelity": self.coherent_fidelity,
            "basis_fidelity_coherent": self.basis_fidelity_coherent,
            "basis_fidelity_damped": self.basis_fidelity_damped,
            "deficit": self.deficit,
            "trace_error": self.trace_error,
            "min_population": self.min_population,
            "t1_us": [None if math.isinf(t) else t for t in self.t1_us],
        }


def decohered_fidelity(
    spec: CircuitSpec,
    drives: Sequence[DriveSpec],
    t_gate: float,
    t1_us: float | Sequence[float] | None,
    *,
    dt_ps: float = DEFAULT_DT_PS["rotating"],
    damping_every: int = 10,
    parity: str = "odd",
    phase_mode: PhaseMode = "diagonal",
    drive_scale: float = DRIVE_SCALE,
    rwa_cut: float = RWA_CUT_GHZ,
    seed: int = 0,
) -> DecoherenceResult:
    """Gate fidelity with amplitude damping on every qubit mode.

    The 16 computational inputs are propagated as density matrices with the
    rotating-frame integrator. Every ``damping_every`` steps the exact
    amplitude-damping channel for the elapsed time is applied to each mode in
    the label basis. The reported fidelity is the coherent phase-corrected
    process fidelity minus the drop in basis-averaged state fidelity that the
    damping causes. ``t1_us=None`` or ``inf`` switches damping off, in which
    case the result equals the coherent fidelity.
    """
    fr = DressedFrame.from_spec(spec)
    names = spec.names
    n = len(names)
    if t1_us is None:
        t1 = tuple(math.inf for _ in names)
    elif np.ndim(t1_us) == 0:
        t1 = tuple(float(t1_us) if spec.modes[k].role != "coupler" else math.inf for k in range(n))
    else:
        t1 = tuple(float(x) for x in t1_us)
        if len(t1) != n:
            raise ConfigError(f"need one T1 per mode ({n}), got {len(t1)}")
    if any(not t > 0 for t in t1):
        raise ConfigError("T1 must be positive")
    if damping_every < 1:
        raise ConfigError("damping_every must be >= 1")

    gate, register = parity_gate_for(spec, parity)
    ideal = ideal_parity_unitary(gate, register)
    comp = fr.computational_indices()
    target = comp[np.argmax(ideal, axis=0)]

    # coherent reference from the same integrator
    dt = dt_ps * 1e-3
    U_I = np.eye(fr.dim, dtype=complex)
    steps = list(_interaction_steps(fr, drives, t_gate, dt, drive_scale, rwa_cut))
    for _, s in steps:
        U_I = s @ U_I
    U = np.exp(-2j * np.pi * fr.energies * t_gate)[:, None] * U_I
    coherent = score_gate(fr, U, t_gate, parity=parity, phase_mode=phase_mode, ideal=ideal, frame_kind="rotating", seed=seed)
    basis_coherent = float(np.mean(np.abs(U[target, comp]) ** 2))

    if all(math.isinf(t) for t in t1):
        return DecoherenceResult(
            coherent.fidelity_corrected, coherent.fidelity_corrected, basis_coherent, basis_coherent, 0.0, 0.0, 0.0, t1
        )

    levels = spec.levels
    shape = (len(comp), *levels, *levels)
    rho = np.zeros((len(comp), fr.dim, fr.dim), dtype=complex)
    rho[np.arange(len(comp)), comp, comp] = 1.0
    E = fr.energies
    block = np.eye(fr.dim, dtype=complex)
    last_t = 0.0
    for k, (t_end, s) in enumerate(steps):
        block = s @ block
        if (k + 1) % damping_every and k != len(steps) - 1:
            continue
        rho = block @ rho @ block.conj().T
        block = np.eye(fr.dim, dtype=complex)
        elapsed = t_end - last_t
        last_t = t_end
        phase = np.exp(-2j * np.pi * E * t_end)
        frame_phase = np.outer(phase, phase.conj())
        r = (rho * frame_phase).reshape(shape)
        for m, T in enumerate(t1):
            if math.isinf(T):
                continue
            p = -math.expm1(-elapsed / (T * 1e3))
            r = _apply_local_channel(r, damping_superoperator(levels[m], p), m, n)
        rho = r.reshape(len(comp), fr.dim, fr.dim) / frame_phase
    pops = np.real(np.einsum("kii->ki", rho))
    basis_damped = float(np.mean(pops[np.arange(len(comp)), target]))
    trace_err = float(np.max(np.abs(pops.sum(axis=1) - 1.0)))
    deficit = basis_coherent - basis_damped
    return DecoherenceResult(
        coherent.fidelity_corrected - deficit,
        coherent.fidelity_corrected,
        basis_coherent,
        basis_damped,
        deficit,
        trace_err,
        float(pops.min()),
        t1,
    )


# ---------------------------------------------------------------------------
# phase closure
# ---------------------------------------------------------------------------


def phase_closure_time(chi_mhz: float, t_min_ns: float = 0.0) -> float:
    """Smallest multiple of ``1/|chi|`` (ns) that is at least ``t_min_ns``."""
    if chi_mhz == 0 or not math.isfinite(chi_mhz):
        raise ConfigError("chi must be finite and non-zero")
    period = 1e3 / abs(chi_mhz)
    k = max(1, math.ceil(t_min_ns / period - 1e-9))
    return k * period

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import two_mode
from dispersive_parity.errors import ConfigError, NumericalError
from dispersive_parity.dynamics import (
    DressedFrame,
    DriveSpec,
    damping_kraus,
    decohered_fidelity,
    local_phase_operator,
    parity_drive_frequencies,
    phase_closure_time,
    phase_correct,
    process_fidelity,
    project_and_leak,
    propagate_dressed,
    propagate_unitary,
    simulate_gate,
    unitarity_error,
)
from dispersive_parity.fockspace import CircuitSpec, ModeSpec, basis_index
from dispersive_parity.shifts import computational_labels, spectrum_of
from dispersive_parity.stabilizers import ParityGateSpec, ideal_parity_unitary

X = np.array([[0.0, 1.0], [1.0, 0.0]])


def qubit(freq=5.0, levels=2):
    return CircuitSpec((ModeSpec("a", "ancilla", freq, -0.3, levels),), ())


def random_unitary(d, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture(scope="module")
def pair():
    """Ancilla plus one data qubit, driven on the data-excited ancilla line (a CNOT)."""
    spec = two_mode(w1=4.95, w2=5.28, g=0.03)
    (f1,) = parity_drive_frequencies(spec, weights=(1,))
    return spec, [DriveSpec("a", 0.002, f1)], 1 / 0.002


class TestDrive:
    def test_validation(self):
        with pytest.raises(ConfigError):
            DriveSpec("a", -0.1, 5.0)
        with pytest.raises(ConfigError):
            DriveSpec("a", 0.1, 0.0)
        with pytest.raises(ConfigError):
            DriveSpec("a", 0.1, 5.0, envelope="gauss")

    def test_ramp_envelope(self):
        d = DriveSpec("a", 0.1, 5.0, envelope="cosine-ramp", ramp_ns=10)
        env = d.shape(np.array([0.0, 5.0, 10.0, 50.0, 95.0, 100.0]), 100.0)
        np.testing.assert_allclose(env, [0.0, 0.5, 1.0, 1.0, 0.5, 0.0], atol=1e-12)

    def test_table1_drive_lines(self, table1):
        f1, f3 = parity_drive_frequencies(table1)
        assert f1 == pytest.approx(4.938, abs=1e-3)
        assert f3 == pytest.approx(4.929, abs=1e-3)


class TestPropagation:
    def test_zero_drive_is_diagonal(self):
        spec = two_mode()
        fr = DressedFrame.from_spec(spec)
        U = propagate_dressed(fr, [DriveSpec("a", 0.0, 4.9)], 50.0, dt_ps=5.0)
        np.testing.assert_allclose(np.abs(np.diag(U)), 1.0, atol=1e-12)
        np.testing.assert_allclose(U - np.diag(np.diag(U)), 0.0, atol=1e-12)

    def test_zero_drive_phase_overlap(self):
        # raw fidelity against the identity equals the overlap of the free phases
        spec = two_mode()
        t = 123.0
        res = simulate_gate(spec, [], t, ideal=np.eye(4), dt_ps=5.0)
        sp = spectrum_of(spec, computational_labels(spec))
        phases = [np.exp(-2j * np.pi * sp.energy(lab) * t) for lab in computational_labels(spec)]
        assert res.fidelity_raw == pytest.approx(abs(np.mean(phases)), abs=1e-3)
        # a ZZ phase is not a product of local phases, but it is diagonal
        assert res.fidelity_corrected < 0.99
        assert simulate_gate(spec, [], t, ideal=np.eye(4), dt_ps=5.0, phase_mode="diagonal").fidelity_corrected == (
            pytest.approx(1.0, abs=1e-9)
        )

    @pytest.mark.parametrize("scale,t_pi", [(0.5, 1 / 0.02), (1.0, 1 / 0.04)])
    def test_two_level_inversion(self, scale, t_pi):
        U = propagate_unitary(qubit(), [DriveSpec("a", 0.02, 5.0)], t_pi, dt_ps=1.0, drive_scale=scale)
        assert abs(U[1, 0]) ** 2 >= 0.99

    def test_two_level_against_ode(self):
        # brute-force integration of the lab-frame Schroedinger equation
        amp, f, t_end = 0.02, 5.0, 30.0

        def rhs(t, y):
            H = np.diag([0.0, f]) + 0.5 * amp * np.cos(2 * np.pi * f * t) * X
            return -2j * np.pi * (H @ y)

        sol = solve_ivp(rhs, (0, t_end), np.array([1.0, 0.0], dtype=complex), rtol=1e-10, atol=1e-12, method="DOP853")
        U = propagate_unitary(qubit(), [DriveSpec("a", amp, f)], t_end, dt_ps=1.0)
        assert abs(U[1, 0]) ** 2 == pytest.approx(abs(sol.y[1, -1]) ** 2, abs=1e-4)

    def test_dt_rule(self):
        with pytest.raises(NumericalError, match="too coarse"):
            propagate_unitary(qubit(), [DriveSpec("a", 0.02, 5.0)], 10.0, dt_ps=20.0)
        with pytest.raises(NumericalError):
            propagate_unitary(qubit(), [DriveSpec("a", 0.02, 5.0)], 10.0, dt_ps=101.0, frame="rotating")

    def test_unknown_target(self):
        with pytest.raises(ConfigError):
            propagate_unitary(qubit(), [DriveSpec("z", 0.02, 5.0)], 10.0)

    def test_unitarity(self, pair):
        spec, drives, t = pair
        fr = DressedFrame.from_spec(spec)
        for kind in ("lab", "rotating"):
            U = propagate_dressed(fr, drives, t / 4, frame_kind=kind)
            assert unitarity_error(U) <= 1e-8

    def test_frames_agree(self, pair):
        spec, drives, t = pair
        lab = simulate_gate(spec, drives, t, frame="lab", phase_mode="diagonal")
        rot = simulate_gate(spec, drives, t, frame="rotating", phase_mode="diagonal")
        assert lab.fidelity_corrected == pytest.approx(rot.fidelity_corrected, abs=1e-3)

    def test_cnot_from_parity_drive(self, pair):
        spec, drives, t = pair
        res = simulate_gate(spec, drives, t, frame="rotating")
        assert res.fidelity_corrected > 0.99
        assert res.population_fidelity > 0.99
        assert 0 <= res.leakage_total < 1e-3

    def test_step_convergence(self, pair):
        spec, drives, t = pair
        a = simulate_gate(spec, drives, t, frame="rotating", dt_ps=100.0, phase_mode="diagonal")
        b = simulate_gate(spec, drives, t, frame="rotating", dt_ps=50.0, phase_mode="diagonal")
        assert abs(a.fidelity_corrected - b.fidelity_corrected) < 1e-4

    @given(st.floats(0, 2 * np.pi))
    def test_drive_phase_covariance(self, phi):
        spec = two_mode(w1=4.95, w2=5.28, g=0.03)
        f1 = 4.95 - 0.0045  # near the data-excited line
        base = [DriveSpec("a", 0.004, f1), DriveSpec("a", 0.004, f1 - 0.004)]
        moved = [DriveSpec(d.target, d.amp, d.freq, d.phase + phi) for d in base]
        kw = dict(frame="rotating", phase_mode="diagonal", dt_ps=100.0)
        a = simulate_gate(spec, base, 60.0, **kw).fidelity_corrected
        b = simulate_gate(spec, moved, 60.0, **kw).fidelity_corrected
        assert a == pytest.approx(b, abs=1e-6)


class TestProjection:
    def test_identity(self):
        p = project_and_leak(np.eye(9), [0, 1, 3, 4], np.eye(4))
        np.testing.assert_array_equal(p.projected, np.eye(4))
        assert p.leakage_total == 0.0 and p.in_subspace_error == 0.0

    def test_full_leak_of_one_column(self):
        spec = two_mode()
        src, dst = basis_index(spec, (0, 1)), basis_index(spec, (0, 2))
        U = np.eye(9)
        U[:, [src, dst]] = U[:, [dst, src]]
        p = project_and_leak(U, [0, 1, 3, 4])
        np.testing.assert_array_equal(p.leakage_per_column, [0, 1, 0, 0])

    @given(st.integers(0, 10_000))
    def test_column_stochastic(self, seed):
        U = random_unitary(9, seed)
        idx = [0, 1, 3, 4]
        p = project_and_leak(U, idx)
        kept = np.sum(np.abs(U[np.ix_(idx, idx)]) ** 2, axis=0)
        np.testing.assert_allclose(kept + p.leakage_per_column, 1.0, atol=1e-8)


class TestPhaseCorrection:
    def ideal(self):
        return ideal_parity_unitary(ParityGateSpec(("d1", "d2", "d3"), "a"))

    def test_exact(self):
        c = phase_correct(self.ideal(), self.ideal())
        assert c.fidelity == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(c.angles, 0.0, atol=1e-6)

    def test_recovers_local_phases(self):
        angles = np.array([0.4, 0.3, -0.7, 1.1, 0.2])
        P = local_phase_operator(angles, 4)[:, None] * self.ideal()
        c = phase_correct(P, self.ideal())
        assert c.fidelity == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(np.angle(np.exp(1j * (c.angles - angles))), 0.0, atol=1e-4)
        np.testing.assert_allclose(c.operator(4)[:, None] * self.ideal(), P, atol=1e-4)

    def test_diagonal_mode(self):
        rng = np.random.default_rng(1)
        phases = np.exp(1j * rng.uniform(-np.pi, np.pi, 16))
        c = phase_correct(phases[:, None] * self.ideal(), self.ideal(), "diagonal")
        assert c.fidelity == pytest.approx(1.0, abs=1e-12)
        # a generic diagonal phase pattern is not a product of local phases
        assert phase_correct(phases[:, None] * self.ideal(), self.ideal()).fidelity < 0.99

    def test_orthogonal_stays_low(self):
        ideal = np.kron(X, np.eye(8))
        grid = np.linspace(-np.pi, np.pi, 8, endpoint=False)
        oracle = max(
            process_fidelity(ideal, local_phase_operator((0.0, *th), 4)[:, None] * np.eye(16))
            for th in itertools.product(grid, repeat=4)
        )
        assert oracle < 1e-12
        assert phase_correct(np.eye(16), ideal).fidelity <= oracle + 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            phase_correct(np.eye(4), np.eye(8))


class TestProcessFidelity:
    @given(st.integers(0, 10_000))
    def test_self(self, seed):
        U = random_unitary(8, seed)
        assert process_fidelity(U, U) == pytest.approx(1.0, abs=1e-12)

    def test_traceless(self):
        assert process_fidelity(np.eye(16), np.kron(X, np.eye(8))) == 0.0

    def test_mismatch(self):
        with pytest.raises(ConfigError):
            process_fidelity(np.eye(2), np.eye(4))


class TestDecoherence:
    @given(st.integers(2, 4), st.floats(0, 1))
    def test_kraus_complete(self, levels, p):
        total = sum(K.T @ K for K in damping_kraus(levels, p))
        np.testing.assert_allclose(total, np.eye(levels), atol=1e-12)

    def test_infinite_t1(self, pair):
        spec, drives, t = pair
        res = decohered_fidelity(spec, drives, t, None)
        coherent = simulate_gate(spec, drives, t, frame="rotating", phase_mode="diagonal")
        assert res.fidelity == pytest.approx(coherent.fidelity_corrected, abs=1e-6)
        assert decohered_fidelity(spec, drives, t, math.inf).fidelity == res.fidelity

    def test_halving_t1_doubles_deficit(self, pair):
        spec, drives, t = pair
        a = decohered_fidelity(spec, drives, t, 20.0)
        b = decohered_fidelity(spec, drives, t, 10.0)
        assert b.deficit / a.deficit == pytest.approx(2.0, rel=0.3)
        for r in (a, b):
            assert r.trace_error <= 1e-6
            assert r.min_population >= -1e-12
            assert r.fidelity < r.coherent_fidelity

    def test_single_mode_decay(self):
        # undriven and uncoupled, damping only the data qubit: the two inputs the
        # even-parity ideal leaves in place both have the data qubit excited and
        # decay as exp(-t / T1); the two flipped inputs never overlap their targets
        spec = two_mode(g=0.0)
        res = decohered_fidelity(spec, [], 1000.0, (math.inf, 10.0), parity="even", dt_ps=100.0)
        expected = 0.5 * (1 - math.exp(-1.0 / 10.0))
        assert res.deficit == pytest.approx(expected, rel=1e-6)

    def test_bad_t1(self, pair):
        spec, drives, t = pair
        with pytest.raises(ConfigError):
            decohered_fidelity(spec, drives, t, 0.0)
        with pytest.raises(ConfigError):
            decohered_fidelity(spec, drives, t, (1.0,))


class TestPhaseClosure:
    def test_examples(self):
        assert phase_closure_time(7.5, 600.0) == pytest.approx(666.6667, abs=1e-3)
        assert phase_closure_time(5.0) == pytest.approx(200.0)
        assert phase_closure_time(5.0, 200.0) == pytest.approx(200.0)
        assert phase_closure_time(-5.0, 201.0) == pytest.approx(400.0)

    def test_zero(self):
        with pytest.raises(ConfigError):
            phase_closure_time(0.0)

    @given(st.floats(0.1, 50).map(lambda x: x * np.random.choice([-1, 1])), st.floats(0, 5000))
    def test_property(self, chi, t_min):
        t = phase_closure_time(chi, t_min)
        period = 1e3 / abs(chi)
        assert t >= t_min - 1e-6
        assert t - period < t_min + 1e-6 or t == pytest.approx(period)
        assert t / period == pytest.approx(round(t / period), abs=1e-9)

import itertools
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dispersive_parity.errors import ConfigError, NumericalError
from dispersive_parity.fockspace import (
    CircuitSpec,
    CouplingEdge,
    FockBasis,
    ModeSpec,
    assemble_hamiltonian,
    bare_energies,
    basis_for,
    basis_index,
    basis_label,
    build_operators,
    hermiticity_error,
    number_operator,
)


def kron_all(mats):
    return reduce(np.kron, mats)


def lowering(levels):
    return np.diag(np.sqrt(np.arange(1, levels)), 1)


def single(freq=5.0, anharm=-0.3, levels=3):
    return CircuitSpec((ModeSpec("m", "data", freq, anharm, levels),), ())


@st.composite
def circuits(draw, max_modes=3):
    n = draw(st.integers(2, max_modes))
    modes = []
    for k in range(n):
        modes.append(
            ModeSpec(
                f"m{k}",
                draw(st.sampled_from(["data", "ancilla", "coupler"])),
                draw(st.floats(3.0, 8.0)),
                draw(st.floats(-0.4, -0.05)),
                draw(st.integers(2, 3)),
            )
        )
    edges = []
    for a, b in itertools.combinations(range(n), 2):
        if draw(st.booleans()):
            edges.append(CouplingEdge(f"m{a}", f"m{b}", draw(st.floats(-0.08, 0.08))))
    return CircuitSpec(tuple(modes), tuple(edges))


class TestOperators:
    def test_qubit_lowering(self):
        a = build_operators(single(levels=2), "m")
        np.testing.assert_array_equal(a, [[0, 1], [0, 0]])

    def test_three_level_superdiagonal(self):
        a = build_operators(single(levels=3), "m")
        np.testing.assert_allclose(a, lowering(3), atol=0)

    def test_two_mode_against_kron(self):
        spec = CircuitSpec((ModeSpec("x", "data", 5, -0.2, 2), ModeSpec("y", "data", 5.2, -0.2, 2)), ())
        np.testing.assert_array_equal(build_operators(spec, "y"), np.kron(np.eye(2), lowering(2)))
        np.testing.assert_array_equal(build_operators(spec, "x"), np.kron(lowering(2), np.eye(2)))

    @given(st.lists(st.integers(2, 4), min_size=1, max_size=3), st.data())
    def test_embedding_matches_kron(self, levels, data):
        modes = tuple(ModeSpec(f"m{k}", "data", 5.0 + k, -0.2, lv) for k, lv in enumerate(levels))
        spec = CircuitSpec(modes, ())
        k = data.draw(st.integers(0, len(levels) - 1))
        mats = [np.eye(lv) for lv in levels]
        mats[k] = lowering(levels[k])
        np.testing.assert_array_equal(build_operators(spec, f"m{k}"), kron_all(mats))

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            build_operators(single(), "nope")


class TestHamiltonian:
    def test_single_mode_diagonal(self):
        H = assemble_hamiltonian(single())
        np.testing.assert_allclose(np.diag(H), [0.0, 5.0, 9.7], atol=1e-15)
        assert np.count_nonzero(H - np.diag(np.diag(H))) == 0

    def test_kron_oracle_two_modes(self):
        spec = CircuitSpec(
            (ModeSpec("x", "data", 5.0, -0.3, 3), ModeSpec("y", "data", 5.4, -0.2, 3)),
            (CouplingEdge("x", "y", 0.03),),
        )
        x = np.kron(lowering(3), np.eye(3))
        y = np.kron(np.eye(3), lowering(3))
        H = 5.0 * x.T @ x - 0.15 * x.T @ x.T @ x @ x + 5.4 * y.T @ y - 0.1 * y.T @ y.T @ y @ y
        H = H + 0.03 * (x - x.T) @ (y - y.T)
        np.testing.assert_allclose(assemble_hamiltonian(spec), H, atol=1e-14)

    def test_table1_hermitian_and_first_transition(self, table1):
        H = assemble_hamiltonian(table1)
        assert H.shape == (81, 81)
        assert hermiticity_error(H) <= 1e-12
        evals = np.linalg.eigvalsh(H)
        # ancilla-like transition from the ground state, close to the first drive plus the shift
        assert evals[1] - evals[0] == pytest.approx(4.943, abs=1e-3)

    @given(circuits())
    def test_hermitian(self, spec):
        assert hermiticity_error(assemble_hamiltonian(spec)) <= 1e-12

    @given(circuits())
    def test_uncoupled_spectrum_is_bare(self, spec):
        H = assemble_hamiltonian(spec.without_couplings())
        np.testing.assert_array_equal(np.diag(H), bare_energies(spec))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(H)), np.sort(bare_energies(spec)), rtol=0, atol=1e-13)

    @given(circuits(), st.data())
    def test_permutation_covariance(self, spec, data):
        perm = data.draw(st.permutations(range(len(spec.modes))))
        permuted = CircuitSpec(tuple(spec.modes[k] for k in perm), spec.edges)
        H, Hp = assemble_hamiltonian(spec), assemble_hamiltonian(permuted)
        # basis state of the permuted spec -> basis state of the original
        P = np.zeros((spec.dim, spec.dim))
        for i in range(spec.dim):
            lab = basis_label(permuted, i)
            orig = [0] * len(perm)
            for pos, k in enumerate(perm):
                orig[k] = lab[pos]
            P[basis_index(spec, orig), i] = 1
        np.testing.assert_allclose(P.T @ H @ P, Hp, atol=1e-13)

    @given(circuits())
    def test_rwa_conserves_excitations(self, spec):
        H = assemble_hamiltonian(spec, rwa=True)
        N = number_operator(spec)
        np.testing.assert_allclose(H @ N - N @ H, 0, atol=1e-13)

    def test_dimension_cap(self):
        modes = tuple(ModeSpec(f"m{k}", "data", 5.0, -0.2, 3) for k in range(12))
        with pytest.raises(NumericalError, match="dimension"):
            assemble_hamiltonian(CircuitSpec(modes, ()))

    def test_cut_basis_matches_full_block(self, table1):
        # with no coupling across excitation numbers, the cut basis is an exact block
        spec = table1
        cut = basis_for(spec, max_excitations=2)
        Hc = assemble_hamiltonian(spec, basis=cut, rwa=True)
        Hf = assemble_hamiltonian(spec, rwa=True)
        idx = [basis_index(spec, lab) for lab in cut.labels]
        np.testing.assert_allclose(Hc, Hf[np.ix_(idx, idx)], atol=1e-15)


class TestBasis:
    def test_examples(self, table1):
        assert basis_index(table1, (0, 0, 0, 0)) == 0
        assert basis_index(table1, (1, 0, 0, 0)) == 27

    def test_round_trip(self, table1):
        for i in range(81):
            assert basis_index(table1, basis_label(table1, i)) == i

    def test_out_of_range(self, table1):
        with pytest.raises(ConfigError):
            basis_index(table1, (3, 0, 0, 0))

    def test_computational_indices(self):
        b = FockBasis((3, 3))
        assert b.computational_indices([0, 1]) == [0, 1, 3, 4]


class TestSpecValidation:
    def test_levels(self):
        with pytest.raises(ConfigError):
            ModeSpec("m", "data", 5.0, -0.2, 1)

    def test_positive_anharm_warns(self):
        with pytest.warns(UserWarning):
            ModeSpec("m", "data", 5.0, 0.1)

    def test_duplicate_edge(self):
        m = (ModeSpec("x", "data", 5, -0.2), ModeSpec("y", "data", 5.1, -0.2))
        with pytest.raises(ConfigError):
            CircuitSpec(m, (CouplingEdge("x", "y", 0.01), CouplingEdge("y", "x", 0.02)))

    def test_self_edge(self):
        with pytest.raises(ConfigError):
            CouplingEdge("x", "x", 0.01)

    def test_missing_endpoint(self):
        with pytest.raises(ConfigError):
            CircuitSpec((ModeSpec("x", "data", 5, -0.2),), (CouplingEdge("x", "z", 0.01),))

    def test_from_dict_reports_path(self):
        with pytest.raises(ConfigError, match=r"circuit\.modes\[1\]"):
            CircuitSpec.from_dict({"modes": [{"name": "a", "role": "data", "freq": 5, "anharm": -0.2}, {"name": "b"}]})

    def test_dict_round_trip(self, table1):
        assert CircuitSpec.from_dict(table1.to_dict()) == table1

    def test_from_dict_rejects_unknown_keys(self):
        modes = [{"name": "a", "role": "data", "freq": 5, "anharm": -0.2}]
        with pytest.raises(ConfigError, match="couplings"):
            CircuitSpec.from_dict({"modes": modes, "couplings": []})

"""Printed vs derived coupler-elimination formulas against exact diagonalization.

Two toy problems: a qubit dressed by one coupler (frequency shift) and two
qubits sharing a coupler (mediated exchange coupling). Then the validity
report for the representative ten-mode cell under both formula sets.
"""
import numpy as np

from dispersive_parity.fockspace import CircuitSpec, CouplingEdge, ModeSpec, assemble_hamiltonian, basis_index
from dispersive_parity.swreduce import DressedSpec, eliminate_central_coupler, eliminate_edge_couplers, sw_validity_report, table_like_cell


def qubit_shift():
    spec = CircuitSpec(
        (ModeSpec("q", "data", 5.0, -0.2, 4), ModeSpec("c", "coupler", 6.5, -0.1, 4)),
        (CouplingEdge("q", "c", 0.08),),
    )
    e = np.linalg.eigvalsh(assemble_hamiltonian(spec))
    print("qubit 5.0 GHz, coupler 6.5 GHz, g = 80 MHz")
    print(f"  exact       {e[1] - e[0]:.6f} GHz")
    for f in ("printed", "derived"):
        print(f"  {f:<11} {eliminate_edge_couplers(spec, formula=f).circuit.mode('q').freq:.6f} GHz")


def exchange():
    modes = (
        ModeSpec("a", "ancilla", 4.0, -0.3, 2),
        ModeSpec("q1", "data", 5.0, -0.2, 2),
        ModeSpec("q2", "data", 5.3, -0.2, 2),
        ModeSpec("c5", "coupler", 6.8, -0.1, 2),
    )
    edges = (CouplingEdge("q1", "c5", 0.07), CouplingEdge("q2", "c5", 0.07), CouplingEdge("a", "c5", 1e-9))
    spec = CircuitSpec(modes, edges)

    sub = CircuitSpec(
        tuple(ModeSpec(m.name, m.role, m.freq, m.anharm, 4) for m in modes[1:]),
        (CouplingEdge("q1", "c5", 0.07), CouplingEdge("q2", "c5", 0.07)),
    )
    evals, vecs = np.linalg.eigh(assemble_hamiltonian(sub))
    rows = [basis_index(sub, (1, 0, 0)), basis_index(sub, (0, 1, 0))]
    cols = [int(np.argmax(np.abs(vecs[r]))) for r in rows]
    u, _, wh = np.linalg.svd(vecs[np.ix_(rows, cols)])
    heff = (u @ wh) @ np.diag(evals[cols]) @ (u @ wh).T
    print("\nqubits 5.0 / 5.3 GHz sharing a 6.8 GHz coupler, g = 70 MHz each")
    print(f"  exact       {-heff[0, 1] * 1e3:+.4f} MHz")
    for f in ("printed", "derived"):
        out = eliminate_central_coupler(DressedSpec(spec, ("edge",), {}, False, f))
        print(f"  {f:<11} {out.circuit.coupling('q1', 'q2') * 1e3:+.4f} MHz")


def cell_report():
    print("\nrepresentative unit cell")
    for f in ("printed", "derived"):
        rep = sw_validity_report(table_like_cell(), formula=f)
        print(
            f"  {f:<11} eps {rep.epsilon_mhz:.3f} MHz, spectral deviation "
            f"{rep.spectral['max_deviation_mhz']:.2f} MHz (budget {rep.budget_mhz:.2f} MHz)"
        )


if __name__ == "__main__":
    qubit_shift()
    exchange()
    cell_report()

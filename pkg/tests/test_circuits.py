import numpy as np
import pytest

from qemtools.circuits import (
    FhCircuitSpec,
    attach_noise,
    build_circuit,
    cphase,
    fswap,
    givens,
    hamiltonian_terms,
    observable_strings,
    parity_symmetry,
    params_per_layer,
)
from qemtools.pauli import commutes, parse_pauli
from qemtools.simulator import DensityMatrix, pauli_expectation, run_exact


def test_default_circuit_has_144_gates():
    c = build_circuit(FhCircuitSpec())
    assert c.n_qubits == 8 and len(c.gates) == 144
    assert all(len(g.qubits) == 2 for g in c.gates)
    assert c.initial_bits == (0, 1, 0, 1, 0, 1, 0, 1)


def test_gates_are_unitary_and_number_conserving():
    n_op = np.diag([0, 1, 1, 2])
    for u in (fswap(), givens(0.7, 1.9), cphase(2.3), fswap() @ cphase(0.4)):
        assert np.allclose(u @ u.conj().T, np.eye(4))
        assert np.allclose(u @ n_op, n_op @ u)


def test_zero_angles_reduce_to_swaps():
    spec = FhCircuitSpec(params=tuple([0.0] * FhCircuitSpec().n_params))
    c = build_circuit(spec)
    for g in c.gates:
        assert np.allclose(g.unitary, fswap()) or np.allclose(g.unitary, np.eye(4))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_parity_is_conserved_exactly(seed):
    c = build_circuit(FhCircuitSpec(seed=seed))
    rho = run_exact(c, 0.0)
    assert pauli_expectation(rho, parity_symmetry(8)) == pytest.approx(1.0, abs=1e-12)


def test_parity_eigenspaces_preserved_for_many_draws():
    s = np.diag(parity_symmetry(4).matrix()).real
    rng = np.random.default_rng(0)
    spec = FhCircuitSpec(lx=1, ly=2, layers=2)
    for _ in range(1000):
        params = rng.uniform(0, 2 * np.pi, size=spec.n_params)
        u = np.eye(16, dtype=complex)
        for g in build_circuit(FhCircuitSpec(lx=1, ly=2, layers=2, params=tuple(params))).gates:
            u = _embed(g.unitary, g.qubits, 4) @ u
        assert np.allclose(u * s[None, :], s[:, None] * u, atol=1e-12)


def _embed(u, qubits, n):
    a, b = qubits
    assert b == a + 1
    return np.kron(np.kron(np.eye(2**a), u), np.eye(2 ** (n - b - 1)))


def test_seed_determinism():
    a, b = FhCircuitSpec(seed=4).resolved_params(), FhCircuitSpec(seed=4).resolved_params()
    assert np.array_equal(a, b)
    assert not np.array_equal(a, FhCircuitSpec(seed=5).resolved_params())
    assert a.shape == (4 * params_per_layer(2, 2),) and params_per_layer(2, 2) == 20
    assert np.all((a >= 0) & (a < 2 * np.pi))


def test_explicit_params_length_checked():
    with pytest.raises(ValueError):
        FhCircuitSpec(params=(0.1, 0.2)).resolved_params()


def test_hamiltonian_terms_structure():
    hop = hamiltonian_terms(2, 2, 1.0, 0.0)
    assert all(t.string.x for t in hop)
    diag = hamiltonian_terms(2, 2, 0.0, 1.0)
    assert all(t.string.x == 0 for t in diag)
    s = parity_symmetry(8)
    assert all(commutes(t.string, s) for t in hamiltonian_terms(2, 2, 1.0, 1.0))


def test_hamiltonian_matrix_is_hermitian_and_number_conserving():
    terms = hamiltonian_terms(1, 2, 1.0, 2.0)
    h = sum(t.coefficient * t.string.matrix() for t in terms)
    assert np.allclose(h, h.conj().T)
    n_op = sum((np.eye(16) - parse_pauli(lbl).matrix()) / 2 for lbl in ("ZIII", "IZII", "IIZI", "IIIZ"))
    assert np.allclose(h @ n_op, n_op @ h)


def test_observable_count_and_permutation():
    c = build_circuit(FhCircuitSpec())
    obs = observable_strings(2, 2, c.mode_permutation)
    assert len(obs) == 28 and len(set(obs)) == 28
    assert sorted(c.mode_permutation) == list(range(8))


def test_parity_symmetry_examples():
    assert parity_symmetry(2).label == "ZZ"
    assert parity_symmetry(8).label == "Z" * 8
    assert not commutes(parity_symmetry(2), parse_pauli("XI"))


def test_attach_noise_examples():
    c = build_circuit(FhCircuitSpec())
    assert attach_noise(c, "depolarizing", 0.0).noise_sites == []
    dep = attach_noise(c, "depolarizing", 1.0)
    assert dep.noise[0].rate == pytest.approx(1 / 144)
    mu_eps = sum(s.rate * s.firing.non_identity_probability for s in dep.noise)
    assert mu_eps == pytest.approx(15 / 16)
    det = attach_noise(c, "detectable", 0.5)
    assert det.noise[0].rate == pytest.approx(0.5 / 144)
    assert det.mean_error_count == pytest.approx(0.5)
    with pytest.raises(ValueError):
        attach_noise(c, "amplitude", 0.5)


def test_initial_state_matches_bits():
    c = build_circuit(FhCircuitSpec(layers=0))
    assert len(c.gates) == 0
    rho = run_exact(c)
    assert np.allclose(rho.data, DensityMatrix.from_bits(c.initial_bits).data)

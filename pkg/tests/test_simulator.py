import math

import numpy as np
import pytest
from scipy import stats

from qemtools.channels import PauliChannel, channel_preset, depolarizing, group_inverse, group_to_pauli
from qemtools.circuits import attach_noise, fh_circuit, parity_symmetry
from qemtools.mitigation.pipelines import initial_symmetry_value, inverse_maps
from qemtools.pauli import SignedPauliTerm, full_pauli_group, parse_pauli
from qemtools.quasiprob import decompose
from qemtools.simulator import (
    DensityMatrix,
    Gate,
    MitigationPlan,
    NoisyCircuit,
    SiteNoise,
    apply_pauli_channel,
    default_lmax,
    expectation,
    mc_trajectory,
    pauli_expectation,
    run_count_resolved,
    run_exact,
    run_trajectories,
    symmetry_partition,
)

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
X = np.array([[0, 1], [1, 0]])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def one_qubit(gates, noise=None, bits=(0,)):
    return NoisyCircuit(len(bits), tuple(gates), tuple(noise or ()), bits)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / abs(np.diag(r)))


def random_circuit(rng, n=3, depth=6, noise=True):
    gates, sites = [], []
    for _ in range(depth):
        q = tuple(int(v) for v in rng.choice(n, size=2, replace=False))
        gates.append(Gate("u", q, random_unitary(rng, 4)))
        sites.append(SiteNoise.group_error(0.05, full_pauli_group(2)) if noise else None)
    return NoisyCircuit(n, tuple(gates), tuple(sites), tuple(int(b) for b in rng.integers(0, 2, n)))


def dense_reference(circuit, scale=1.0):
    n = circuit.n_qubits
    rho = DensityMatrix.from_bits(circuit.initial_bits)
    for g, s in zip(circuit.gates, circuit.noise):
        full = _embed(g.unitary, g.qubits, n)
        rho = DensityMatrix(n, full @ rho.data @ full.conj().T)
        if s is not None:
            rho = apply_pauli_channel(rho, s.channel(scale).embed(n, g.qubits))
    return rho


def _embed(u, qubits, n):
    k = len(qubits)
    t = u.reshape((2,) * (2 * k))
    full = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
    out = np.tensordot(t, full, axes=(list(range(k, 2 * k)), list(qubits)))
    out = np.moveaxis(out, list(range(k)), list(qubits))
    return out.reshape(2**n, 2**n)


# -- exact evolution --------------------------------------------------------------

def test_noiseless_run_is_pure():
    rho = run_exact(fh_circuit(1, 2, 2), 0.0)
    assert rho.purity() == pytest.approx(1.0, abs=1e-10)


def test_x_gate_flips_z():
    rho = run_exact(one_qubit([Gate("x", (0,), X)]))
    assert pauli_expectation(rho, "Z") == pytest.approx(-1.0)


def test_dephasing_after_hadamard():
    c = one_qubit([Gate("h", (0,), H)], [SiteNoise.from_channel(channel_preset("dephasing", 0.25))])
    assert pauli_expectation(run_exact(c), "X") == pytest.approx(0.5)


def test_expectation_examples():
    assert expectation(DensityMatrix.from_bits([0]), "Z") == 1.0
    mixed = DensityMatrix.maximally_mixed(3)
    assert all(abs(pauli_expectation(mixed, p)) < 1e-15 for p in ("XII", "IZY", "ZZZ"))
    plus = run_exact(one_qubit([Gate("h", (0,), H)]))
    assert expectation(plus, "X") == pytest.approx(1.0)
    terms = [SignedPauliTerm(0.5, parse_pauli("Z")), SignedPauliTerm(0.5, parse_pauli("I"))]
    assert expectation(DensityMatrix.from_bits([1]), terms) == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_matrices(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng)
    assert np.allclose(run_exact(c).data, dense_reference(c).data, atol=1e-12)


def test_pauli_expectation_matches_trace():
    rng = np.random.default_rng(11)
    rho = run_exact(random_circuit(rng))
    for label in ("XYZ", "ZIX", "YYI", "III"):
        direct = np.trace(parse_pauli(label).matrix() @ rho.data).real
        assert pauli_expectation(rho, label) == pytest.approx(direct, abs=1e-14)


def test_inverse_channels_restore_noiseless_state():
    rng = np.random.default_rng(3)
    c = random_circuit(rng)
    maps = inverse_maps(c)
    gates, noise = [], []
    for g, s, m in zip(c.gates, c.noise, maps):
        gates += [g, Gate("id", g.qubits, np.eye(4))]
        noise += [s, SiteNoise.from_channel(m)]
    cancelled = NoisyCircuit(c.n_qubits, tuple(gates), tuple(noise), c.initial_bits)
    assert np.allclose(run_exact(cancelled).data, run_exact(c, 0.0).data, atol=1e-10)


def test_scale_and_validation():
    c = random_circuit(np.random.default_rng(0))
    assert np.allclose(run_exact(c, 2.0).data, dense_reference(c, 2.0).data, atol=1e-12)
    with pytest.raises(ValueError):
        run_exact(c, -1.0)
    with pytest.raises(ValueError):
        DensityMatrix.maximally_mixed(13)
    with pytest.raises(ValueError):
        Gate("bad", (0, 0), np.eye(4))


# -- symmetry partition ---------------------------------------------------------

def test_symmetry_partition_noiseless_passes():
    c = fh_circuit(1, 2, 2)
    s = parity_symmetry(4)
    o_pass, o_fail, p_pass = symmetry_partition(run_exact(c, 0.0), s, initial_symmetry_value(c, s), "ZIII")
    assert p_pass == pytest.approx(1.0)


@pytest.mark.parametrize("obs", ["ZIII", "XXII", "YZYI", "IIZZ"])
def test_total_expectation_identity(obs):
    c = attach_noise(fh_circuit(1, 2, 3), "detectable", 0.7)
    s = parity_symmetry(4)
    rho = run_exact(c)
    o_pass, o_fail, p_pass = symmetry_partition(rho, s, initial_symmetry_value(c, s), obs)
    assert p_pass * o_pass + (1 - p_pass) * o_fail == pytest.approx(pauli_expectation(rho, obs), abs=1e-12)


def test_symmetry_partition_rejects_anticommuting_observable():
    with pytest.raises(ValueError):
        symmetry_partition(DensityMatrix.from_bits([0, 1]), "ZZ", 1, "XI")


def test_pass_probability_close_to_poisson_limit():
    c = attach_noise(fh_circuit(2, 2, 4), "detectable", 0.5)
    s = parity_symmetry(8)
    _, _, p_pass = symmetry_partition(run_exact(c), s, initial_symmetry_value(c, s), "ZIIIIIII")
    assert p_pass == pytest.approx(math.exp(-0.5) * math.cosh(0.5), abs=1e-3)


# -- count-resolved evolution --------------------------------------------------------

def test_count_resolved_layers():
    c = attach_noise(fh_circuit(1, 2, 2), "depolarizing", 0.6)
    crs = run_count_resolved(c, l_max=4)
    assert np.allclose(crs.layers[0][1].data / crs.layers[0][0], run_exact(c, 0.0).data, atol=1e-12)
    assert np.allclose(crs.total().data, run_exact(c).data, atol=crs.truncated_mass + 1e-12)


def test_binomial_weights_two_sites():
    g = Gate("i", (0,), np.eye(2))
    site = SiteNoise(0.1, channel_preset("dephasing", 1.0))
    crs = run_count_resolved(one_qubit([g, g], [site, site]), l_max=2)
    assert [w for w, _ in crs.layers] == pytest.approx([0.81, 0.18, 0.01])


def test_weights_close_to_poisson():
    c = attach_noise(fh_circuit(1, 2, 12), "depolarizing", 1.0)
    assert len(c.noise_sites) == 96
    crs = run_count_resolved(c, l_max=4)
    # binomial with M sites against the Poisson limit
    m = len(c.noise_sites)
    for l, (w, _) in enumerate(crs.layers):
        assert w == pytest.approx(stats.binom.pmf(l, m, 1.0 / m), rel=1e-10)
        assert w == pytest.approx(stats.poisson.pmf(l, 1.0), rel=0.03)


def test_default_lmax():
    assert default_lmax(0, 0.1) == 0
    assert default_lmax(144, 2 / 144) == 10
    l = default_lmax(144, 0.5 / 144)
    assert stats.binom.sf(l, 144, 0.5 / 144) < 1e-6 <= stats.binom.sf(l - 1, 144, 0.5 / 144)


def test_count_resolved_requires_uniform_rates():
    g = Gate("i", (0,), np.eye(2))
    c = one_qubit([g, g], [SiteNoise(0.1, channel_preset("dephasing", 1.0)), SiteNoise(0.2, channel_preset("dephasing", 1.0))])
    with pytest.raises(ValueError):
        run_count_resolved(c)


# -- Monte Carlo --------------------------------------------------------------------

def test_noiseless_trajectories_are_deterministic_readouts():
    c = fh_circuit(1, 2, 2)
    s = parity_symmetry(4)
    rng = np.random.default_rng(0)
    o = parse_pauli("ZZII")
    plan = MitigationPlan(o, symmetry=s, symmetry_value=initial_symmetry_value(c, s))
    value, sign, passed = mc_trajectory(c, plan, rng)
    t = run_trajectories(c, plan, 2000, rng)
    assert sign == 1 and passed and np.all(t.signs == 1) and np.all(t.passed)
    assert t.estimate()[0] == pytest.approx(pauli_expectation(run_exact(c, 0.0), o), abs=4 * t.estimate()[1] + 1e-12)


def test_trajectory_means_match_exact():
    c = attach_noise(fh_circuit(1, 2, 4), "depolarizing", 1.0)
    o = parse_pauli("XXII")
    t = run_trajectories(c, MitigationPlan(o), 40_000, np.random.default_rng(5))
    est, se = t.estimate()
    assert abs(est - pauli_expectation(run_exact(c), o)) < 4 * se


def test_quasi_cancellation_unbiased():
    c = attach_noise(fh_circuit(1, 2, 4), "depolarizing", 0.5)
    o = parse_pauli("XXII")
    quasi = tuple(None if m is None else decompose(m) for m in inverse_maps(c))
    t = run_trajectories(c, MitigationPlan(o, quasi=quasi), 60_000, np.random.default_rng(9))
    est, se = t.estimate()
    assert abs(est - pauli_expectation(run_exact(c, 0.0), o)) < 4 * se
    assert t.one_norm == pytest.approx(np.prod([d.one_norm for d in quasi if d is not None]))


def test_seeded_trajectories_reproducible():
    c = attach_noise(fh_circuit(1, 2, 2), "depolarizing", 1.0)
    plan = MitigationPlan(parse_pauli("ZIII"))
    a = run_trajectories(c, plan, 500, np.random.default_rng(1))
    b = run_trajectories(c, plan, 500, np.random.default_rng(1))
    assert np.array_equal(a.values, b.values)


def test_site_noise_channel():
    s = SiteNoise.group_error(0.2, full_pauli_group(1))
    assert s.channel(1.0).allclose(group_to_pauli(depolarizing(0.2, 1)))
    assert s.channel(0.0).allclose(PauliChannel.identity(1))
    with pytest.raises(ValueError):
        s.channel(5.0)
    inv = SiteNoise.from_channel(group_inverse(depolarizing(0.2, 1)))
    assert inv.rate < 0

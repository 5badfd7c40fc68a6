"""Exact density-matrix and Monte Carlo simulation of Pauli-noisy circuits.

Conventions: qubit 0 is the most significant tensor factor, so a density
matrix reshaped to ``(2,) * 2n`` has row axis ``q`` and column axis
``n + q`` for qubit ``q``.  In flat basis indices qubit ``q`` is bit
``n - 1 - q``.

Each gate may carry a :class:`SiteNoise` applied right after it.  A site
"fires" with probability ``scale * rate``; a firing applies a Pauli drawn
from the site's firing distribution.  For a group channel ``J_{p,E}`` the
firing distribution is uniform over ``E`` (identity included), so the mean
number of firings is the mean circuit error count ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from .channels import PauliChannel, pure_group_channel
from .pauli import (
    PauliString,
    PauliSubgroup,
    SignedPauliTerm,
    commutes,
    multiply,
    parse_pauli,
)
from .quasiprob import QuasiDecomposition

MAX_DENSITY_QUBITS = 12
LMAX_CAP = 10
TAIL_TOL = 1e-6


# -- circuit description -----------------------------------------------------

@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    unitary: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        u = np.asarray(self.unitary, dtype=complex)
        d = 2 ** len(self.qubits)
        if u.shape != (d, d):
            raise ValueError(f"gate {self.name} has shape {u.shape}, expected {(d, d)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("gate qubits must be distinct")
        u.setflags(write=False)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "unitary", u)


@dataclass(frozen=True)
class SiteNoise:
    """Local noise ``(1 - rate) I + rate F`` on a gate's qubits.

    ``firing`` is the channel ``F`` applied when the site fires.  It is a
    probability distribution for physical noise; signed maps are allowed
    for analytic (exact-backend) use only.
    """

    rate: float
    firing: PauliChannel
    group: PauliSubgroup | None = None

    @classmethod
    def group_error(cls, p: float, group: PauliSubgroup) -> "SiteNoise":
        """``J_{p,E}``: fires with probability ``p`` into a uniform element of ``E``."""
        return cls(p, pure_group_channel(group), group)

    @classmethod
    def from_channel(cls, ch: PauliChannel) -> "SiteNoise":
        rate = ch.non_identity_probability
        ident = PauliString.identity(ch.n_qubits)
        if abs(rate) < 1e-12:
            return cls(0.0, PauliChannel.identity(ch.n_qubits))
        firing = {p: w / rate for p, w in ch.terms.items() if p != ident}
        return cls(rate, PauliChannel(ch.n_qubits, firing))

    @property
    def n_qubits(self) -> int:
        return self.firing.n_qubits

    def channel(self, scale: float = 1.0) -> PauliChannel:
        r = scale * self.rate
        if r >= 1.0:
            raise ValueError(f"scaled error probability {r} must be below 1")
        ident = PauliString.identity(self.n_qubits)
        w = {p: r * v for p, v in self.firing.terms.items()}
        w[ident] = w.get(ident, 0.0) + 1.0 - r
        return PauliChannel(self.n_qubits, w)


@dataclass(frozen=True)
class NoisyCircuit:
    """Gates, per-gate noise, initial computational basis state, mode map."""

    n_qubits: int
    gates: tuple[Gate, ...]
    noise: tuple[SiteNoise | None, ...]
    initial_bits: tuple[int, ...]
    mode_permutation: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        noise = tuple(self.noise) if self.noise else (None,) * len(self.gates)
        object.__setattr__(self, "noise", noise)
        if len(noise) != len(self.gates):
            raise ValueError("one noise entry per gate is required")
        if len(self.initial_bits) != self.n_qubits:
            raise ValueError("initial_bits length must equal n_qubits")
        for g, s in zip(self.gates, noise):
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g.name} acts outside the register")
            if s is not None and s.n_qubits != len(g.qubits):
                raise ValueError("site noise size must match its gate")
        if not self.mode_permutation:
            object.__setattr__(self, "mode_permutation", tuple(range(self.n_qubits)))

    @property
    def noise_sites(self) -> list[int]:
        return [i for i, s in enumerate(self.noise) if s is not None and s.rate != 0.0]

    @property
    def mean_error_count(self) -> float:
        return float(sum(s.rate for s in self.noise if s is not None))

    def with_noise(self, noise: Sequence[SiteNoise | None]) -> "NoisyCircuit":
        return replace(self, noise=tuple(noise))

    def noiseless(self) -> "NoisyCircuit":
        return replace(self, noise=(None,) * len(self.gates))

    def rates(self) -> np.ndarray:
        return np.array([0.0 if s is None else s.rate for s in self.noise])


# -- density matrices --------------------------------------------------------

@dataclass
class DensityMatrix:
    n_qubits: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.n_qubits > MAX_DENSITY_QUBITS:
            raise ValueError(f"density matrices are limited to {MAX_DENSITY_QUBITS} qubits")
        d = 2**self.n_qubits
        if self.data.shape != (d, d):
            raise ValueError("data shape does not match n_qubits")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "DensityMatrix":
        n = len(bits)
        idx = int("".join(str(int(b)) for b in bits), 2) if n else 0
        data = np.zeros((2**n, 2**n), dtype=complex)
        data[idx, idx] = 1.0
        return cls(n, data)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 2**n_qubits
        return cls(n_qubits, np.eye(d, dtype=complex) / d)

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def purity(self) -> float:
        return float(np.vdot(self.data, self.data).real)

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, self.data.copy())


def _superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def channel_superop(ch: PauliChannel) -> np.ndarray:
    """``sum_E w_E E (x) E*`` acting on row-major vectorised matrices."""
    d = 2**ch.n_qubits
    s = np.zeros((d * d, d * d), dtype=complex)
    for p, w in ch.terms.items():
        m = p.matrix()
        s += w * np.kron(m, m.conj())
    return s


def _apply_local_superop(data: np.ndarray, sop: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    t = data.reshape((2,) * (2 * n))
    axes = list(qubits) + [n + q for q in qubits]
    t = np.moveaxis(t, axes, range(2 * k))
    shape = t.shape
    t = (sop @ t.reshape(4**k, -1)).reshape(shape)
    t = np.moveaxis(t, range(2 * k), axes)
    d = 2**n
    return np.ascontiguousarray(t).reshape(d, d)


def _site_superops(gate: Gate, noise: SiteNoise | None, scale: float) -> np.ndarray:
    u = _superop(gate.unitary)
    if noise is None or noise.rate == 0.0 or scale == 0.0:
        return u
    return channel_superop(noise.channel(scale)) @ u


def run_exact(circuit: NoisyCircuit, scale: float = 1.0, state: DensityMatrix | None = None) -> DensityMatrix:
    """Evolve the initial state through all gates and scaled noise channels."""
    if scale < 0:
        raise ValueError("scale must be non-negative")
    n = circuit.n_qubits
    rho = (state or DensityMatrix.from_bits(circuit.initial_bits)).data
    for gate, noise in zip(circuit.gates, circuit.noise):
        rho = _apply_local_superop(rho, _site_superops(gate, noise, scale), gate.qubits, n)
    return DensityMatrix(n, rho)


@dataclass
class CountResolvedState:
    """Probability-weighted states conditioned on the number of site firings."""

    l_max: int
    layers: list[tuple[float, DensityMatrix]]
    truncated_mass: float

    def conditional_expectation(self, o: Sequence[SignedPauliTerm] | PauliString | str) -> list[float]:
        """``<O | l>`` for every layer with non-negligible weight."""
        out = []
        for w, rho in self.layers:
            out.append(expectation(rho, o) / w if w > 1e-300 else float("nan"))
        return out

    def total(self) -> DensityMatrix:
        data = sum(rho.data for _, rho in self.layers)
        return DensityMatrix(self.layers[0][1].n_qubits, data)


def default_lmax(n_sites: int, p: float) -> int:
    """Smallest ``l`` whose binomial tail beyond ``l`` is below ``TAIL_TOL``, capped."""
    if n_sites == 0 or p == 0:
        return 0
    for l in range(LMAX_CAP + 1):
        if stats.binom.sf(l, n_sites, p) < TAIL_TOL:
            return l
    return LMAX_CAP


def run_count_resolved(
    circuit: NoisyCircuit,
    scale: float = 1.0,
    l_max: int | None = None,
    strict: bool = True,
) -> CountResolvedState:
    """Exact evolution split by firing count ``l = 0 .. l_max``.

    Per noise site: ``rho_l <- (1 - p) G(rho_l) + p F(G(rho_{l-1}))``.
    """
    rates = [scale * s.rate for s in circuit.noise if s is not None and s.rate != 0.0]
    if strict and rates and max(rates) - min(rates) > 1e-12 * max(rates):
        raise ValueError("count-resolved evolution requires a uniform per-site rate")
    if any(r < 0 for r in rates):
        raise ValueError("count-resolved evolution requires physical noise")
    if l_max is None:
        l_max = default_lmax(len(rates), max(rates) if rates else 0.0)
    n = circuit.n_qubits
    layers = [DensityMatrix.from_bits(circuit.initial_bits).data] + [
        np.zeros((2**n, 2**n), dtype=complex) for _ in range(l_max)
    ]
    for gate, noise in zip(circuit.gates, circuit.noise):
        u = _superop(gate.unitary)
        if noise is None or noise.rate == 0.0 or scale == 0.0:
            layers = [_apply_local_superop(r, u, gate.qubits, n) for r in layers]
            continue
        p = scale * noise.rate
        if p >= 1:
            raise ValueError("scaled error probability must be below 1")
        stay = (1.0 - p) * u
        fire = p * channel_superop(noise.firing) @ u
        new = [_apply_local_superop(layers[0], stay, gate.qubits, n)]
        for l in range(1, l_max + 1):
            new.append(
                _apply_local_superop(layers[l], stay, gate.qubits, n)
                + _apply_local_superop(layers[l - 1], fire, gate.qubits, n)
            )
        layers = new
    weighted = [(float(np.trace(r).real), DensityMatrix(n, r)) for r in layers]
    truncated = 1.0 - sum(w for w, _ in weighted)
    return CountResolvedState(l_max, weighted, truncated)


# -- Pauli action in flat index form ------------------------------------------

def _index_mask(mask: int, n: int) -> int:
    """Convert a qubit-bit mask (bit q = qubit q) to a flat-index mask."""
    out = 0
    for q in range(n):
        if (mask >> q) & 1:
            out |= 1 << (n - 1 - q)
    return out


@lru_cache(maxsize=16)
def _parity_table(n: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.int64)
    par = np.zeros_like(idx)
    for b in range(n):
        par ^= (idx >> b) & 1
    return par


def _pauli_index_data(p: PauliString) -> tuple[int, int, complex]:
    n = p.n_qubits
    y = bin(p.x & p.z).count("1")
    return _index_mask(p.x, n), _index_mask(p.z, n), 1j**y


def pauli_expectation(rho: DensityMatrix | np.ndarray, p: PauliString | str) -> float:
    """``Tr(P rho)`` without building ``P``."""
    p = parse_pauli(p)
    data = rho.data if isinstance(rho, DensityMatrix) else rho
    n = p.n_qubits
    if data.shape[0] != 2**n:
        raise ValueError("dimension mismatch")
    xi, zi, ph = _pauli_index_data(p)
    k = np.arange(2**n)
    signs = 1 - 2 * _parity_table(n)[k & zi]
    return float((ph * np.sum(signs * data[k, k ^ xi])).real)


def expectation(state: DensityMatrix, o: Sequence[SignedPauliTerm] | PauliString | str) -> float:
    """``sum_i c_i Tr(G_i rho)`` for a list of signed terms (or a single string)."""
    if isinstance(o, (PauliString, str)):
        return pauli_expectation(state, o)
    return float(sum(t.coefficient * pauli_expectation(state, t.string) for t in o))


def conjugate_by_pauli(rho: np.ndarray, p: PauliString) -> np.ndarray:
    """``P rho P`` by index permutation and signs (reference path)."""
    n = p.n_qubits
    xi, zi, _ = _pauli_index_data(p)
    k = np.arange(2**n)
    s = 1 - 2 * _parity_table(n)[k & zi]
    # (P rho P)[a, b] = c_{a^x} c*_{b^x} rho[a^x, b^x]; the i^y phases cancel
    return (s[k ^ xi][:, None] * s[k ^ xi][None, :]) * rho[np.ix_(k ^ xi, k ^ xi)]


def apply_pauli_channel(rho: DensityMatrix, ch: PauliChannel) -> DensityMatrix:
    """Apply a global Pauli channel by summing Pauli conjugations."""
    out = sum(w * conjugate_by_pauli(rho.data, p) for p, w in ch.terms.items())
    return DensityMatrix(rho.n_qubits, np.asarray(out, dtype=complex))


def apply_pauli_channel_ptm(rho: DensityMatrix, ch: PauliChannel) -> DensityMatrix:
    """Apply a Pauli channel by scaling Pauli-basis coefficients with ``f_G``."""
    from .channels import ptm_diagonal

    n = rho.n_qubits
    ptm = ptm_diagonal(ch)
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    for g, f in ptm.eigenvalues.items():
        c = np.trace(g.matrix() @ rho.data)
        out += f * c * g.matrix() / d
    return DensityMatrix(n, out)


def symmetry_projector_expectations(
    state: DensityMatrix, symmetry: PauliString, s: int, o: PauliString
) -> tuple[float, float]:
    """``(Tr(O Pi_s rho), Tr(Pi_s rho))`` with ``Pi_s = (1 + s S) / 2``."""
    phase, os_ = multiply(o, symmetry)
    t_os = (phase * pauli_expectation(state, os_)).real if not os_.is_identity else phase.real
    t_o = pauli_expectation(state, o)
    t_s = pauli_expectation(state, symmetry)
    return 0.5 * (t_o + s * t_os), 0.5 * (1.0 + s * t_s)


def symmetry_partition(
    state: DensityMatrix, symmetry: PauliString | str, s: int, o: PauliString | str
) -> tuple[float, float, float]:
    """Expectations in the passing and failing symmetry branches, and ``p_pass``."""
    symmetry, o = parse_pauli(symmetry), parse_pauli(o)
    if s not in (1, -1):
        raise ValueError("symmetry eigenvalue must be +1 or -1")
    if not commutes(symmetry, o):
        raise ValueError("observable anticommutes with the symmetry")
    num_pass, p_pass = symmetry_projector_expectations(state, symmetry, s, o)
    num_fail, p_fail = symmetry_projector_expectations(state, symmetry, -s, o)
    if p_pass < 1e-12:
        raise ValueError("symmetry-passing branch is empty")
    o_fail = num_fail / p_fail if p_fail > 1e-12 else 0.0
    return num_pass / p_pass, o_fail, p_pass


# -- Monte Carlo trajectories ------------------------------------------------

@dataclass(frozen=True)
class MitigationPlan:
    """What a trajectory samples and measures.

    ``quasi`` holds one optional decomposition per gate (local to the gate's
    qubits) whose insertions are applied after the site noise.  When
    ``symmetry`` is set the trajectory also reports whether the measured
    symmetry eigenvalue equals ``symmetry_value``.
    """

    observable: PauliString
    scale: float = 1.0
    quasi: tuple[QuasiDecomposition | None, ...] = ()
    symmetry: PauliString | None = None
    symmetry_value: int = 1

    @property
    def one_norm(self) -> float:
        return float(np.prod([d.one_norm for d in self.quasi if d is not None])) if self.quasi else 1.0


@dataclass
class TrajectoryBatch:
    values: np.ndarray
    signs: np.ndarray
    passed: np.ndarray
    one_norm: float

    def __len__(self) -> int:
        return len(self.values)

    @property
    def weighted(self) -> np.ndarray:
        return self.one_norm * self.signs * self.values

    def estimate(self) -> tuple[float, float]:
        """Mean of ``Q * sign * value`` and its standard error."""
        w = self.weighted
        return float(w.mean()), float(w.std(ddof=1) / math.sqrt(len(w)))

    def postselected_estimate(self) -> tuple[float, float]:
        w = self.weighted[self.passed]
        return float(w.mean()), float(w.std(ddof=1) / math.sqrt(len(w)))

    @staticmethod
    def concat(batches: Sequence["TrajectoryBatch"]) -> "TrajectoryBatch":
        return TrajectoryBatch(
            np.concatenate([b.values for b in batches]),
            np.concatenate([b.signs for b in batches]),
            np.concatenate([b.passed for b in batches]),
            batches[0].one_norm,
        )


class _LocalPauliTable:
    """Flat-index masks and phases for a list of local Paulis placed on ``qubits``."""

    def __init__(self, strings: Sequence[PauliString], qubits: Sequence[int], n: int):
        emb = [s.embed(n, qubits) for s in strings]
        data = [_pauli_index_data(p) for p in emb]
        self.x = np.array([d[0] for d in data], dtype=np.int64)
        self.z = np.array([d[1] for d in data], dtype=np.int64)
        self.phase = np.array([d[2] for d in data], dtype=complex)


def _apply_paulis(psi: np.ndarray, x: np.ndarray, z: np.ndarray, phase: np.ndarray, n: int) -> np.ndarray:
    """Row ``b`` of ``psi`` gets its own Pauli ``(x[b], z[b])``."""
    k = np.arange(psi.shape[1], dtype=np.int64)
    src = k[None, :] ^ x[:, None]
    signs = 1 - 2 * _parity_table(n)[src & z[:, None]]
    return phase[:, None] * signs * np.take_along_axis(psi, src, axis=1)


def _apply_gate_batch(psi: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    b = psi.shape[0]
    k = len(qubits)
    t = psi.reshape((b,) + (2,) * n)
    axes = [1 + q for q in qubits]
    t = np.moveaxis(t, axes, range(1, k + 1))
    shape = t.shape
    t = np.einsum("ij,bjr->bir", u, t.reshape(b, 2**k, -1)).reshape(shape)
    t = np.moveaxis(t, range(1, k + 1), axes)
    return np.ascontiguousarray(t).reshape(b, 2**n)


def _batch_pauli_expectation(psi: np.ndarray, p: PauliString) -> np.ndarray:
    n = p.n_qubits
    xi, zi, ph = _pauli_index_data(p)
    k = np.arange(psi.shape[1])
    signs = 1 - 2 * _parity_table(n)[k & zi]
    return (ph * np.sum(psi[:, k ^ xi].conj() * signs * psi, axis=1)).real


def run_trajectories(
    circuit: NoisyCircuit,
    plan: MitigationPlan,
    n_traj: int,
    rng: np.random.Generator,
    batch_size: int = 20000,
) -> TrajectoryBatch:
    """Sample ``n_traj`` pure-state trajectories with single-shot +-1 readout."""
    out = []
    remaining = n_traj
    while remaining > 0:
        b = min(batch_size, remaining)
        out.append(_run_batch(circuit, plan, b, rng))
        remaining -= b
    if not out:
        raise ValueError("n_traj must be positive")
    return TrajectoryBatch.concat(out)


def _run_batch(circuit: NoisyCircuit, plan: MitigationPlan, b: int, rng: np.random.Generator) -> TrajectoryBatch:
    n = circuit.n_qubits
    quasi = plan.quasi or (None,) * len(circuit.gates)
    if len(quasi) != len(circuit.gates):
        raise ValueError("plan needs one quasi entry per gate")
    psi = np.zeros((b, 2**n), dtype=complex)
    psi[:, int("".join(map(str, circuit.initial_bits)), 2)] = 1.0
    signs = np.ones(b, dtype=np.int8)
    for gate, noise, dec in zip(circuit.gates, circuit.noise, quasi):
        psi = _apply_gate_batch(psi, gate.unitary, gate.qubits, n)
        if noise is not None and noise.rate != 0.0 and plan.scale != 0.0:
            rate = plan.scale * noise.rate
            if not 0.0 <= rate < 1.0:
                raise ValueError("trajectory sampling requires physical noise rates")
            if not noise.firing.is_physical:
                raise ValueError("trajectory sampling requires a physical firing distribution")
            fired = np.flatnonzero(rng.random(b) < rate)
            if fired.size:
                strings = list(noise.firing.terms)
                probs = np.array([noise.firing.terms[s] for s in strings])
                pick = rng.choice(len(strings), size=fired.size, p=probs / probs.sum())
                tab = _LocalPauliTable(strings, gate.qubits, n)
                psi[fired] = _apply_paulis(psi[fired], tab.x[pick], tab.z[pick], tab.phase[pick], n)
        if dec is not None:
            idx = dec.sample_index(rng, b)
            signs = signs * dec.signs[idx]
            tab = _LocalPauliTable(dec.insertions, gate.qubits, n)
            psi = _apply_paulis(psi, tab.x[idx], tab.z[idx], tab.phase[idx], n)
    o = plan.observable
    e_o = _batch_pauli_expectation(psi, o)
    if plan.symmetry is None:
        values = np.where(rng.random(b) < 0.5 * (1.0 + e_o), 1, -1).astype(np.int8)
        passed = np.ones(b, dtype=bool)
    else:
        s = plan.symmetry
        if not commutes(s, o):
            raise ValueError("observable must commute with the symmetry")
        e_s = _batch_pauli_expectation(psi, s)
        phase, os_ = multiply(o, s)
        e_os = np.real(phase) * (
            _batch_pauli_expectation(psi, os_) if not os_.is_identity else np.ones(b)
        )
        combos = np.array([(1, 1), (1, -1), (-1, 1), (-1, -1)])
        probs = 0.25 * (
            1.0 + combos[:, 0, None] * e_o + combos[:, 1, None] * e_s + (combos[:, 0] * combos[:, 1])[:, None] * e_os
        )
        cdf = np.cumsum(np.clip(probs, 0.0, None), axis=0)
        u = rng.random(b) * cdf[-1]
        pick = np.minimum((u[None, :] >= cdf).sum(axis=0), 3)
        values = combos[pick, 0].astype(np.int8)
        passed = combos[pick, 1] == plan.symmetry_value
    return TrajectoryBatch(values, signs, passed, plan.one_norm)


def mc_trajectory(
    circuit: NoisyCircuit, plan: MitigationPlan, rng: np.random.Generator
) -> tuple[float, int, bool]:
    """One trajectory: ``(outcome, sign, passed)``."""
    t = _run_batch(circuit, plan, 1, rng)
    return float(t.values[0]), int(t.signs[0]), bool(t.passed[0])

"""Fermi-Hubbard swap-network circuits under the Jordan-Wigner encoding.

Modes are numbered spin-block: ``mode = spin * n_sites + site`` with sites
row-major on an ``lx x ly`` open lattice.  Qubit ``i`` initially holds mode
``i``.

One layer is a full odd-even transposition network of fermionic swaps, so
every pair of modes becomes adjacent exactly once.  When the two modes in
a slot are

* a hopping pair (same spin, neighbouring sites), a two-parameter Givens
  rotation is applied first and then the fermionic swap;
* an on-site pair (same site, opposite spins), a controlled-phase is fused
  into the swap as a single gate;
* anything else, only the fermionic swap is applied.

For the 2x2 lattice this gives 28 swap slots plus 8 hopping gates, i.e. 36
two-qubit gates per layer and 144 for four layers.  Each layer reverses
the mode order, which :attr:`NoisyCircuit.mode_permutation` tracks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import PauliChannel, detectable_channel, parity_undetectable_subgroup
from .pauli import PauliString, SignedPauliTerm, full_pauli_group
from .simulator import Gate, NoisyCircuit, SiteNoise

TWO_PI = 2.0 * math.pi
PRNG_NAME = "numpy.PCG64"


def fswap() -> np.ndarray:
    return np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=complex
    )


def givens(theta: float, phi: float) -> np.ndarray:
    """Number-conserving rotation in the ``{|01>, |10>}`` block."""
    c, s = math.cos(theta), math.sin(theta)
    u = np.eye(4, dtype=complex)
    u[1, 1] = c
    u[1, 2] = -np.exp(1j * phi) * s
    u[2, 1] = np.exp(-1j * phi) * s
    u[2, 2] = c
    return u


def cphase(phi: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * phi)]).astype(complex)


def lattice_bonds(lx: int, ly: int) -> list[tuple[int, int]]:
    """Nearest-neighbour site pairs on an open lattice, horizontal bonds first."""
    bonds = []
    for y in range(ly):
        for x in range(lx - 1):
            bonds.append((y * lx + x, y * lx + x + 1))
    for y in range(ly - 1):
        for x in range(lx):
            bonds.append((y * lx + x, (y + 1) * lx + x))
    return bonds


def hopping_pairs(lx: int, ly: int) -> list[tuple[int, int]]:
    n_sites = lx * ly
    return [(spin * n_sites + a, spin * n_sites + b) for spin in (0, 1) for a, b in lattice_bonds(lx, ly)]


def onsite_pairs(lx: int, ly: int) -> list[tuple[int, int]]:
    n_sites = lx * ly
    return [(s, s + n_sites) for s in range(n_sites)]


def params_per_layer(lx: int, ly: int) -> int:
    return 2 * len(hopping_pairs(lx, ly)) + len(onsite_pairs(lx, ly))


@dataclass(frozen=True)
class FhCircuitSpec:
    lx: int = 2
    ly: int = 2
    layers: int = 4
    params: tuple[float, ...] | None = field(default=None, repr=False)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lx < 1 or self.ly < 1 or self.lx * self.ly < 1:
            raise ValueError("lattice dimensions must be positive")
        if 2 * self.lx * self.ly < 2:
            raise ValueError("need at least two modes")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")

    @property
    def n_qubits(self) -> int:
        return 2 * self.lx * self.ly

    @property
    def n_params(self) -> int:
        return self.layers * params_per_layer(self.lx, self.ly)

    def resolved_params(self) -> np.ndarray:
        """Explicit parameters, or uniform ``[0, 2 pi)`` draws from the seed."""
        if self.params is not None:
            p = np.asarray(self.params, dtype=float)
            if p.shape != (self.n_params,):
                raise ValueError(f"expected {self.n_params} parameters, got {p.size}")
            return p
        rng = np.random.Generator(np.random.PCG64(self.seed))
        return rng.uniform(0.0, TWO_PI, size=self.n_params)


def build_circuit(spec: FhCircuitSpec) -> NoisyCircuit:
    n = spec.n_qubits
    params = iter(spec.resolved_params().tolist())
    hop = {frozenset(p) for p in hopping_pairs(spec.lx, spec.ly)}
    onsite = {frozenset(p) for p in onsite_pairs(spec.lx, spec.ly)}
    position = list(range(n))  # position[q] = mode held by qubit q
    gates: list[Gate] = []
    for _ in range(spec.layers):
        # draw order: hopping parameters by pair order, then on-site, so a
        # layer's parameters stay grouped regardless of network schedule
        hop_params = {
            frozenset(p): (next(params), next(params)) for p in hopping_pairs(spec.lx, spec.ly)
        }
        onsite_params = {frozenset(p): next(params) for p in onsite_pairs(spec.lx, spec.ly)}
        for rnd in range(n):
            for q in range(rnd % 2, n - 1, 2):
                pair = frozenset((position[q], position[q + 1]))
                if pair in hop:
                    theta, phi = hop_params[pair]
                    gates.append(Gate("givens", (q, q + 1), givens(theta, phi)))
                if pair in onsite:
                    u = fswap() @ cphase(onsite_params[pair])
                    gates.append(Gate("cphase_fswap", (q, q + 1), u))
                else:
                    gates.append(Gate("fswap", (q, q + 1), fswap()))
                position[q], position[q + 1] = position[q + 1], position[q]
    if spec.lx * spec.ly == 4 and spec.layers == 4 and len(gates) != 144:
        raise AssertionError("2x2 circuit must contain 144 two-qubit gates")
    initial = tuple(i % 2 for i in range(n))
    return NoisyCircuit(
        n_qubits=n,
        gates=tuple(gates),
        noise=(None,) * len(gates),
        initial_bits=initial,
        mode_permutation=tuple(position),
    )


def _jw_hopping(n: int, qa: int, qb: int) -> list[PauliString]:
    lo, hi = sorted((qa, qb))
    zmask = sum(1 << q for q in range(lo + 1, hi))
    ends = (1 << lo) | (1 << hi)
    return [PauliString(n, ends, zmask), PauliString(n, ends, zmask | ends)]


def hamiltonian_terms(
    lx: int, ly: int, t: float = 1.0, u: float = 1.0, ordering: Sequence[int] | None = None
) -> list[SignedPauliTerm]:
    """Jordan-Wigner Pauli terms of the Fermi-Hubbard Hamiltonian.

    ``ordering[q]`` is the mode held by qubit ``q`` (identity by default).
    Hopping ``-t (a_i^dag a_j + h.c.)`` gives ``-t/2 (X Z..Z X + Y Z..Z Y)``;
    ``u n_up n_down`` gives ``u/4 (I - Z_a - Z_b + Z_a Z_b)``.  Repeated
    strings are merged and zero coefficients dropped.
    """
    n = 2 * lx * ly
    ordering = list(range(n)) if ordering is None else list(ordering)
    if sorted(ordering) != list(range(n)):
        raise ValueError("ordering must be a permutation of the modes")
    qubit_of = {m: q for q, m in enumerate(ordering)}
    acc: dict[PauliString, float] = {}

    def add(p: PauliString, c: float) -> None:
        acc[p] = acc.get(p, 0.0) + c

    if t != 0.0:
        for a, b in hopping_pairs(lx, ly):
            for p in _jw_hopping(n, qubit_of[a], qubit_of[b]):
                add(p, -t / 2.0)
    if u != 0.0:
        for a, b in onsite_pairs(lx, ly):
            qa, qb = qubit_of[a], qubit_of[b]
            add(PauliString.identity(n), u / 4.0)
            add(PauliString(n, 0, 1 << qa), -u / 4.0)
            add(PauliString(n, 0, 1 << qb), -u / 4.0)
            add(PauliString(n, 0, (1 << qa) | (1 << qb)), u / 4.0)
    return [SignedPauliTerm(c, p) for p, c in sorted(acc.items()) if c != 0.0]


def observable_strings(lx: int, ly: int, ordering: Sequence[int] | None = None) -> list[PauliString]:
    """Non-identity Pauli strings appearing in the Hamiltonian."""
    return [t.string for t in hamiltonian_terms(lx, ly, 1.0, 1.0, ordering) if not t.string.is_identity]


def parity_symmetry(n: int) -> PauliString:
    if n < 1:
        raise ValueError("n must be positive")
    return PauliString(n, 0, (1 << n) - 1)


NOISE_MODELS = ("depolarizing", "detectable")


def local_site_noise(model: str | PauliChannel, p: float) -> SiteNoise:
    """Two-qubit site noise with per-site firing probability ``p``."""
    if p < 0 or p >= 1:
        raise ValueError(f"per-site probability {p} must lie in [0, 1)")
    if isinstance(model, PauliChannel):
        return SiteNoise(p, model)
    if model == "depolarizing":
        return SiteNoise.group_error(p, full_pauli_group(2))
    if model == "detectable":
        firing = detectable_channel(1.0, full_pauli_group(2), parity_undetectable_subgroup(2))
        return SiteNoise(p, firing)
    raise ValueError(f"unknown noise model {model!r}")


def attach_noise(circuit: NoisyCircuit, model: str | PauliChannel, mu: float) -> NoisyCircuit:
    """Follow every two-qubit gate with the same channel, spreading ``mu`` evenly.

    For ``depolarizing`` ``mu`` is the mean count of group-error firings;
    for ``detectable`` it is the mean detectable error count ``mu_d``.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    two_qubit = [i for i, g in enumerate(circuit.gates) if len(g.qubits) == 2]
    if not two_qubit:
        return circuit
    p = mu / len(two_qubit)
    if mu == 0:
        return circuit.noiseless()
    site = local_site_noise(model, p)
    noise = [site if len(g.qubits) == 2 else None for g in circuit.gates]
    return circuit.with_noise(noise)


def fh_circuit(lx: int = 2, ly: int = 2, layers: int = 4, seed: int = 0) -> NoisyCircuit:
    return build_circuit(FhCircuitSpec(lx=lx, ly=ly, layers=layers, seed=seed))

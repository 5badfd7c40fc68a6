"""Pauli and group error channels.

A :class:`PauliChannel` is a signed weight distribution over Pauli strings
acting by conjugation, ``rho -> sum_E w_E E rho E``.  Physical noise has
non-negative weights; inverses and quasi-probability maps reuse the same
type with some negative weights.

Pauli channels are diagonal in the Pauli basis, so their transfer matrix
is kept as the eigenvalue map ``f_G = sum_E w_E eta(E, G)`` and never
materialised as a ``4^n x 4^n`` matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import (
    PauliString,
    PauliSubgroup,
    all_paulis,
    full_pauli_group,
    parse_pauli,
    partition_detectable,
    span_group,
)

PRUNE_TOL = 1e-15
SINGULAR_TOL = 1e-12


class SingularChannelError(ValueError):
    """The channel has a vanishing transfer-matrix eigenvalue."""


@dataclass(frozen=True)
class PauliChannel:
    n_qubits: int
    terms: Mapping[PauliString, float] = field(hash=False)

    def __post_init__(self) -> None:
        clean = {}
        for p, w in self.terms.items():
            if p.n_qubits != self.n_qubits:
                raise ValueError("term size does not match channel size")
            w = float(w)
            if not math.isfinite(w):
                raise ValueError("channel weights must be finite")
            if abs(w) > PRUNE_TOL:
                clean[p] = w
        total = sum(clean.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1")
        ordered = dict(sorted(clean.items(), key=lambda kv: (kv[0].x, kv[0].z)))
        object.__setattr__(self, "terms", ordered)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliChannel":
        return cls(n_qubits, {PauliString.identity(n_qubits): 1.0})

    @classmethod
    def from_weights(cls, pairs: Iterable[tuple[str | PauliString, float]]) -> "PauliChannel":
        acc: dict[PauliString, float] = {}
        for label, w in pairs:
            p = parse_pauli(label)
            acc[p] = acc.get(p, 0.0) + float(w)
        if not acc:
            raise ValueError("empty weight list")
        n = next(iter(acc)).n_qubits
        return cls(n, acc)

    @property
    def is_physical(self) -> bool:
        return all(w >= 0 for w in self.terms.values())

    @property
    def identity_weight(self) -> float:
        return self.terms.get(PauliString.identity(self.n_qubits), 0.0)

    @property
    def non_identity_probability(self) -> float:
        """Total weight on non-identity strings (``p_eps``)."""
        return 1.0 - self.identity_weight

    @property
    def one_norm(self) -> float:
        return float(sum(abs(w) for w in self.terms.values()))

    def weight(self, p: PauliString | str) -> float:
        return self.terms.get(parse_pauli(p), 0.0)

    def allclose(self, other: "PauliChannel", atol: float = 1e-12) -> bool:
        if self.n_qubits != other.n_qubits:
            return False
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= atol for k in keys)

    def embed(self, n_qubits: int, qubits: Sequence[int]) -> "PauliChannel":
        return PauliChannel(n_qubits, {p.embed(n_qubits, qubits): w for p, w in self.terms.items()})

    def __repr__(self) -> str:
        body = ", ".join(f"{p.label}: {w:.6g}" for p, w in self.terms.items())
        return f"PauliChannel({{{body}}})"


def pure_group_channel(group: PauliSubgroup) -> PauliChannel:
    """``J_{1,E}``: uniform over the group elements."""
    w = 1.0 / group.order
    return PauliChannel(group.n_qubits, {e: w for e in group.elements})


def group_weights(p: float, group: PauliSubgroup) -> dict[PauliString, float]:
    """Weights of ``(1 - p) I + p J_{1,E}`` for any real ``p`` (signed if ``p < 0``)."""
    ident = PauliString.identity(group.n_qubits)
    w = {e: p / group.order for e in group.elements}
    w[ident] = w.get(ident, 0.0) + (1.0 - p)
    return w


@dataclass(frozen=True)
class GroupChannel:
    """Group error ``J_{p,E}``: with probability ``p`` apply a uniform element of ``E``."""

    p: float
    group: PauliSubgroup

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"group error probability must lie in [0, 1], got {self.p}")

    @property
    def n_qubits(self) -> int:
        return self.group.n_qubits

    @property
    def p_eps(self) -> float:
        return (self.group.order - 1) / self.group.order * self.p


def group_to_pauli(gc: GroupChannel) -> PauliChannel:
    return PauliChannel(gc.n_qubits, group_weights(gc.p, gc.group))


def _eta_matrix(strings: Sequence[PauliString], basis: Sequence[PauliString]) -> np.ndarray:
    """``eta(strings[i], basis[j])`` as a +-1 integer matrix."""
    sx = np.array([s.x for s in strings], dtype=np.int64)[:, None]
    sz = np.array([s.z for s in strings], dtype=np.int64)[:, None]
    bx = np.array([b.x for b in basis], dtype=np.int64)[None, :]
    bz = np.array([b.z for b in basis], dtype=np.int64)[None, :]
    sym = (sx & bz) ^ (sz & bx)
    parity = np.zeros_like(sym)
    while np.any(sym):
        parity ^= sym & 1
        sym >>= 1
    return 1 - 2 * parity


@dataclass(frozen=True)
class PtmDiagonal:
    """Eigenvalues of a Pauli channel in the Pauli basis."""

    n_qubits: int
    eigenvalues: Mapping[PauliString, float] = field(hash=False)

    def __getitem__(self, g: PauliString | str) -> float:
        return self.eigenvalues[parse_pauli(g)]

    def as_array(self) -> np.ndarray:
        return np.array([self.eigenvalues[g] for g in all_paulis(self.n_qubits)])


def ptm_diagonal(ch: PauliChannel, basis: Sequence[PauliString] | None = None) -> PtmDiagonal:
    """``f_G = sum_E w_E eta(E, G)``, for all ``4^n`` strings unless ``basis`` is given."""
    basis = list(basis) if basis is not None else all_paulis(ch.n_qubits)
    strings = list(ch.terms)
    weights = np.array([ch.terms[s] for s in strings])
    f = weights @ _eta_matrix(strings, basis)
    return PtmDiagonal(ch.n_qubits, dict(zip(basis, f.tolist())))


def channel_from_ptm(ptm: PtmDiagonal) -> PauliChannel:
    """Inverse of :func:`ptm_diagonal`: ``w_E = 4^-n sum_G f_G eta(E, G)``."""
    basis = all_paulis(ptm.n_qubits)
    f = np.array([ptm.eigenvalues[g] for g in basis])
    w = _eta_matrix(basis, basis) @ f / len(basis)
    return PauliChannel(ptm.n_qubits, dict(zip(basis, w.tolist())))


def compose(a: PauliChannel, b: PauliChannel) -> PauliChannel:
    """The channel ``a o b`` (apply ``b`` first).  Pauli channels commute."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("cannot compose channels of different sizes")
    out: dict[PauliString, float] = {}
    for pa, wa in a.terms.items():
        for pb, wb in b.terms.items():
            g = pa * pb
            out[g] = out.get(g, 0.0) + wa * wb
    return PauliChannel(a.n_qubits, out)


def compose_pure_groups(e: PauliSubgroup, b: PauliSubgroup) -> PauliSubgroup:
    """Group generated by the union of the generators of ``e`` and ``b``."""
    if e.n_qubits != b.n_qubits:
        raise ValueError("size mismatch")
    return span_group(list(e.generators) + list(b.generators), n_qubits=e.n_qubits)


def group_inverse(gc: GroupChannel) -> PauliChannel:
    """Closed-form inverse ``J_{-alpha,E}`` with ``alpha = p / (1 - p)``."""
    if gc.p >= 1.0:
        raise SingularChannelError("a pure group channel (p = 1) has no inverse")
    alpha = gc.p / (1.0 - gc.p)
    return PauliChannel(gc.n_qubits, group_weights(-alpha, gc.group))


def invert_channel(ch: PauliChannel) -> PauliChannel:
    """Exact inverse by reciprocating the transfer-matrix eigenvalues."""
    ptm = ptm_diagonal(ch)
    vals = np.array(list(ptm.eigenvalues.values()))
    if np.min(np.abs(vals)) < SINGULAR_TOL:
        raise SingularChannelError("channel has a vanishing transfer-matrix eigenvalue")
    inv = PtmDiagonal(ch.n_qubits, {g: 1.0 / f for g, f in ptm.eigenvalues.items()})
    return channel_from_ptm(inv)


def approximate_inverse(ch: PauliChannel) -> PauliChannel:
    """First-order inverse ``G_{-p_eps}``: flip the sign of every error weight."""
    ident = PauliString.identity(ch.n_qubits)
    w = {p: -v for p, v in ch.terms.items() if p != ident}
    w[ident] = 1.0 + ch.non_identity_probability
    return PauliChannel(ch.n_qubits, w)


def identity_residual(ch: PauliChannel) -> float:
    """Largest deviation of ``ch`` from the identity channel, over all weights."""
    ident = PauliString.identity(ch.n_qubits)
    return max(abs(w - (1.0 if p == ident else 0.0)) for p, w in ch.terms.items())


def symmetry_filtered_channel(
    gc: GroupChannel, symmetries: Sequence[PauliString]
) -> tuple[GroupChannel, float]:
    """Residual group channel after post-selecting on ``symmetries``, and ``p_d``.

    Returns ``(J_{r,Q}, p_d)`` with ``p_d = (|E| - |Q|) / |E| * p`` and
    ``r = |Q| p / (|E| (1 - p) + |Q| p)``.
    """
    q_group, _ = partition_detectable(gc.group, symmetries)
    e_order, q_order = gc.group.order, q_group.order
    p_d = (e_order - q_order) / e_order * gc.p
    denom = e_order * (1.0 - gc.p) + q_order * gc.p
    r = q_order * gc.p / denom if denom > 0 else 0.0
    return GroupChannel(r, q_group), p_d


def _detectable_elements(e: PauliSubgroup, qsub: PauliSubgroup) -> list[PauliString]:
    if not qsub.is_subgroup_of(e):
        raise ValueError("qsub is not a subgroup of e")
    return [v for v in e.elements if v not in qsub]


def detectable_channel(q: float, e: PauliSubgroup, qsub: PauliSubgroup) -> PauliChannel:
    """``V_q``: identity with ``1 - q``, uniform ``q`` over ``E \\ Q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    det = _detectable_elements(e, qsub)
    if not det:
        raise ValueError("E \\ Q is empty")
    w = {v: q / len(det) for v in det}
    w[PauliString.identity(e.n_qubits)] = 1.0 - q
    return PauliChannel(e.n_qubits, w)


def transform_map(gc: GroupChannel, q: float, qsub: PauliSubgroup) -> PauliChannel:
    """Signed map ``M = V_q J_{p,E}^{-1}`` so that ``M o J_{p,E} = V_q``.

    Weights are ``(1 - q) / (1 - p)`` on the identity (plus its ``Q`` share),
    ``-p / ((1 - p)|E|)`` on the other elements of ``Q`` and
    ``(q - p_d) / ((1 - p)(|E| - |Q|))`` on ``E \\ Q``.
    """
    if gc.p >= 1.0:
        raise SingularChannelError("cannot transform a pure group channel")
    det = _detectable_elements(gc.group, qsub)
    e_order, q_order = gc.group.order, qsub.order
    p = gc.p
    p_d = (e_order - q_order) / e_order * p
    beta_q = -p / ((1.0 - p) * e_order)
    beta_v = (q - p_d) / ((1.0 - p) * (e_order - q_order))
    w = {el: beta_q for el in qsub.elements}
    for v in det:
        w[v] = beta_v
    ident = PauliString.identity(gc.n_qubits)
    w[ident] = (1.0 - q) / (1.0 - p) + beta_q
    return PauliChannel(gc.n_qubits, w)


# -- named presets -----------------------------------------------------------

def depolarizing(p: float, n_qubits: int = 2) -> GroupChannel:
    return GroupChannel(p, full_pauli_group(n_qubits))


def parity_undetectable_subgroup(n_qubits: int = 2) -> PauliSubgroup:
    """Elements of the full group that commute with ``Z...Z``."""
    parity = PauliString(n_qubits, 0, (1 << n_qubits) - 1)
    q, _ = partition_detectable(full_pauli_group(n_qubits), [parity])
    return q


def channel_preset(name: str, p: float) -> PauliChannel:
    """``depolarizing2``, ``depolarizing1``, ``dephasing`` or ``detectable2``."""
    name = name.lower()
    if name == "depolarizing2":
        return group_to_pauli(depolarizing(p, 2))
    if name == "depolarizing1":
        return group_to_pauli(depolarizing(p, 1))
    if name == "dephasing":
        return PauliChannel.from_weights([("I", 1 - p), ("Z", p)])
    if name == "detectable2":
        return detectable_channel(p, full_pauli_group(2), parity_undetectable_subgroup(2))
    raise ValueError(f"unknown channel preset {name!r}")


def parse_channel_literal(spec: Mapping) -> PauliChannel:
    """Channel from a config table: ``{preset, p}`` or ``{weights = [[label, w], ...]}``."""
    keys = set(spec)
    if keys == {"preset", "p"}:
        return channel_preset(str(spec["preset"]), float(spec["p"]))
    if keys == {"weights"}:
        return PauliChannel.from_weights((str(k), float(v)) for k, v in spec["weights"])
    raise ValueError(f"channel literal needs 'preset'+'p' or 'weights', got keys {sorted(keys)}")

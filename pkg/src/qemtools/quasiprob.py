"""Quasi-probability decompositions and their sampling-cost formulas.

A signed Pauli map ``sum_i w_i (E_i . E_i)`` is simulated by drawing
insertion ``E_i`` with probability ``|w_i| / Q`` and weighting the outcome
by ``Q * sgn(w_i)``, where ``Q = sum_i |w_i|`` is the one-norm.  The
variance grows by roughly ``Q**2``, which is the sampling cost factor.

Functions whose names end in ``_exact`` use the closed forms valid at any
error rate; the others are the first-order (small error rate) versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import PauliChannel
from .pauli import PauliString


@dataclass(frozen=True)
class QuasiDecomposition:
    """Sampleable form of a signed Pauli map."""

    n_qubits: int
    insertions: tuple[PauliString, ...]
    probabilities: np.ndarray
    signs: np.ndarray
    one_norm: float

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        probs.setflags(write=False)
        signs = np.asarray(self.signs, dtype=np.int8)
        signs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    @property
    def basis_ops(self) -> list[tuple[float, int, PauliString]]:
        return [
            (float(p), int(s), e)
            for p, s, e in zip(self.probabilities, self.signs, self.insertions)
        ]

    @property
    def cost(self) -> float:
        """Sampling cost factor ``Q**2``."""
        return self.one_norm**2

    def to_channel(self) -> PauliChannel:
        """Rebuild the signed map ``Q * sum_i s_i p_i E_i``."""
        return PauliChannel(
            self.n_qubits,
            {
                e: self.one_norm * float(s) * float(p)
                for p, s, e in zip(self.probabilities, self.signs, self.insertions)
            },
        )

    def sample_index(self, rng: np.random.Generator, size: int | None = None):
        """Index (or array of indices) into :attr:`insertions`."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        return np.minimum(idx, len(self.insertions) - 1)


def decompose(signed_map: PauliChannel) -> QuasiDecomposition:
    """Split a trace-preserving signed map into probabilities and signs."""
    if not signed_map.terms:
        raise ValueError("cannot decompose an all-zero map")
    insertions = tuple(signed_map.terms)
    w = np.array([signed_map.terms[e] for e in insertions])
    q = float(np.abs(w).sum())
    return QuasiDecomposition(
        n_qubits=signed_map.n_qubits,
        insertions=insertions,
        probabilities=np.abs(w) / q,
        signs=np.where(w < 0, -1, 1),
        one_norm=q,
    )


def sample(dec: QuasiDecomposition, rng: np.random.Generator) -> tuple[PauliString, int]:
    """Draw one ``(insertion, sign)`` pair."""
    i = int(dec.sample_index(rng))
    return dec.insertions[i], int(dec.signs[i])


# -- cost formulas -----------------------------------------------------------

def cost_invert_group(p: float, group_order: int) -> float:
    """Cost ``Q**2`` of cancelling ``J_{p,E}`` exactly."""
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    if group_order < 1:
        raise ValueError("group order must be positive")
    return (1.0 + 2.0 * (group_order - 1) * p / (group_order * (1.0 - p))) ** 2


def cost_transform(p_eps: float, q_eps: float) -> float:
    """First-order cost of reducing error probability ``p_eps`` to ``q_eps``."""
    if q_eps > p_eps:
        raise ValueError("q_eps must not exceed p_eps")
    if q_eps < 0:
        raise ValueError("q_eps must be non-negative")
    return 1.0 + 4.0 * (p_eps - q_eps)


def transform_one_norm(p: float, q: float, group_order: int, subgroup_order: int) -> float:
    """One-norm of the map turning ``J_{p,E}`` into the detectable channel ``V_q``.

    Above the threshold ``q = p_d`` only the undetectable part must be
    cancelled and the norm no longer depends on ``q``.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    if group_order % subgroup_order:
        raise ValueError("subgroup order must divide group order")
    e, qo = group_order, subgroup_order
    p_d = (e - qo) / e * p
    if q >= p_d:
        return 1.0 + 2.0 * (qo - 1) * p / (e * (1.0 - p))
    return 1.0 + 2.0 * (e - 1) * p / (e * (1.0 - p)) - 2.0 * q / (1.0 - p)


def cost_transform_exact(p: float, q: float, group_order: int, subgroup_order: int) -> float:
    return transform_one_norm(p, q, group_order, subgroup_order) ** 2


def circuit_cost(mu_eps: float, nu_eps: float = 0.0) -> float:
    """Whole-circuit cost ``exp(4 (mu_eps - nu_eps))`` in the many-weak-errors limit."""
    if nu_eps > mu_eps:
        raise ValueError("nu_eps must not exceed mu_eps")
    return math.exp(4.0 * (mu_eps - nu_eps))

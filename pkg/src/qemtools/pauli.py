"""Phase-free Pauli-string algebra.

Pauli strings are stored as a pair of bit masks ``(x, z)`` with bit ``q``
belonging to qubit ``q``.  The single-qubit letters map as

    I = (0, 0),  X = (1, 0),  Z = (0, 1),  Y = (1, 1)

Strings carry no phase.  Whenever a phase matters (products, projector
expansions) it is tracked separately on :class:`SignedPauliTerm`
coefficients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 32
_LETTERS = "IXZY"  # index = x | (z << 1)
_PRUNE = 1e-15


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    """An N-qubit Pauli label without phase.

    Construct from text with :meth:`from_label` (qubit 0 leftmost), or
    directly from the symplectic masks.
    """

    n_qubits: int
    x: int = 0
    z: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("bit masks exceed n_qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        if not isinstance(label, str):
            raise TypeError("Pauli label must be a string")
        if not label:
            raise ValueError("empty Pauli label")
        x = z = 0
        for q, ch in enumerate(label):
            if ch not in "IXYZ":
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}")
            code = _LETTERS.index(ch)
            x |= (code & 1) << q
            z |= (code >> 1) << q
        return cls(len(label), x, z)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        """Pauli ``letter`` on ``qubit``, identity elsewhere."""
        code = _LETTERS.index(letter.upper())
        return cls(n_qubits, (code & 1) << qubit, (code >> 1) << qubit)

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n_qubits))

    def letter(self, qubit: int) -> str:
        return _LETTERS[((self.x >> qubit) & 1) | (((self.z >> qubit) & 1) << 1)]

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n_qubits) if (mask >> q) & 1)

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        """Phase-free product."""
        _check_sizes(self, other)
        return PauliString(self.n_qubits, self.x ^ other.x, self.z ^ other.z)

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"

    def matrix(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix (qubit 0 is the most significant factor)."""
        out = np.ones((1, 1), dtype=complex)
        for q in range(self.n_qubits):
            out = np.kron(out, _SINGLE[self.letter(q)])
        return out

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        """The letters of this string on ``qubits``, as a ``len(qubits)``-qubit string."""
        return PauliString.from_label("".join(self.letter(q) for q in qubits))

    def embed(self, n_qubits: int, qubits: Sequence[int]) -> "PauliString":
        """Place this local string onto ``qubits`` of an ``n_qubits`` register."""
        if len(qubits) != self.n_qubits:
            raise ValueError("qubit list length does not match string length")
        x = z = 0
        for local, q in enumerate(qubits):
            x |= ((self.x >> local) & 1) << q
            z |= ((self.z >> local) & 1) << q
        return PauliString(n_qubits, x, z)


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# (a, b) -> (power of i, product letter) for single-qubit products a*b
_MUL_TABLE: dict[tuple[str, str], tuple[int, str]] = {}
for _a, _b in itertools.product("IXYZ", repeat=2):
    _prod = _SINGLE[_a] @ _SINGLE[_b]
    for _c in "IXYZ":
        _ratio = np.trace(_SINGLE[_c].conj().T @ _prod) / 2
        if abs(abs(_ratio) - 1) < 1e-12:
            _MUL_TABLE[(_a, _b)] = (int(round(np.angle(_ratio) / (np.pi / 2))) % 4, _c)
            break


def _check_sizes(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"size mismatch: {a.n_qubits} vs {b.n_qubits} qubits")


def parse_pauli(label: str | PauliString) -> PauliString:
    if isinstance(label, PauliString):
        return label
    return PauliString.from_label(label)


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Product ``a b`` as ``(phase, phase-free string)`` with phase in {1, -1, 1j, -1j}."""
    _check_sizes(a, b)
    power = 0
    for q in range(a.n_qubits):
        k, _ = _MUL_TABLE[(a.letter(q), b.letter(q))]
        power += k
    return (1, 1j, -1, -1j)[power % 4], a * b


def eta(g: PauliString, o: PauliString) -> int:
    """+1 if ``g`` and ``o`` commute, -1 if they anticommute."""
    _check_sizes(g, o)
    return -1 if _popcount((g.x & o.z) ^ (g.z & o.x)) & 1 else 1


def commutes(a: PauliString, b: PauliString) -> bool:
    return eta(a, b) == 1


def all_paulis(n_qubits: int) -> list[PauliString]:
    """All ``4^n`` strings, ordered by ``(x, z)`` masks."""
    return [PauliString(n_qubits, x, z) for x in range(1 << n_qubits) for z in range(1 << n_qubits)]


@dataclass(frozen=True)
class SignedPauliTerm:
    coefficient: float
    string: PauliString

    def __post_init__(self) -> None:
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")


def _vec(p: PauliString) -> int:
    return p.x | (p.z << p.n_qubits)


def _reduce_basis(strings: Iterable[PauliString]) -> list[PauliString]:
    """Keep strings that are independent of the ones kept before them."""
    pivots: dict[int, int] = {}  # leading bit -> reduced vector
    kept = []
    for s in strings:
        v = _vec(s)
        while v:
            top = v.bit_length() - 1
            if top not in pivots:
                pivots[top] = v
                kept.append(s)
                break
            v ^= pivots[top]
    return kept


@dataclass(frozen=True)
class PauliSubgroup:
    """Phase-free span of independent generators.

    ``elements[i]`` is the product of the generators selected by the bits
    of ``i``, so ``elements[0]`` is the identity.
    """

    n_qubits: int
    generators: tuple[PauliString, ...]
    elements: tuple[PauliString, ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, p: object) -> bool:
        return p in self._element_set

    @property
    def _element_set(self) -> frozenset:
        cached = self.__dict__.get("_set_cache")
        if cached is None:
            cached = frozenset(self.elements)
            object.__setattr__(self, "_set_cache", cached)
        return cached

    def is_subgroup_of(self, other: "PauliSubgroup") -> bool:
        return all(g in other for g in self.generators)

    def same_span(self, other: "PauliSubgroup") -> bool:
        return self._element_set == other._element_set


def span_group(generators: Sequence[PauliString], n_qubits: int | None = None) -> PauliSubgroup:
    """Phase-free group generated by ``generators``; dependent generators are dropped."""
    if not generators:
        if n_qubits is None:
            raise ValueError("n_qubits required for an empty generator list")
        return PauliSubgroup(n_qubits, (), (PauliString.identity(n_qubits),))
    n = generators[0].n_qubits
    if any(g.n_qubits != n for g in generators):
        raise ValueError("generators have different sizes")
    if n_qubits is not None and n_qubits != n:
        raise ValueError("n_qubits does not match generators")
    gens = tuple(_reduce_basis(g for g in generators if not g.is_identity))
    elements = [PauliString.identity(n)]
    for g in gens:
        elements = elements + [e * g for e in elements]
    return PauliSubgroup(n, gens, tuple(elements))


def full_pauli_group(n_qubits: int) -> PauliSubgroup:
    gens = [PauliString.single(n_qubits, q, letter) for q in range(n_qubits) for letter in "XZ"]
    return span_group(gens)


def _independent_rows(rows: list[int]) -> list[int]:
    """Indices of rows (GF(2) bit vectors) independent of earlier rows."""
    pivots: dict[int, int] = {}
    keep = []
    for i, v in enumerate(rows):
        while v:
            top = v.bit_length() - 1
            if top not in pivots:
                pivots[top] = v
                keep.append(i)
                break
            v ^= pivots[top]
    return keep


def canonicalize_generators(
    gens: Sequence[PauliString], symmetries: Sequence[PauliString]
) -> list[PauliString]:
    """Rewrite ``gens`` so each symmetry anticommutes with at most one generator.

    Symmetries whose commutation pattern with ``gens`` is a combination of
    earlier symmetries carry no new information and are skipped.  For each
    remaining symmetry the lowest-index anticommuting generator that is not
    already a pivot becomes its pivot and is multiplied into every other
    anticommuting generator.  The span is unchanged.
    """
    out = list(gens)
    if not out:
        return out
    rows = []
    for s in symmetries:
        bits = 0
        for j, g in enumerate(out):
            if eta(g, s) == -1:
                bits |= 1 << j
        rows.append(bits)
    active = [symmetries[i] for i in _independent_rows(rows)]

    pivots: set[int] = set()
    for s in active:
        anti = [j for j, g in enumerate(out) if eta(g, s) == -1]
        free = [j for j in anti if j not in pivots]
        if not free:
            continue
        piv = free[0]
        pivots.add(piv)
        for j in anti:
            if j != piv:
                out[j] = out[j] * out[piv]
    return out


def partition_detectable(
    group: PauliSubgroup, symmetries: Sequence[PauliString]
) -> tuple[PauliSubgroup, list[PauliString]]:
    """Split ``group`` into the undetectable subgroup and the detectable elements.

    An element is undetectable when it commutes with every symmetry.
    """
    for i, a in enumerate(symmetries):
        for b in symmetries[i + 1 :]:
            if eta(a, b) == -1:
                raise ValueError("symmetries must pairwise commute")
    gens = canonicalize_generators(list(group.generators), symmetries)
    undetectable_gens = [g for g in gens if all(eta(g, s) == 1 for s in symmetries)]
    undetectable = span_group(undetectable_gens, n_qubits=group.n_qubits)
    members = {e for e in group.elements if all(eta(e, s) == 1 for s in symmetries)}
    if members != set(undetectable.elements):
        raise AssertionError("commuting elements do not form the canonical subgroup")
    detectable = [e for e in group.elements if e not in members]
    return undetectable, detectable


def multiply_terms(
    a: Sequence[tuple[complex, PauliString]], b: Sequence[tuple[complex, PauliString]]
) -> dict[PauliString, complex]:
    """Product of two Pauli sums with phase tracking."""
    out: dict[PauliString, complex] = {}
    for ca, pa in a:
        for cb, pb in b:
            phase, p = multiply(pa, pb)
            out[p] = out.get(p, 0) + ca * cb * phase
    return out


def projector_expansion(
    symmetries: Sequence[PauliString], eigenvalues: Sequence[int], n_qubits: int | None = None
) -> list[SignedPauliTerm]:
    """Pauli expansion of ``prod_i (I + s_i S_i) / 2``."""
    if len(symmetries) != len(eigenvalues):
        raise ValueError("symmetries and eigenvalues differ in length")
    if any(s not in (1, -1) for s in eigenvalues):
        raise ValueError("eigenvalues must be +1 or -1")
    if not symmetries:
        if n_qubits is None:
            raise ValueError("n_qubits required when no symmetries are given")
        return [SignedPauliTerm(1.0, PauliString.identity(n_qubits))]
    n = symmetries[0].n_qubits
    if len(_reduce_basis(symmetries)) != len(symmetries):
        raise ValueError("symmetries must be independent")
    acc: dict[PauliString, complex] = {PauliString.identity(n): 1.0}
    for s, ev in zip(symmetries, eigenvalues):
        factor = [(0.5, PauliString.identity(n)), (0.5 * ev, s)]
        acc = multiply_terms([(c, p) for p, c in acc.items()], factor)
    return _real_terms(acc)


def _real_terms(acc: dict[PauliString, complex], atol: float = 1e-12) -> list[SignedPauliTerm]:
    terms = []
    for p, c in sorted(acc.items(), key=lambda kv: (kv[0].x, kv[0].z)):
        c = complex(c)
        if abs(c.imag) > atol:
            raise ValueError(f"non-real coefficient {c} on {p.label}")
        if abs(c.real) > _PRUNE:
            terms.append(SignedPauliTerm(c.real, p))
    return terms


def observable_projector_product(
    o: PauliString, projector: Sequence[SignedPauliTerm]
) -> tuple[list[SignedPauliTerm], float]:
    """Real Pauli expansion of ``O Pi`` and its 1-norm.

    Raises ``ValueError`` if an imaginary part survives, which happens when
    ``O`` does not commute with the symmetries behind ``Pi``.
    """
    acc = multiply_terms([(1.0, o)], [(t.coefficient, t.string) for t in projector])
    terms = _real_terms(acc)
    return terms, float(sum(abs(t.coefficient) for t in terms))


def terms_matrix(terms: Iterable[SignedPauliTerm]) -> np.ndarray:
    terms = list(terms)
    dim = 1 << terms[0].string.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for t in terms:
        out += t.coefficient * t.string.matrix()
    return out

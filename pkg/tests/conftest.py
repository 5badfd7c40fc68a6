import itertools

import pytest

from qemtools.pauli import PauliString, span_group


def all_subgroups(n_qubits):
    """Every subgroup of the phase-free ``n_qubits`` Pauli group."""
    dim = 2 * n_qubits
    seen = {frozenset([0])}
    frontier = [frozenset([0])]
    while frontier:
        nxt = []
        for s in frontier:
            for v in range(1, 1 << dim):
                if v in s:
                    continue
                t = s | {a ^ v for a in s}
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    mask = (1 << n_qubits) - 1
    out = []
    for s in sorted(seen, key=lambda s: (len(s), sorted(s))):
        strings = [PauliString(n_qubits, v & mask, v >> n_qubits) for v in sorted(s)]
        out.append(span_group(strings, n_qubits=n_qubits))
    return out


@pytest.fixture(scope="session")
def subgroups():
    return {n: all_subgroups(n) for n in (1, 2, 3)}


def subgroup_pairs(groups):
    """Pairs ``(e, b)`` with ``e`` a subgroup of ``b``."""
    return [(e, b) for e, b in itertools.product(groups, groups) if e.is_subgroup_of(b)]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[key])

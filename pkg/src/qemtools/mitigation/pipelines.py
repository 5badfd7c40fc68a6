"""Combined mitigation pipelines on the exact and Monte Carlo backends.

* Q:  cancel every site's noise with its exact inverse.
* QE: cancel part of the noise so the circuit runs at ``mu / lam``, then
  extrapolate exponentially from the native and reduced points.
* QH: turn every site's group noise into its detectable remainder, split
  the result by the symmetry outcome and extrapolate hyperbolically.

The exact backend applies the signed maps analytically; the Monte Carlo
backend samples them as signed Pauli insertions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ..channels import (
    GroupChannel,
    PauliChannel,
    compose,
    invert_channel,
    transform_map,
)
from ..pauli import PauliString, PauliSubgroup, commutes, partition_detectable
from ..quasiprob import circuit_cost, decompose
from ..simulator import (
    DensityMatrix,
    MitigationPlan,
    NoisyCircuit,
    SiteNoise,
    pauli_expectation,
    run_exact,
    run_trajectories,
    symmetry_partition,
)
from .costs import CostReport, cost_qe, cost_qh
from .extrapolation import NonHyperbolicDecay, hyperbolic_extrapolate, two_point_exp

Backend = Literal["exact", "mc"]


@dataclass(frozen=True)
class PipelineResult:
    observable: PauliString
    estimate: float
    report: CostReport
    flagged: str = ""


# -- per-site maps -----------------------------------------------------------

def _mu_eps(circuit: NoisyCircuit) -> float:
    return float(sum(s.channel().non_identity_probability for s in circuit.noise if s is not None))


def _site_maps(circuit: NoisyCircuit, target) -> list[PauliChannel | None]:
    """Signed map ``target(site) o site^-1`` for every noisy site."""
    maps = []
    for gate, site in zip(circuit.gates, circuit.noise):
        if site is None or site.rate == 0.0:
            maps.append(None)
            continue
        ch = site.channel()
        maps.append(compose(target(gate, site), invert_channel(ch)))
    return maps


def _apply_maps(circuit: NoisyCircuit, maps: Sequence[PauliChannel | None]) -> NoisyCircuit:
    noise = []
    for site, m in zip(circuit.noise, maps):
        noise.append(site if m is None else SiteNoise.from_channel(compose(m, site.channel())))
    return circuit.with_noise(noise)


def reduction_maps(circuit: NoisyCircuit, lam: float) -> list[PauliChannel | None]:
    """Maps that scale every site's firing rate by ``1 / lam``."""
    if lam <= 1:
        raise ValueError("lambda must exceed 1")
    return _site_maps(circuit, lambda g, s: SiteNoise(s.rate / lam, s.firing).channel())


def inverse_maps(circuit: NoisyCircuit) -> list[PauliChannel | None]:
    return _site_maps(circuit, lambda g, s: PauliChannel.identity(s.n_qubits))


def _local_q(site: SiteNoise, gate_qubits: Sequence[int], symmetry: PauliString) -> tuple[PauliSubgroup, float]:
    if site.group is None:
        raise ValueError("hyperbolic pipeline requires group-error sites")
    local_sym = symmetry.restrict(gate_qubits)
    q_group, _ = partition_detectable(site.group, [local_sym] if not local_sym.is_identity else [])
    p_d = (site.group.order - q_group.order) / site.group.order * site.rate
    return q_group, p_d


def detectable_maps(circuit: NoisyCircuit, symmetry: PauliString) -> tuple[list[PauliChannel | None], float]:
    """Maps leaving only each site's detectable part, and the total ``mu_d``."""
    maps: list[PauliChannel | None] = []
    mu_d = 0.0
    for gate, site in zip(circuit.gates, circuit.noise):
        if site is None or site.rate == 0.0:
            maps.append(None)
            continue
        q_group, p_d = _local_q(site, gate.qubits, symmetry)
        mu_d += p_d
        maps.append(transform_map(GroupChannel(site.rate, site.group), p_d, q_group))
    return maps, mu_d


def initial_symmetry_value(circuit: NoisyCircuit, symmetry: PauliString) -> int:
    rho = DensityMatrix.from_bits(circuit.initial_bits)
    v = pauli_expectation(rho, symmetry)
    if abs(abs(v) - 1.0) > 1e-12:
        raise ValueError("initial state is not a symmetry eigenstate")
    return 1 if v > 0 else -1


def _gamma_from_pair(o_low: float, o_high: float, dmu: float) -> float:
    if o_low == 0 or o_high / o_low <= 0 or dmu <= 0:
        return 1.0
    return float(np.clip(math.log(o_low / o_high) / dmu, 0.0, 1.0))


def _gamma_from_partition(o_pass: float, o_fail: float, mu_d: float) -> float:
    if o_pass == 0:
        return 1.0
    x = (o_fail / o_pass) * math.tanh(mu_d)
    if abs(x) >= 1:
        return 0.0
    return float(np.clip(1.0 - math.atanh(x) / mu_d, 0.0, 1.0))


# -- pipelines ---------------------------------------------------------------

def q_pipeline(circuit: NoisyCircuit, observables: Sequence[PauliString]) -> list[PipelineResult]:
    """Full cancellation on the exact backend."""
    mu_eps = _mu_eps(circuit)
    state = run_exact(_apply_maps(circuit, inverse_maps(circuit)))
    rep = CostReport("Q", circuit_cost(mu_eps), {"mu_eps": mu_eps}, first_order=True)
    return [PipelineResult(o, pauli_expectation(state, o), rep) for o in observables]


def qe_pipeline(
    circuit: NoisyCircuit,
    observables: Sequence[PauliString],
    lam: float = 2.0,
    backend: Backend = "exact",
    n_traj: int = 0,
    rng: np.random.Generator | None = None,
) -> list[PipelineResult]:
    """Quasi-probability noise reduction to ``mu / lam`` plus two-point extrapolation."""
    mu = circuit.mean_error_count
    mu_eps = _mu_eps(circuit)
    maps = reduction_maps(circuit, lam)
    if backend == "exact":
        native = run_exact(circuit)
        reduced = run_exact(_apply_maps(circuit, maps))
        pairs = [(pauli_expectation(reduced, o), pauli_expectation(native, o)) for o in observables]
    elif backend == "mc":
        rng = rng or np.random.default_rng()
        quasi = tuple(None if m is None else decompose(m) for m in maps)
        pairs = []
        for o in observables:
            lo = run_trajectories(circuit, MitigationPlan(o, quasi=quasi), n_traj, rng).estimate()[0]
            hi = run_trajectories(circuit, MitigationPlan(o), n_traj, rng).estimate()[0]
            pairs.append((lo, hi))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    out = []
    for o, (lo, hi) in zip(observables, pairs):
        gamma = _gamma_from_pair(lo, hi, mu - mu / lam)
        rep = CostReport(
            "QE", cost_qe(gamma, mu, lam, mu_eps),
            {"mu": mu, "mu_eps": mu_eps, "gamma": gamma, "lambda": lam, "nu": mu / lam},
        )
        if mu == 0:
            out.append(PipelineResult(o, hi, rep))
            continue
        try:
            est = two_point_exp(lo, hi, lam)
            out.append(PipelineResult(o, est, rep))
        except ValueError as exc:
            out.append(PipelineResult(o, float("nan"), rep, flagged=type(exc).__name__))
    return out


def qh_pipeline(
    circuit: NoisyCircuit,
    observables: Sequence[PauliString],
    symmetry: PauliString,
    backend: Backend = "exact",
    n_traj: int = 0,
    rng: np.random.Generator | None = None,
) -> list[PipelineResult]:
    """Reduce noise to its detectable part, partition by the symmetry, extrapolate hyperbolically.

    ``mu_d`` is the sum of per-site detectable probabilities, i.e. the
    many-weak-errors value; finite-size corrections are not applied.
    """
    for o in observables:
        if not commutes(o, symmetry):
            raise ValueError(f"observable {o} anticommutes with the symmetry")
    mu_eps = _mu_eps(circuit)
    maps, mu_d = detectable_maps(circuit, symmetry)
    s = initial_symmetry_value(circuit, symmetry)
    if backend == "exact":
        state = run_exact(_apply_maps(circuit, maps))
        parts = [symmetry_partition(state, symmetry, s, o)[:2] for o in observables]
    elif backend == "mc":
        rng = rng or np.random.default_rng()
        quasi = tuple(None if m is None else decompose(m) for m in maps)
        parts = []
        for o in observables:
            t = run_trajectories(circuit, MitigationPlan(o, quasi=quasi, symmetry=symmetry, symmetry_value=s), n_traj, rng)
            w = t.signs.astype(float)
            num_p, den_p = np.sum(w * t.values * t.passed), np.sum(w * t.passed)
            num_f, den_f = np.sum(w * t.values * ~t.passed), np.sum(w * ~t.passed)
            parts.append((num_p / den_p, num_f / den_f if den_f != 0 else 0.0))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    out = []
    for o, (o_pass, o_fail) in zip(observables, parts):
        if mu_d == 0:
            rep = CostReport("QH", cost_qh(1.0, mu_eps, 0.0), {"mu_eps": mu_eps, "mu_d": 0.0, "gamma": 1.0})
            out.append(PipelineResult(o, o_pass, rep))
            continue
        gamma = _gamma_from_partition(o_pass, o_fail, mu_d)
        rep = CostReport("QH", cost_qh(gamma, mu_eps, mu_d), {"mu_eps": mu_eps, "mu_d": mu_d, "gamma": gamma})
        try:
            out.append(PipelineResult(o, hyperbolic_extrapolate(o_pass, o_fail, mu_d), rep))
        except NonHyperbolicDecay:
            out.append(PipelineResult(o, float("nan"), rep, flagged="NonHyperbolicDecay"))
    return out

"""Closed-form sampling-cost factors and break-even analysis.

Arguments follow one naming scheme throughout: ``mu`` is the mean circuit
error count, ``mu_eps`` its non-identity part, ``mu_d`` its detectable
part, ``gamma`` the decay rate and ``lam`` the noise boost factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from ..quasiprob import circuit_cost


@dataclass(frozen=True)
class CostReport:
    method: str
    cost_factor: float
    inputs: Mapping[str, float] = field(default_factory=dict)
    first_order: bool = False

    def __post_init__(self) -> None:
        if not self.cost_factor >= 1.0 - 1e-12:
            raise ValueError(f"cost factor {self.cost_factor} is below 1")


def cost_symmetry(mu_d: float) -> float:
    """Direct symmetry-verification cost ``2 / (1 + exp(-2 mu_d))``."""
    _nonneg(mu_d, "mu_d")
    return 2.0 / (1.0 + math.exp(-2.0 * mu_d))


def detection_prob(mu_d: float) -> float:
    """Probability that a run is flagged, ``(1 - exp(-2 mu_d)) / 2``."""
    _nonneg(mu_d, "mu_d")
    return 0.5 * (1.0 - math.exp(-2.0 * mu_d))


def residual_error(mu_d: float) -> float:
    """Fraction of runs that still carry an error, ``(1 - exp(-mu_d))**2 / 2``."""
    _nonneg(mu_d, "mu_d")
    return 0.5 * (1.0 - math.exp(-mu_d)) ** 2


def pass_prob(mu_d: float) -> float:
    """Poisson-limit symmetry pass probability ``exp(-mu_d) cosh(mu_d)``."""
    return 1.0 - detection_prob(mu_d)


def cost_exp_extrapolation(gamma: float, mu: float, lam: float) -> float:
    """Two-point exponential extrapolation with an even sample split."""
    _check_lambda(lam)
    return 2.0 * (lam**2 * math.exp(2 * gamma * mu) + math.exp(2 * lam * gamma * mu)) / (lam - 1.0) ** 2


def cost_qe(gamma: float, mu: float, lam: float, mu_eps: float) -> float:
    """Quasi-probability to reach ``mu / lam`` followed by two-point extrapolation."""
    _check_lambda(lam)
    low = math.exp((2.0 / lam) * (gamma * mu + 2.0 * (lam - 1.0) * mu_eps))
    return 2.0 * (lam**2 * low + math.exp(2 * gamma * mu)) / (lam - 1.0) ** 2


def cost_hyperbolic(gamma: float, mu_d: float) -> float:
    """Upper bound ``cosh(2 (1 - gamma) mu_d) cosh(mu_d) exp(mu_d)``."""
    _nonneg(mu_d, "mu_d")
    return math.cosh(2 * (1 - gamma) * mu_d) * math.cosh(mu_d) * math.exp(mu_d)


def cost_qh(gamma: float, mu_eps: float, mu_d: float) -> float:
    """Quasi-probability down to the detectable remainder, then hyperbolic extrapolation."""
    _nonneg(mu_d, "mu_d")
    return math.exp(4 * mu_eps) * math.cosh(mu_d) * math.cosh(2 * (1 - gamma) * mu_d) / math.exp(3 * mu_d)


def cost_qs(mu_eps: float, nu: float) -> tuple[float, float, float]:
    """Quasi-probability down to a detectable remainder ``nu``, then post-selection.

    Returns ``(cost, saving over pure quasi-probability, residual error fraction)``.
    """
    _nonneg(nu, "nu")
    saving = math.exp(3 * nu) * math.cosh(nu)
    return math.exp(4 * mu_eps) / saving, saving, residual_error(nu)


def nu_for_residual(p_circ: float) -> float:
    """Invert ``residual_error``: the ``nu`` leaving a fraction ``p_circ`` of bad runs."""
    if not 0.0 <= p_circ < 0.5:
        raise ValueError("p_circ must lie in [0, 0.5)")
    return -math.log(1.0 - math.sqrt(2.0 * p_circ))


def cost_postproc(p_pass: float) -> float:
    """Symmetry verification by post-processing: ``1 / p_pass**2``."""
    if p_pass <= 0 or p_pass > 1:
        raise ValueError("p_pass must lie in (0, 1]")
    return 1.0 / p_pass**2


def optimal_split(a: float, b: float) -> tuple[float, float, float]:
    """Best sample fraction for estimator ``a X - b Y``: ``(alpha, cost, even-split cost)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    return a / (a + b), (a + b) ** 2, 2.0 * (a * a + b * b)


def break_even(c1: float, c2: float, eps1: float, eps2: float) -> tuple[float, float]:
    """Sample count where two estimators have equal mean square error.

    Method 1 has cost ``c1`` and bias ``eps1``; method 2 has the lower cost
    ``c2`` but larger bias ``eps2``.  Returns the exact ratio and its
    leading-order form ``c1 / eps2**2``.
    """
    if c1 == c2:
        return 0.0, 0.0
    if not eps2 > eps1 >= 0:
        raise ValueError("need eps2 > eps1 >= 0")
    if c1 < c2:
        raise ValueError("need c1 > c2")
    return (c1 - c2) / (eps2**2 - eps1**2), c1 / eps2**2


# -- helpers for the cost-comparison sweep -----------------------------------

FH_MU_EPS = 15.0 / 16.0
FH_MU_D = 0.5


def fh_costs(gamma: float, mu: float, lam: float = 2.0) -> dict[str, float]:
    """Costs for two-qubit depolarizing noise with parity checks (``mu_eps = 15 mu / 16``, ``mu_d = mu / 2``)."""
    mu_eps, mu_d = FH_MU_EPS * mu, FH_MU_D * mu
    return {
        "C_Q0": circuit_cost(mu_eps, 0.0),
        "C_QE": cost_qe(gamma, mu, lam, mu_eps),
        "C_QH": cost_qh(gamma, mu_eps, mu_d),
    }


def find_crossings(
    f: Callable[[float], float], lo: float, hi: float, n_grid: int = 400
) -> list[float]:
    """Roots of ``f`` on ``[lo, hi]`` bracketed on a uniform grid and refined by Brent's method."""
    xs = np.linspace(lo, hi, n_grid + 1)
    vals = [f(x) for x in xs]
    roots = []
    for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if v0 == 0.0:
            roots.append(float(x0))
        elif v0 * v1 < 0:
            roots.append(float(brentq(f, x0, x1, xtol=1e-12)))
    return roots


def cost_crossings(gamma: float, lo: float = 0.01, hi: float = 6.0, lam: float = 2.0) -> dict[str, list[float]]:
    """Where the ``mu`` curves of C_QE, C_Q0 and C_QH cross, for one ``gamma``."""
    def diff(a: str, b: str) -> Callable[[float], float]:
        return lambda m: math.log(fh_costs(gamma, m, lam)[a]) - math.log(fh_costs(gamma, m, lam)[b])

    return {
        "QE-Q0": find_crossings(diff("C_QE", "C_Q0"), lo, hi),
        "QE-QH": find_crossings(diff("C_QE", "C_QH"), lo, hi),
        "QH-Q0": find_crossings(diff("C_QH", "C_Q0"), lo, hi),
    }


def _nonneg(v: float, name: str) -> None:
    if v < 0:
        raise ValueError(f"{name} must be non-negative")


def _check_lambda(lam: float) -> None:
    if lam <= 1:
        raise ValueError("lambda must exceed 1")

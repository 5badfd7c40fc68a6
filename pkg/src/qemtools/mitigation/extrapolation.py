"""Exponential and hyperbolic extrapolation to zero noise."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.optimize import least_squares

PRUNE_AMPLITUDE = 1e-12
DEFAULT_TOL = 1e-4
GRID_STEPS = 51


class NonExponentialData(ValueError):
    """Inputs cannot come from a single exponential decay."""


class NonHyperbolicDecay(ValueError):
    """Passing/failing expectations are inconsistent with single-exponential decay."""


class FitDivergence(RuntimeError):
    """The nonlinear least-squares fit failed to converge."""


Basis = Literal["exp", "power"]


def _basis_fn(kind: Basis) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if kind == "exp":
        return lambda x, g: np.exp(-np.outer(x, g))
    if kind == "power":
        return lambda x, g: np.power.outer(1.0 - np.asarray(g), x).T
    raise ValueError(f"unknown basis {kind!r}")


def _basis_jac(kind: Basis) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if kind == "exp":
        return lambda x, g: -x[:, None] * np.exp(-np.outer(x, g))
    return lambda x, g: -x[:, None] * np.power.outer(1.0 - np.asarray(g), np.maximum(x - 1, 0)).T


@dataclass(frozen=True)
class ExpDecayModel:
    """``y(x) = sum_k A_k exp(-gamma_k x)`` (or ``(1 - gamma_k)**x`` for ``power``)."""

    amplitudes: tuple[float, ...]
    gammas: tuple[float, ...]
    residual: float
    normalized_residual: float
    basis: Basis = "exp"
    warning: bool = False

    @property
    def k(self) -> int:
        return len(self.gammas)

    @property
    def components(self) -> list[tuple[float, float]]:
        return list(zip(self.amplitudes, self.gammas))

    @property
    def zero_noise(self) -> float:
        return float(sum(self.amplitudes))

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.gammas:
            return np.zeros_like(x)
        return _basis_fn(self.basis)(x, np.array(self.gammas)) @ np.array(self.amplitudes)


def two_point_exp(o_mu: float, o_lmu: float, lam: float) -> float:
    """Zero-noise estimate ``(o_mu**lam / o_lmu) ** (1 / (lam - 1))``.

    The data may be jointly negative; the sign is then carried through.
    """
    if lam <= 1:
        raise ValueError("lambda must exceed 1")
    if o_mu == 0 or o_lmu == 0 or (o_mu > 0) != (o_lmu > 0):
        raise NonExponentialData("two-point extrapolation needs nonzero same-sign data")
    sign = 1.0 if o_mu > 0 else -1.0
    a, b = abs(o_mu), abs(o_lmu)
    return sign * math.exp((lam * math.log(a) - math.log(b)) / (lam - 1.0))


def _prepare(points: Sequence[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (x, y) pairs")
    x, y = arr[:, 0], arr[:, 1]
    if len(np.unique(x)) != len(x):
        raise ValueError("x values must be distinct")
    order = np.argsort(x)
    return x[order], y[order]


def _project(x: np.ndarray, y: np.ndarray, g: np.ndarray, kind: Basis) -> tuple[np.ndarray, np.ndarray]:
    """Optimal amplitudes for fixed rates and the resulting residual vector."""
    m = _basis_fn(kind)(x, g)
    a, *_ = np.linalg.lstsq(m, y, rcond=None)
    return a, m @ a - y


def _grid_start(x, y, k: int, kind: Basis) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, GRID_STEPS)
    best, best_g = math.inf, None
    for combo in itertools.combinations(grid, k):
        g = np.array(combo)
        _, r = _project(x, y, g, kind)
        cost = float(r @ r)
        if cost < best - 1e-30:
            best, best_g = cost, g
    return best_g


def fit_multi_exp(
    points: Sequence[tuple[float, float]], k: int, basis: Basis = "exp"
) -> ExpDecayModel:
    """Least-squares fit of ``k`` decaying components with rates in ``[0, 1]``.

    Rates are first located by a grid search on the variable-projection
    objective (amplitudes solved linearly for each rate vector), then
    refined jointly with a bounded trust-region solver.
    """
    x, y = _prepare(points)
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(x) < 2 * k:
        raise ValueError(f"need at least {2 * k} points for {k} components")
    if not np.all(np.isfinite(y)):
        raise ValueError("y values must be finite")
    f, jac = _basis_fn(basis), _basis_jac(basis)

    g0 = _grid_start(x, y, k, basis)
    a0, _ = _project(x, y, g0, basis)
    theta0 = np.concatenate([a0, g0])

    def resid(theta):
        return f(x, theta[k:]) @ theta[:k] - y

    def jacobian(theta):
        return np.hstack([f(x, theta[k:]), jac(x, theta[k:]) * theta[:k]])

    lower = np.concatenate([np.full(k, -np.inf), np.zeros(k)])
    upper = np.concatenate([np.full(k, np.inf), np.ones(k)])
    sol = least_squares(
        resid, theta0, jac=jacobian, bounds=(lower, upper), method="trf",
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
    )
    if not np.all(np.isfinite(sol.x)):
        raise FitDivergence("fit produced non-finite parameters")
    theta = sol.x if sol.cost <= 0.5 * float(resid(theta0) @ resid(theta0)) else theta0
    amps, gams = theta[:k], theta[k:]
    keep = np.abs(amps) >= PRUNE_AMPLITUDE
    if not keep.any():
        keep[np.argmax(np.abs(amps))] = True
    amps, gams = amps[keep], gams[keep]
    order = np.argsort(gams)
    r = resid(theta)
    rms = float(np.sqrt(np.mean(r**2)))
    scale = float(np.max(np.abs(y)))
    return ExpDecayModel(
        amplitudes=tuple(float(v) for v in amps[order]),
        gammas=tuple(float(v) for v in gams[order]),
        residual=rms,
        normalized_residual=rms / scale if scale > 0 else rms,
        basis=basis,
    )


def select_model(
    points: Sequence[tuple[float, float]],
    k_max: int = 2,
    tol: float = DEFAULT_TOL,
    basis: Basis = "exp",
) -> ExpDecayModel:
    """Smallest ``K <= k_max`` whose normalized residual is below ``tol``.

    If none qualifies the best-residual model up to ``k_max`` is returned
    with ``warning=True``.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    fits = []
    for k in range(1, k_max + 1):
        if len(points) < 2 * k:
            break
        model = fit_multi_exp(points, k, basis)
        if model.normalized_residual < tol:
            return model
        fits.append(model)
    if not fits:
        raise ValueError("not enough points for a single component")
    best = min(fits, key=lambda m: m.normalized_residual)
    warnings.warn(
        f"no model with K <= {k_max} reaches normalized residual {tol:g}", RuntimeWarning, stacklevel=2
    )
    return ExpDecayModel(best.amplitudes, best.gammas, best.residual, best.normalized_residual, best.basis, True)


# -- hyperbolic extrapolation -------------------------------------------------

def partition_forward(o: float, gamma: float, mu_d: float) -> tuple[float, float]:
    """Passing and failing expectations under single-exponential decay."""
    if mu_d <= 0:
        raise ValueError("mu_d must be positive")
    o_pass = o * math.cosh((1.0 - gamma) * mu_d) / math.cosh(mu_d)
    o_fail = o * math.sinh((1.0 - gamma) * mu_d) / math.sinh(mu_d)
    return o_pass, o_fail


def hyperbolic_extrapolate(o_pass: float, o_fail: float, mu_d: float) -> float:
    """``sgn(o_pass) sqrt(o_pass^2 cosh^2 mu_d - o_fail^2 sinh^2 mu_d)``."""
    if mu_d <= 0:
        raise ValueError("mu_d must be positive")
    rad = (o_pass * math.cosh(mu_d)) ** 2 - (o_fail * math.sinh(mu_d)) ** 2
    if rad < 0:
        raise NonHyperbolicDecay(f"negative radicand {rad:.3g}")
    return math.copysign(math.sqrt(rad), o_pass)


def recombine_identity_check(o_pass: float, o_fail: float, mu_d: float) -> float:
    """``exp(-mu_d) (cosh(mu_d) o_pass + sinh(mu_d) o_fail)``."""
    if mu_d < 0:
        raise ValueError("mu_d must be non-negative")
    return math.exp(-mu_d) * (math.cosh(mu_d) * o_pass + math.sinh(mu_d) * o_fail)

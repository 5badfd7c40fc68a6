"""Experiment drivers behind the CLI subcommands.

Each driver returns plain rows (lists of dicts) so the CLI can write them
and tests can inspect them without touching the file system.  Independent
jobs run on a thread pool; results are assembled in a fixed order, so the
output does not depend on the thread count.
"""

from __future__ import annotations

import math
import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from .circuits import (
    FhCircuitSpec,
    attach_noise,
    build_circuit,
    observable_strings,
    parity_symmetry,
)
from .config import ExperimentConfig
from .mitigation.costs import cost_crossings, fh_costs, pass_prob
from .mitigation.extrapolation import fit_multi_exp, select_model
from .mitigation.pipelines import (
    initial_symmetry_value,
    inverse_maps,
    q_pipeline,
    qe_pipeline,
    qh_pipeline,
)
from .pauli import PauliString, parse_pauli
from .quasiprob import decompose
from .simulator import (
    MitigationPlan,
    NoisyCircuit,
    pauli_expectation,
    run_exact,
    run_trajectories,
    symmetry_partition,
)

T = TypeVar("T")
R = TypeVar("R")

MC_CHUNK = 20000


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fh_spec(cfg: ExperimentConfig) -> FhCircuitSpec:
    c = cfg["circuit"]
    return FhCircuitSpec(lx=c["lx"], ly=c["ly"], layers=c["layers"], seed=cfg.seed)


def fh_observables(cfg: ExperimentConfig, circuit: NoisyCircuit) -> list[PauliString]:
    c = cfg["circuit"]
    return observable_strings(c["lx"], c["ly"], circuit.mode_permutation)


def _model(cfg: ExperimentConfig, name: str):
    custom = cfg.custom_channels()
    return custom.get(name, name)


# -- decay scan ---------------------------------------------------------------

DECAY_COLUMNS = ["noise_model", "observable", "mu", "expectation", "noiseless"]


def decay_scan(cfg: ExperimentConfig, threads: int = 1, models: Iterable[str] | None = None) -> dict[str, list[dict]]:
    circuit = build_circuit(fh_spec(cfg))
    obs = fh_observables(cfg, circuit)
    truth = run_exact(circuit, 0.0)
    noiseless = {o: pauli_expectation(truth, o) for o in obs}
    models = list(models) if models is not None else list(cfg["noise"]["models"])
    jobs = [(m, float(mu)) for m in models for mu in cfg["probes"]["mu"]]

    def job(item):
        model, mu = item
        st = run_exact(attach_noise(circuit, _model(cfg, model), mu))
        return [
            {"noise_model": model, "observable": o.label, "mu": mu,
             "expectation": pauli_expectation(st, o), "noiseless": noiseless[o]}
            for o in obs
        ]

    results = parallel_map(job, jobs, threads)
    out: dict[str, list[dict]] = {m: [] for m in models}
    for (model, _), rows in zip(jobs, results):
        out[model].extend(rows)
    for m in out:
        out[m].sort(key=lambda r: (r["observable"], r["mu"]))
    return out


# -- fitting ------------------------------------------------------------------

def fit_columns(k_max: int) -> list[str]:
    cols = ["noise_model", "observable", "k_selected"]
    for k in range(1, k_max + 1):
        cols += [f"A{k}", f"gamma{k}"]
    return cols + ["residual", "estimate", "truth", "eps1", "eps2", "ratio", "warning", "outlier"]


SUMMARY_COLUMNS = ["noise_model", "n_observables", "n_outliers", "mean_eps1", "mean_eps2", "ratio", "frac_eps2_le_eps1"]


def _group_points(rows: Sequence[dict]) -> dict[tuple[str, str], tuple[list[tuple[float, float]], float | None]]:
    grouped: dict[tuple[str, str], list] = {}
    truth: dict[tuple[str, str], float | None] = {}
    for r in rows:
        key = (str(r["noise_model"]), str(r["observable"]))
        grouped.setdefault(key, []).append((float(r["mu"]), float(r["expectation"])))
        t = r.get("noiseless", "")
        truth[key] = float(t) if t not in ("", None) else None
    return {k: (sorted(v), truth[k]) for k, v in grouped.items()}


def fit_decays(rows: Sequence[dict], k_max: int = 2, tol: float = 1e-4, outlier_factor: float = 10.0) -> tuple[list[dict], list[dict]]:
    """Fit single- and multi-exponential models to every observable's decay."""
    out = []
    for (model, label), (pts, truth) in sorted(_group_points(rows).items()):
        single = fit_multi_exp(pts, 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            best = select_model(pts, k_max, tol)
        row: dict[str, Any] = {
            "noise_model": model, "observable": label, "k_selected": best.k,
            "residual": best.normalized_residual, "estimate": best.zero_noise,
            "warning": best.warning, "outlier": False,
        }
        for k in range(k_max):
            a, g = (best.amplitudes[k], best.gammas[k]) if k < best.k else (float("nan"), float("nan"))
            row[f"A{k + 1}"], row[f"gamma{k + 1}"] = a, g
        if truth is not None:
            e1, e2 = abs(single.zero_noise - truth), abs(best.zero_noise - truth)
            row.update(truth=truth, eps1=e1, eps2=e2, ratio=e1 / e2 if e2 > 0 else float("inf"))
        else:
            row.update(truth=float("nan"), eps1=float("nan"), eps2=float("nan"), ratio=float("nan"))
        out.append(row)
    return out, summarize_fits(out, outlier_factor)


def summarize_fits(rows: list[dict], outlier_factor: float = 10.0) -> list[dict]:
    """Flag outliers in place and return one summary row per noise model."""
    summary = []
    for model in sorted({r["noise_model"] for r in rows}):
        sub = [r for r in rows if r["noise_model"] == model and not math.isnan(float(r["eps2"]))]
        if not sub:
            continue
        med = statistics.median(float(r["eps2"]) for r in sub)
        for r in sub:
            r["outlier"] = bool(med > 0 and float(r["eps2"]) > outlier_factor * med)
        kept = [r for r in sub if not r["outlier"]]
        m1 = float(np.mean([float(r["eps1"]) for r in kept]))
        m2 = float(np.mean([float(r["eps2"]) for r in kept]))
        summary.append({
            "noise_model": model,
            "n_observables": len(sub),
            "n_outliers": len(sub) - len(kept),
            "mean_eps1": m1,
            "mean_eps2": m2,
            "ratio": m1 / m2 if m2 > 0 else float("inf"),
            "frac_eps2_le_eps1": float(np.mean([float(r["eps2"]) <= float(r["eps1"]) for r in sub])),
        })
    return summary


# -- mitigation ---------------------------------------------------------------

MITIGATE_COLUMNS = ["noise_model", "observable", "method", "mu", "estimate", "truth", "bias", "cost_factor", "decay_class", "flagged"]
MITIGATE_SUMMARY_COLUMNS = ["method", "mu", "decay_class", "n", "n_flagged", "mean_bias"]


def decay_classes(cfg: ExperimentConfig, rows: Sequence[dict]) -> dict[str, str]:
    f = cfg["fit"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return {
            label: f"{select_model(pts, f['k_max'], f['tol']).k}-exp"
            for (_, label), (pts, _) in _group_points(rows).items()
        }


def mitigate(cfg: ExperimentConfig, threads: int = 1, methods: Sequence[str] | None = None) -> tuple[list[dict], list[dict]]:
    m = cfg["methods"]
    methods = list(methods) if methods is not None else list(m["names"])
    model = m["model"]
    circuit = build_circuit(fh_spec(cfg))
    obs = fh_observables(cfg, circuit)
    sym = parity_symmetry(circuit.n_qubits)
    truth = run_exact(circuit, 0.0)
    truth_vals = {o: pauli_expectation(truth, o) for o in obs}
    classes = decay_classes(cfg, decay_scan(cfg, threads, [model])[model])
    jobs = [(meth, float(mu)) for mu in m["mu"] for meth in methods]

    def job(item):
        meth, mu = item
        nc = attach_noise(circuit, _model(cfg, model), mu)
        if meth == "Q":
            return q_pipeline(nc, obs)
        if meth == "QE":
            return qe_pipeline(nc, obs, lam=m["lam"])
        return qh_pipeline(nc, obs, sym)

    rows = []
    for (meth, mu), results in zip(jobs, parallel_map(job, jobs, threads)):
        for r in results:
            t = truth_vals[r.observable]
            rows.append({
                "noise_model": model, "observable": r.observable.label, "method": meth, "mu": mu,
                "estimate": r.estimate, "truth": t, "bias": abs(r.estimate - t) if not r.flagged else float("nan"),
                "cost_factor": r.report.cost_factor, "decay_class": classes[r.observable.label],
                "flagged": r.flagged,
            })
    rows.sort(key=lambda r: (r["method"], r["mu"], r["observable"]))
    return rows, summarize_mitigation(rows)


def summarize_mitigation(rows: Sequence[dict]) -> list[dict]:
    """Mean absolute bias per (method, mu, decay class), excluding flagged rows."""
    out = []
    keys = sorted({(r["method"], float(r["mu"])) for r in rows})
    for meth, mu in keys:
        sub = [r for r in rows if r["method"] == meth and float(r["mu"]) == mu]
        for cls in ("1-exp", "2-exp", "all"):
            part = [r for r in sub if cls == "all" or r["decay_class"] == cls]
            good = [float(r["bias"]) for r in part if not r["flagged"]]
            out.append({
                "method": meth, "mu": mu, "decay_class": cls, "n": len(good),
                "n_flagged": len(part) - len(good),
                "mean_bias": float(np.mean(good)) if good else float("nan"),
            })
    return out


def audit_mitigation(rows: Sequence[dict], summary: Sequence[dict], atol: float = 1e-9) -> list[str]:
    """Recompute aggregates from detail rows; return a list of mismatches."""
    fresh = summarize_mitigation(rows)
    problems = []
    for a, b in zip(fresh, summary):
        ka = (a["method"], float(a["mu"]), a["decay_class"])
        kb = (b["method"], float(b["mu"]), b["decay_class"])
        if ka != kb or int(a["n"]) != int(b["n"]):
            problems.append(f"row mismatch {ka} vs {kb}")
        elif not (math.isnan(a["mean_bias"]) and math.isnan(float(b["mean_bias"]))) and abs(a["mean_bias"] - float(b["mean_bias"])) > atol:
            problems.append(f"{ka}: mean_bias {b['mean_bias']} != {a['mean_bias']}")
    if len(fresh) != len(summary):
        problems.append("summary row count differs")
    return problems


def audit_fits(rows: Sequence[dict], summary: Sequence[dict], outlier_factor: float, atol: float = 1e-9) -> list[str]:
    copies = [dict(r) for r in rows]
    fresh = summarize_fits(copies, outlier_factor)
    problems = []
    for a, b in zip(fresh, summary):
        for key in ("mean_eps1", "mean_eps2", "frac_eps2_le_eps1"):
            if abs(float(a[key]) - float(b[key])) > atol * max(1.0, abs(float(a[key]))):
                problems.append(f"{a['noise_model']}: {key} {b[key]} != {a[key]}")
    if len(fresh) != len(summary):
        problems.append("summary row count differs")
    return problems


# -- costs --------------------------------------------------------------------

COST_COLUMNS = ["gamma", "mu", "C_Q0", "C_QE", "C_QH"]
CROSSING_COLUMNS = ["gamma", "pair", "mu"]


def cost_grid(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    c = cfg["costs"]
    mus = np.linspace(c["mu_min"], c["mu_max"], c["steps"])
    rows, crossings = [], []
    for g in c["gammas"]:
        for mu in mus:
            rows.append({"gamma": float(g), "mu": float(mu), **fh_costs(g, mu, c["lam"])})
        for pair, roots in cost_crossings(g, c["mu_min"], c["mu_max"], c["lam"]).items():
            crossings += [{"gamma": float(g), "pair": pair, "mu": r} for r in roots]
    return rows, crossings


# -- Monte Carlo validation ---------------------------------------------------

def _chunks(n: int) -> list[int]:
    return [min(MC_CHUNK, n - i) for i in range(0, n, MC_CHUNK)]


def _run_mc(circuit, plan, n, seed_seq: np.random.SeedSequence, threads: int):
    sizes = _chunks(n)
    seqs = seed_seq.spawn(len(sizes))

    def job(i):
        return run_trajectories(circuit, plan, sizes[i], np.random.default_rng(seqs[i]))

    from .simulator import TrajectoryBatch

    return TrajectoryBatch.concat(parallel_map(job, list(range(len(sizes))), threads))


def mc_circuit(cfg: ExperimentConfig) -> NoisyCircuit:
    c = cfg["mc"]
    return build_circuit(FhCircuitSpec(lx=c["lx"], ly=c["ly"], layers=c["layers"], seed=cfg.seed))


def mc_validate(cfg: ExperimentConfig, threads: int = 1, tolerance: float = 0.10) -> dict[str, Any]:
    """Empirical checks of the quasi-probability estimator and symmetry retention."""
    c = cfg["mc"]
    n = int(c["trajectories"])
    circuit = mc_circuit(cfg)
    obs = observable_strings(c["lx"], c["ly"], circuit.mode_permutation)
    # default: the first hopping term.  Q**2 is the variance inflation for
    # observables with small expectation; the report also carries the
    # prediction corrected for the signal, valid for any observable.
    o = parse_pauli(c["observable"]) if c["observable"] else next(p for p in obs if p.x)
    root = np.random.SeedSequence(cfg.seed)
    s_quasi, s_plain, s_zero, s_zero_q, s_sym = root.spawn(5)
    noiseless = pauli_expectation(run_exact(circuit, 0.0), o)
    report: dict[str, Any] = {"trajectories": n, "observable": o.label, "n_gates": len(circuit.gates), "noiseless": noiseless}
    if n == 0:
        return report

    # quasi-probability cancellation of depolarizing noise with mu_eps given
    mu = c["mu_eps"] * 16.0 / 15.0
    noisy = attach_noise(circuit, "depolarizing", mu)
    quasi = tuple(None if m is None else decompose(m) for m in inverse_maps(noisy))
    mit = _run_mc(noisy, MitigationPlan(o, quasi=quasi), n, s_quasi, threads)
    raw = _run_mc(noisy, MitigationPlan(o), n, s_plain, threads)
    noisy_exact = pauli_expectation(run_exact(noisy), o)
    est, se = mit.estimate()
    q2 = mit.one_norm**2
    var_mit = float(np.var(mit.weighted, ddof=1))
    var_raw = float(np.var(raw.weighted, ddof=1))
    ratio = var_mit / var_raw
    refined = (q2 - noiseless**2) / (1.0 - noisy_exact**2)
    report["quasi"] = {
        "mu_eps": c["mu_eps"], "estimate": est, "stderr": se, "z": (est - noiseless) / se,
        "unbiased_3sigma": abs(est - noiseless) <= 3 * se,
        "one_norm": mit.one_norm, "predicted_Q2": q2, "poisson_Q2": math.exp(4 * c["mu_eps"]),
        "variance_ratio": ratio, "rel_dev_Q2": ratio / q2 - 1.0,
        "predicted_ratio_with_signal": refined, "rel_dev_with_signal": ratio / refined - 1.0,
        "variance_pass": abs(ratio / q2 - 1.0) <= tolerance,
        "noisy_estimate": raw.estimate()[0], "noisy_exact": noisy_exact,
    }

    # zero noise: there is nothing to cancel, so Q = 1 and the variance is unchanged
    clean = circuit.noiseless()
    z_quasi = tuple(None if m is None else decompose(m) for m in inverse_maps(clean))
    z_raw = _run_mc(clean, MitigationPlan(o), n, s_zero, threads)
    z_alt = _run_mc(clean, MitigationPlan(o, quasi=z_quasi), n, s_zero_q, threads)
    zr = float(np.var(z_alt.weighted, ddof=1) / np.var(z_raw.weighted, ddof=1))
    report["zero_noise"] = {"variance_ratio": zr, "pass": abs(zr - 1.0) <= tolerance}

    # symmetry retention under detectable noise
    sym = parity_symmetry(circuit.n_qubits)
    det = attach_noise(circuit, "detectable", c["mu_d"])
    s_val = initial_symmetry_value(circuit, sym)
    t = _run_mc(det, MitigationPlan(o, symmetry=sym, symmetry_value=s_val), n, s_sym, threads)
    frac = float(np.mean(t.passed))
    se_frac = math.sqrt(frac * (1 - frac) / n)
    poisson = pass_prob(c["mu_d"])
    exact = symmetry_partition(run_exact(det), sym, s_val, o)[2]
    report["symmetry"] = {
        "mu_d": c["mu_d"], "retention": frac, "stderr": se_frac,
        "poisson_prediction": poisson, "exact_prediction": exact,
        "z_poisson": (frac - poisson) / se_frac, "z_exact": (frac - exact) / se_frac,
        "pass": abs(frac - poisson) <= 3 * se_frac,
    }
    report["pass"] = bool(report["quasi"]["unbiased_3sigma"] and report["quasi"]["variance_pass"]
                          and report["zero_noise"]["pass"] and report["symmetry"]["pass"])
    return report

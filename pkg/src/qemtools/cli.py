"""Command-line entry point: ``qemtools <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure
(fit divergence, or non-hyperbolic decay on every observable).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, csvio, experiments
from .config import ConfigError, ExperimentConfig, load_config
from .mitigation.extrapolation import FitDivergence

log = logging.getLogger("qemtools")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class NumericalFailure(RuntimeError):
    """Raised by a subcommand whose results are numerically unusable."""


def _plots(args: argparse.Namespace, cfg: ExperimentConfig) -> bool:
    return cfg["output"]["plots"] and not args.no_plots


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    return Path(args.out if args.out is not None else cfg["output"]["dir"])


def _meta(cfg: ExperimentConfig, **extra) -> str:
    return csvio.metadata_line(cfg.seed, cfg.digest(), **extra)


def cmd_decay_scan(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    scans = experiments.decay_scan(cfg, args.threads)
    for model, rows in scans.items():
        path = csvio.write_csv(out / f"decay_{model}.csv", experiments.DECAY_COLUMNS, rows, _meta(cfg, noise_model=model))
        log.info("wrote %s (%d rows)", path, len(rows))
        if _plots(args, cfg):
            from .plotting import plot_decay

            plot_decay(rows, path.with_suffix(".png"), title=model)
    return EXIT_OK


def _read_decay_inputs(paths: Sequence[str]) -> list[dict]:
    rows: list[dict] = []
    for p in paths:
        try:
            _, part = csvio.read_csv(p)
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        missing = {"noise_model", "observable", "mu", "expectation"} - set(part[0] if part else {})
        if not part or missing:
            raise ConfigError(f"{p}: not a decay CSV (missing columns {sorted(missing)})")
        for i, r in enumerate(part, start=3):
            try:
                float(r["mu"]), float(r["expectation"])
            except ValueError as exc:
                raise ConfigError(f"{p}:{i}: {exc}") from exc
        rows.extend(part)
    return rows


def cmd_fit(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    f = cfg["fit"]
    k_max = args.k_max if args.k_max is not None else f["k_max"]
    tol = args.tol if args.tol is not None else f["tol"]
    if args.input:
        rows = _read_decay_inputs(args.input)
    else:
        rows = [r for model_rows in experiments.decay_scan(cfg, args.threads).values() for r in model_rows]
    fits, summary = experiments.fit_decays(rows, k_max, tol, f["outlier_factor"])
    meta = _meta(cfg, k_max=k_max, tol=float(tol))
    csvio.write_csv(out / "fit.csv", experiments.fit_columns(k_max), fits, meta)
    csvio.write_csv(out / "fit_summary.csv", experiments.SUMMARY_COLUMNS, summary, meta)
    for s in summary:
        log.info("%s: mean eps1=%.3g mean eps2=%.3g ratio=%.3g", s["noise_model"], s["mean_eps1"], s["mean_eps2"], s["ratio"])
    if args.audit:
        problems = experiments.audit_fits(fits, summary, f["outlier_factor"])
        _report_audit(problems)
        if problems:
            raise NumericalFailure("fit audit failed")
    return EXIT_OK


def cmd_mitigate(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    rows, summary = experiments.mitigate(cfg, args.threads, args.method)
    meta = _meta(cfg, lam=float(cfg["methods"]["lam"]), noise_model=cfg["methods"]["model"])
    path = csvio.write_csv(out / "mitigate.csv", experiments.MITIGATE_COLUMNS, rows, meta)
    csvio.write_csv(out / "mitigate_summary.csv", experiments.MITIGATE_SUMMARY_COLUMNS, summary, meta)
    log.info("wrote %s (%d rows)", path, len(rows))
    if _plots(args, cfg):
        from .plotting import plot_mitigation

        plot_mitigation(summary, out / "mitigate.png")
    if args.audit:
        problems = experiments.audit_mitigation(rows, summary)
        _report_audit(problems)
        if problems:
            raise NumericalFailure("mitigation audit failed")
    for s in summary:
        if s["decay_class"] == "all" and s["n"] == 0 and s["n_flagged"] > 0:
            raise NumericalFailure(f"{s['method']} at mu={s['mu']:g}: every observable was flagged")
    return EXIT_OK


def cmd_costs(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    rows, crossings = experiments.cost_grid(cfg)
    meta = _meta(cfg, lam=float(cfg["costs"]["lam"]))
    path = csvio.write_csv(out / "costs.csv", experiments.COST_COLUMNS, rows, meta)
    csvio.write_csv(out / "crossings.csv", experiments.CROSSING_COLUMNS, crossings, meta)
    log.info("wrote %s (%d rows, %d crossings)", path, len(rows), len(crossings))
    if _plots(args, cfg):
        from .plotting import plot_costs

        plot_costs(rows, out / "costs.png")
    return EXIT_OK


def cmd_mc_validate(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    n = cfg["mc"]["trajectories"]
    if 0 < n < 10_000:
        log.warning("%d trajectories is below the 10^4 needed for meaningful checks", n)
    report = experiments.mc_validate(cfg, args.threads)
    report["seed"] = cfg.seed
    report["config"] = cfg.digest()
    report["version"] = __version__
    path = csvio.write_json(_out_dir(args, cfg) / "mc_validate.json", report)
    log.info("wrote %s (overall pass: %s)", path, report.get("pass"))
    return EXIT_OK


def _report_audit(problems: list[str]) -> None:
    if problems:
        for p in problems:
            log.error("audit: %s", p)
    else:
        log.info("audit: aggregates match detail rows")


COMMANDS = {
    "decay-scan": cmd_decay_scan,
    "fit": cmd_fit,
    "mitigate": cmd_mitigate,
    "costs": cmd_costs,
    "mc-validate": cmd_mc_validate,
}


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--seed", type=int, metavar="N", help="override the circuit seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=_positive_int, default=1, metavar="N", help="worker threads")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qemtools", description="Quantum error-mitigation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("decay-scan", parents=[common], help="exact noisy expectations at each probe mu")
    p = sub.add_parser("fit", parents=[common], help="multi-exponential fits of decay scans")
    p.add_argument("--input", nargs="+", metavar="CSV", help="decay CSVs (default: run a fresh scan)")
    p.add_argument("--k-max", type=_positive_int)
    p.add_argument("--tol", type=float)
    p.add_argument("--audit", action="store_true", help="recompute aggregates from detail rows")
    p = sub.add_parser("mitigate", parents=[common], help="run Q, QE and QH pipelines")
    p.add_argument("--method", action="append", choices=["Q", "QE", "QH"], help="repeatable; default from config")
    p.add_argument("--audit", action="store_true", help="recompute aggregates from detail rows")
    sub.add_parser("costs", parents=[common], help="cost-factor curves and their crossings")
    sub.add_parser("mc-validate", parents=[common], help="Monte Carlo checks of estimator statistics")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"qemtools: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitDivergence, NumericalFailure) as exc:
        print(f"qemtools: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line entry point.

    python -m app simulate  --config run.cfg --out out/
    python -m app verify    --suite lemmas --seed 0
    python -m app reproduce --figure fig1 --out out/
    python -m app rates     --config run.cfg --out out/
    python -m app learner   --config run.cfg --out out/
    python -m app sweep     --config grid.cfg --out out/ --threads 4

Exit codes: 0 success, 1 property failure, 2 configuration error,
3 runtime or numeric error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .adapters.record_writer import (
    DIAGNOSTIC_COLUMNS,
    SNAPSHOT_COLUMNS,
    TRAJECTORY_COLUMNS,
    diagnostic_rows,
    make_header,
    model_rows,
    snapshot_rows,
    trajectory_rows,
    write_csv,
    write_json,
)
from .config.loader import build_config, load_config, load_sweep
from .config.presets import FIGURE_PRESETS
from .config.settings import Settings, configure_logging, load_settings, resolve_threads
from .core.errors import ConfigError, ShiftEngineError
from .core.experiments import (
    classification_rate,
    learner_round,
    regression_rate,
    reproduce_figure,
    simulate_config,
    sweep,
)
from .core.objectives import Setting
from .core.verify import run_suite
from .schemas import LearnerReport, Manifest, SweepRow

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_RUNTIME = 3


def _overrides(args) -> Dict[str, Any]:
    return {"seed": args.seed} if args.seed is not None else {}


def _require_config(args) -> Path:
    if not args.config:
        raise ConfigError("config", "--config is required for this command")
    return Path(args.config)


def cmd_simulate(args, settings: Settings) -> int:
    cfg = load_config(_require_config(args), _overrides(args))
    run = simulate_config(cfg)
    path = write_csv(
        Path(args.out) / "trajectory.csv",
        make_header("trajectory", cfg.seed, cfg.echo()),
        TRAJECTORY_COLUMNS,
        trajectory_rows(run.trajectory.records),
    )
    logger.info("wrote %s (%d records)", path, len(run.trajectory.records))
    return EXIT_OK


def cmd_verify(args, settings: Settings) -> int:
    if not args.suite:
        raise ConfigError("suite", "--suite is required")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("seed", "must be non-negative")
    results = run_suite(args.suite, args.seed or 0)
    for res in results:
        print(res.line())
    return EXIT_OK if all(res.passed for res in results) else EXIT_PROPERTY_FAILURE


def cmd_reproduce(args, settings: Settings) -> int:
    if args.figure not in FIGURE_PRESETS:
        raise ConfigError("figure", f"unknown figure {args.figure!r}; choose from {', '.join(FIGURE_PRESETS)}")
    values = dict(FIGURE_PRESETS[args.figure])
    values.update(_overrides(args))
    cfg = build_config(values)
    data = reproduce_figure(cfg)
    out = Path(args.out)
    header = make_header("snapshot", cfg.seed, cfg.echo())
    files: List[str] = []
    for snap in data.snapshots:
        path = write_csv(out / "snapshots" / f"t_{snap.t}.csv", header, SNAPSHOT_COLUMNS, snapshot_rows(snap))
        files.append(str(path.relative_to(out)))
    derived = data.derived()
    final = data.snapshots[-1]
    derived["final_mean_align_b"] = float(np.nanmean(final.align_b))
    derived["final_mean_align_c"] = float(np.nanmean(final.align_c))
    manifest = Manifest(
        figure=args.figure,
        code_version=__version__,
        config=cfg.echo(),
        derived=derived,
        markers=data.markers,
        stationary_particles=np.flatnonzero(final.stationary).tolist(),
        files=files + ["manifest.json"],
    )
    write_json(out / "manifest.json", manifest)
    logger.info("wrote %d snapshot files for %s to %s", len(files), args.figure, out)
    return EXIT_OK


def cmd_rates(args, settings: Settings) -> int:
    cfg = load_config(_require_config(args), _overrides(args))
    out = Path(args.out)
    extra: Dict[str, Any] = {"setting": cfg.setting.value}
    if cfg.setting is Setting.REGRESSION:
        fit, run = regression_rate(cfg)
    else:
        result = classification_rate(cfg)
        fit, run = result.fit, result.run
        if result.scalar is not None:
            summary = result.scalar.summary
            extra.update(
                t0=summary.t0_found,
                slope_a=summary.slope_a,
                limit_ra_minus_b_over_t=summary.limit_ra_minus_b_over_t,
                eta_r=summary.params.eta * summary.params.r,
                bound_abs_s_over_logt=summary.bound_abs_s_over_logt,
                final_L=summary.final_L,
            )
            write_csv(
                out / "diagnostics.csv",
                make_header("diagnostics", cfg.seed, cfg.echo()),
                DIAGNOSTIC_COLUMNS,
                diagnostic_rows(result.scalar.rows),
            )
    write_csv(
        out / "trajectory.csv",
        make_header("trajectory", cfg.seed, cfg.echo()),
        TRAJECTORY_COLUMNS,
        trajectory_rows(run.trajectory.records),
    )
    body = fit.model_dump(mode="json")
    body.update(extra, fitted_rate=fit.fitted_rate)
    write_json(out / "ratefit.json", body, make_header("ratefit", cfg.seed, cfg.echo()))
    logger.info("%s rate fit: slope=%.6g predicted=%.6g r2=%.4f", fit.model.value, fit.slope, fit.predicted_c_or_exponent, fit.r2)
    return EXIT_OK


def cmd_learner(args, settings: Settings) -> int:
    cfg = load_config(_require_config(args), _overrides(args))
    result = learner_round(cfg)
    report = LearnerReport(
        setting=cfg.setting,
        T=cfg.T,
        n=result.outcome.n_used,
        eta=result.outcome.eta,
        steps=result.outcome.steps,
        noise_free=cfg.learner_noise_free,
        err_norm=result.outcome.err_norm,
        curse_ratio=result.outcome.curse_ratio,
        along_star=result.decomposition.along_star,
        along_b=result.decomposition.along_b,
        residual=result.decomposition.residual,
        n_degenerate=result.outcome.n_degenerate,
        theta1=result.outcome.theta1.tolist(),
    )
    write_json(Path(args.out) / "learner.json", report, make_header("learner", cfg.seed, cfg.echo()))
    logger.info("learner: err_norm=%.6g curse_ratio=%s", report.err_norm, report.curse_ratio)
    return EXIT_OK


def cmd_sweep(args, settings: Settings) -> int:
    configs = load_sweep(_require_config(args), _overrides(args))
    threads = resolve_threads(args.threads, settings)
    rows = sweep(configs, threads)
    columns, values = model_rows(rows)
    base = configs[0]
    write_csv(
        Path(args.out) / "sweep.csv",
        make_header("sweep", base.seed, {"configs": [cfg.echo() for cfg in configs]}),
        columns or list(SweepRow.model_fields),
        values,
    )
    logger.info("wrote %d sweep rows (threads=%d)", len(rows), threads)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "reproduce": cmd_reproduce,
    "rates": cmd_rates,
    "learner": cmd_learner,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shift-engine", description="Adversarial covariate-shift simulations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="flat key = value config file")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--threads", type=int, help="worker processes (ADVSHIFT_THREADS wins)")
        cmd.add_argument("--figure", help="fig1 or fig2 (reproduce)")
        cmd.add_argument("--suite", help="lemmas, gradients, closed-form or envelopes (verify)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
        configure_logging(settings.log_level)
        return COMMANDS[args.command](args, settings)
    except ShiftEngineError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error("I/O error: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, ArithmeticError) as e:
        logger.error("run failed: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

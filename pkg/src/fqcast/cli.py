"""
Command-line entry point ``fqcast``.

Exit codes: 0 on success, 2 on a configuration or usage error, 3 on a data
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .backtest import SyntheticSpec, evaluate_losses, forecast_for, generate_synthetic, run_experiment, write_reports
from .config import ConfigError, DataError, load_config
from .mcs import MCSConfig, run_mcs
from .scoring import DEFAULT_RULES, LossMatrix, score_day
from .timeseries import IngestError, load_panel, save_panel, to_stationary

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _csv_list(text: str | None) -> list[str] | None:
    return [t.strip() for t in text.split(",") if t.strip()] if text else None


def cmd_ingest(args) -> int:
    panel = load_panel(args.csv, args.date_column, args.date_format, _csv_list(args.columns))
    dropped = panel.dropped
    if args.transform != "none":
        panel = to_stationary(panel, args.transform, args.multiplier)
    save_panel(panel, args.out)
    print(f"wrote {args.out}: {panel.T} rows x {panel.n} columns ({dropped} incomplete rows dropped)")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = SyntheticSpec(
            kind=args.kind, n=args.n, T=args.T, factors=args.factors, idio_sd=args.idio_sd,
            regime_scale=args.regime_scale, seed=args.seed, start=args.start,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    panel = generate_synthetic(spec)
    save_panel(panel, args.out)
    print(f"wrote {args.out}: {panel.T} rows x {panel.n} columns")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = run_experiment(cfg, seed=args.seed, jobs=args.jobs, out=args.out, resume=not args.no_resume)
    print((res.out_dir / "summary.txt").read_text(), end="")
    print(f"outputs in {res.out_dir}")
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        samples = np.loadtxt(args.samples, delimiter=",", skiprows=1 if args.header else 0, ndmin=2)
        y = np.array([float(v) for v in args.observed.split(",")])
    except ValueError as exc:
        raise DataError(f"cannot read samples or observation: {exc}") from exc
    if samples.shape[1] != y.size:
        raise DataError(f"samples have {samples.shape[1]} columns, observation has {y.size} values")
    rules = _csv_list(args.rules) or list(DEFAULT_RULES)
    if y.size < 2:
        rules = [r for r in rules if not r.startswith("vs_")]
    try:
        scores = score_day(samples, y, rules)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({k: np.asarray(v).tolist() for k, v in scores.items()}, indent=2))
    return EXIT_OK


def cmd_mcs(args) -> int:
    try:
        lm = LossMatrix.from_csv(args.losses)
    except (IngestError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    try:
        conf = MCSConfig(alpha=args.alpha, reps=args.reps, block_length=args.block_length, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        res = run_mcs(lm, conf)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(res.to_json())
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = load_config(run_dir / "config.json")
    ldir = run_dir / "losses"
    files = sorted(ldir.glob("*.csv")) if ldir.is_dir() else []
    if not files:
        raise DataError(f"no loss matrices under {ldir}")
    try:
        losses = {f.stem.replace("__", "/"): LossMatrix.from_csv(f) for f in files}
    except (IngestError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    pit = {}
    for f in sorted((run_dir / "pit").glob("*.csv")):
        pit[f.stem] = load_panel(f).values
    mcs, sub = evaluate_losses(losses, cfg)
    write_reports(run_dir, losses, mcs, sub, pit, cfg)
    print((run_dir / "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    fc, date, panel = forecast_for(cfg, args.model, args.date)
    out = {
        "model": args.model,
        "date": date.isoformat(),
        "marginals": {name: m.to_dict() for name, m in zip(panel.names, fc.marginals)},
        "copula": fc.copula.to_dict(),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fqcast", description="Factor-quantile distribution forecasting and evaluation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log fit fallbacks and progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="clean a CSV panel and transform it to returns or changes")
    s.add_argument("csv")
    s.add_argument("--out", required=True)
    s.add_argument("--date-column")
    s.add_argument("--date-format")
    s.add_argument("--columns", help="comma-separated subset of columns")
    s.add_argument("--transform", default="log_returns", choices=["log_returns", "simple_returns", "first_difference", "none"])
    s.add_argument("--multiplier", type=float, default=1.0)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="write a synthetic panel")
    s.add_argument("--kind", default="factor_gaussian", choices=["factor_gaussian", "factor_t", "egarch_panel", "regime_switch"])
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--T", type=int, default=2500)
    s.add_argument("--factors", type=int, default=1)
    s.add_argument("--idio-sd", type=float, default=0.3)
    s.add_argument("--regime-scale", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--start", default="2000-01-03")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="run a rolling backtest from a config file")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--no-resume", action="store_true", help="ignore existing checkpoints")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("score", help="score a sample forecast (CSV, one row per draw) against an observation")
    s.add_argument("samples")
    s.add_argument("--observed", required=True, help="comma-separated observation vector")
    s.add_argument("--rules", help="comma-separated rule identifiers")
    s.add_argument("--header", action="store_true", help="skip a header row in the samples file")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("mcs", help="Model Confidence Set on a loss-matrix CSV")
    s.add_argument("losses")
    s.add_argument("--alpha", type=float, default=0.25)
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--block-length", type=lambda v: v if v == "auto" else int(v), default="auto")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_mcs)

    s = sub.add_parser("report", help="rebuild MCS results and tables for a finished run directory")
    s.add_argument("run_dir")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("inspect", help="fit one model for one date and print its distribution nodes")
    s.add_argument("config")
    s.add_argument("--model", required=True)
    s.add_argument("--date", help="target date (default: last row)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, IngestError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

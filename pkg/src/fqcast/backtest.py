"""
Rolling out-of-sample experiments.

For every target date and model the runner fits on the preceding calibration
window, draws ``S`` joint samples, scores them against the realised vector
and records PIT values. Loss matrices, MCS results and report tables are
written to an output directory.

Randomness comes from one master seed. The generator for (day, model,
purpose) is ``SeedSequence(master, spawn_key=(day, crc32(model_id), purpose))``
so adding or removing a model never perturbs another model's draws, and days
can be processed in any order or in parallel.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import warnings
import zlib
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from . import benchmarks
from .benchmarks import MiscalibrationGuard
from .config import ConfigError, DataError, load_config, normalize
from .copula import CopulaSpec, JointForecast, compose, fit_gaussian_copula
from .distbuild import MarginalDistribution
from .latentfq import fq_ab_marginals, fq_al_marginals, pca, select_m
from .mcs import MCSConfig, MCSResult, inclusion_rates, run_mcs
from .qreg import Q9, QuantilePartition
from .scoring import LossMatrix, is_univariate, score_day
from .timeseries import IngestError, Panel, load_panel, save_panel, to_stationary

__all__ = [
    "Forecaster",
    "RunResult",
    "SyntheticSpec",
    "business_days",
    "evaluate_losses",
    "forecast_for",
    "fit_model",
    "generate_synthetic",
    "load_data",
    "run_experiment",
    "stream",
    "subperiod_split",
    "write_reports",
]

log = logging.getLogger(__name__)

PURPOSES = {"fit": 0, "sample": 1, "mcs": 2}


def stream(master: int, day: int, model_id: str, purpose: str) -> np.random.Generator:
    """Independent generator for one (day, model, purpose) triple."""
    key = (int(day), zlib.crc32(model_id.encode()), PURPOSES[purpose])
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=key))


# ---------------------------------------------------------------- synthetic data


def business_days(start: dt.date, count: int) -> tuple[dt.date, ...]:
    days = []
    d = start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return tuple(days)


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Synthetic panel description.

    ``factor_gaussian``: ``y = f L' + idio_sd * e`` with Gaussian ``f`` and ``e``.
    ``factor_t``: as above with unit-variance t(5) factors.
    ``egarch_panel``: independent EGARCH(1,1)-t columns with fixed parameters.
    ``regime_switch``: ``factor_gaussian`` whose loadings change at ``T // 2``:
    the second half of the columns flips sign and all loadings are multiplied
    by ``regime_scale``.
    """

    kind: str = "factor_gaussian"
    n: int = 8
    T: int = 2500
    factors: int = 1
    loadings: tuple[float, ...] | None = None
    idio_sd: float = 0.3
    regime_scale: float = 1.0
    seed: int = 0
    start: str = "2000-01-03"

    def __post_init__(self) -> None:
        if self.kind not in ("factor_gaussian", "factor_t", "egarch_panel", "regime_switch"):
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.n < 1 or self.T < 2 or self.factors < 1:
            raise ValueError("need n >= 1, T >= 2 and at least one factor")
        if self.idio_sd <= 0 or self.regime_scale <= 0:
            raise ValueError("idio_sd and regime_scale must be positive")
        if self.loadings is not None and len(self.loadings) != self.n * self.factors:
            raise ValueError(f"expected {self.n * self.factors} loadings, got {len(self.loadings)}")

    def loading_matrix(self) -> np.ndarray:
        if self.loadings is not None:
            return np.asarray(self.loadings, dtype=float).reshape(self.n, self.factors)
        L = np.ones((self.n, self.factors))
        for k in range(1, self.factors):
            L[:, k] = 0.5 * np.where(np.arange(self.n) % (k + 1) == 0, 1.0, -1.0)
        return L


EGARCH_SYNTH = benchmarks.EgarchParams(0.0, -0.1, 0.95, 0.1, -0.05, 8.0)


def generate_synthetic(spec: SyntheticSpec) -> Panel:
    rng = np.random.default_rng(spec.seed)
    names = tuple(f"x{i + 1}" for i in range(spec.n))
    dates = business_days(dt.date.fromisoformat(spec.start), spec.T)
    if spec.kind == "egarch_panel":
        values = np.column_stack(
            [benchmarks.simulate_egarch(EGARCH_SYNTH, spec.T, np.random.default_rng([spec.seed, j])) for j in range(spec.n)]
        )
        return Panel(dates, names, values)
    L = spec.loading_matrix()
    if spec.kind == "factor_t":
        f = rng.standard_t(5, (spec.T, spec.factors)) * np.sqrt(3.0 / 5.0)
    else:
        f = rng.standard_normal((spec.T, spec.factors))
    eps = spec.idio_sd * rng.standard_normal((spec.T, spec.n))
    if spec.kind == "regime_switch":
        half = spec.T // 2
        flip = np.where(np.arange(spec.n) < (spec.n + 1) // 2, 1.0, -1.0)
        L2 = L * flip[:, None] * spec.regime_scale
        values = np.vstack([f[:half] @ L.T, f[half:] @ L2.T]) + eps
    else:
        values = f @ L.T + eps
    return Panel(dates, names, values)


def load_data(cfg: dict[str, Any]) -> Panel:
    """Materialise the panel described by ``cfg['data']``."""
    data = cfg["data"]
    if "synthetic" in data:
        s = dict(data["synthetic"])
        if s.get("loadings") is not None:
            s["loadings"] = tuple(s["loadings"])
        try:
            return generate_synthetic(SyntheticSpec(**s))
        except ValueError as exc:
            raise ConfigError(f"synthetic data: {exc}") from exc
    try:
        panel = load_panel(data["csv"], data.get("date_column"), data.get("date_format"), data.get("columns"))
        transform = data.get("transform", "none")
        if transform != "none":
            panel = to_stationary(panel, transform, data.get("multiplier", 1.0))
    except (IngestError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    return panel


# ---------------------------------------------------------------- models


class ForecastFailure(RuntimeError):
    pass


@dataclass
class Forecaster:
    """Fitted one-day-ahead joint law: marginals plus a copula."""

    marginals: list[MarginalDistribution]
    copula: CopulaSpec
    state: Any = None

    def joint(self, S: int, rng: np.random.Generator) -> JointForecast:
        return compose(self.marginals, self.copula, S, rng)


def _partition(cfg) -> QuantilePartition:
    return Q9 if cfg["taus"] == "Q9" else QuantilePartition(tuple(cfg["taus"]))


def _choose_m(model: dict, window: Panel, upper: int) -> int:
    if model.get("m") is not None:
        m = int(model["m"])
    else:
        m = select_m(pca(window), model["variance_threshold"])
    return max(1, min(m, upper))


def fit_model(
    model: dict,
    window: Panel,
    taus: QuantilePartition,
    rng: np.random.Generator,
    previous: Forecaster | None = None,
    guard: MiscalibrationGuard | None = None,
) -> Forecaster:
    """Fit one roster entry on a calibration window."""
    fam = model["family"]
    if fam == "fq_ab":
        m = _choose_m(model, window, window.n)
        margs = fq_ab_marginals(
            window, m, taus, N=model["N"], B=model["B"], rng=rng,
            omega_scale=model["omega_scale"], per_T=model["omega_per_T"],
        )
        return Forecaster(margs, fit_gaussian_copula(window))
    if fam == "fq_al":
        if window.n < 2:
            raise ForecastFailure("FQ-AL needs at least two variables")
        m = _choose_m(model, window, window.n - 1)
        margs = fq_al_marginals(window, m, taus, model["interpolation"])
        return Forecaster(margs, fit_gaussian_copula(window))
    if fam == "edf":
        return Forecaster(benchmarks.edf_marginals(window), fit_gaussian_copula(window))
    if fam in ("ccc_garch", "dcc_garch"):
        kind = fam.split("_")[0]
        prev = previous.state if (previous is not None and model["warm_start"]) else None
        gm = benchmarks.fit_garch_model(window, kind, previous=prev, starts=model.get("starts", 1 if prev else None))
        if guard is not None and not guard.accept(gm.vector()):
            raise ForecastFailure("mis-calibration guard rejected the new parameters")
        R = gm.correlation.forecast(gm.residuals)
        return Forecaster(gm.marginals(), CopulaSpec.gaussian(R), state=gm)
    raise ConfigError(f"unknown model family {fam!r}")


def _pit_value(m: MarginalDistribution, y: float) -> float:
    return float(np.clip(m.cdf(y), 0.0, 1.0))


def _run_days(
    cfg: dict[str, Any],
    model: dict,
    panel: Panel,
    days: Sequence[int],
    checkpoint: Path | None,
) -> list[dict]:
    """Sequentially forecast and score ``days`` (target row indices) for one model."""
    taus = _partition(cfg)
    S = cfg["samples"]
    rules = cfg["rules"]
    master = cfg["seed"]
    L = model["calibration"]
    failures = {f["date"] for f in cfg["inject_failures"] if f["model"] == model["id"]}
    is_garch = model["family"] in ("ccc_garch", "dcc_garch")
    guard = MiscalibrationGuard(model.get("guard_multiple", 10.0)) if is_garch else None
    last: Forecaster | None = None
    records = []
    handle = checkpoint.open("a") if checkpoint is not None else None
    try:
        for t in days:
            if cfg["poison_future"]:
                vals = np.array(panel.values)
                vals[t:] = np.nan
                source = Panel(panel.dates, panel.names, vals)
            else:
                source = panel
            window = source.rows(t - L, t)
            date = panel.dates[t]
            label = date.isoformat() if hasattr(date, "isoformat") else str(date)
            status, note = "ok", ""
            try:
                if label in failures:
                    raise ForecastFailure("injected failure")
                fc = fit_model(model, window, taus, stream(master, t, model["id"], "fit"), last, guard)
                last = fc
            except Exception as exc:  # any fit failure falls back instead of aborting
                note = f"{type(exc).__name__}: {exc}"
                if last is not None:
                    fc, status = last, "reused_previous"
                else:
                    fc = Forecaster(benchmarks.edf_marginals(window), fit_gaussian_copula(window))
                    status = "fallback_edf"
                log.warning("model %s on %s: %s (%s)", model["id"], label, note, status)
            joint = fc.joint(S, stream(master, t, model["id"], "sample"))
            y = panel.values[t]
            scores = score_day(joint.samples, y, rules)
            rec = {
                "day": int(t),
                "date": label,
                "model": model["id"],
                "status": status,
                "note": note,
                "scores": {k: (np.asarray(v).tolist() if np.ndim(v) else float(v)) for k, v in scores.items()},
                "pit": [_pit_value(m, y[i]) for i, m in enumerate(fc.marginals)],
            }
            records.append(rec)
            if handle is not None:
                handle.write(json.dumps(rec, sort_keys=True) + "\n")
                handle.flush()
    finally:
        if handle is not None:
            handle.close()
    return records


def _chunk_worker(args):
    cfg, model, panel, days, checkpoint = args
    return _run_days(cfg, model, panel, days, checkpoint)


def _load_checkpoints(directory: Path, model_id: str) -> dict[int, dict]:
    done: dict[int, dict] = {}
    for path in sorted(directory.glob(f"{model_id}.*jsonl")):
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted run
                if rec.get("model") == model_id:  # ids may contain dots, so the glob over-matches
                    done[rec["day"]] = rec
    return done


# ---------------------------------------------------------------- assembly


def subperiod_split(losses: LossMatrix, boundaries: Sequence) -> list[LossMatrix]:
    """
    Partition rows by date: part ``k`` holds dates in ``[b_{k-1}, b_k)``.

    Boundaries outside the date range only trigger a warning, leaving empty
    parts.
    """
    bounds = [dt.date.fromisoformat(b) if isinstance(b, str) else b for b in boundaries]
    if bounds != sorted(bounds):
        raise ValueError("boundaries must be sorted")
    dates = losses.dates
    if dates:
        for b in bounds:
            if b < dates[0] or b > dates[-1]:
                warnings.warn(f"subperiod boundary {b} lies outside {dates[0]}..{dates[-1]}", stacklevel=2)
    edges = [None, *bounds, None]
    parts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = [(lo is None or d >= lo) and (hi is None or d < hi) for d in dates]
        parts.append(losses.take(np.array(mask, dtype=bool)))
    return parts


def _assemble(records: dict[str, dict[int, dict]], models: Sequence[str], panel: Panel, rules: Sequence[str]):
    common = sorted(set.intersection(*(set(r) for r in records.values())))
    dates = tuple(panel.dates[t] for t in common)
    mats: dict[str, LossMatrix] = {}
    for r in rules:
        if is_univariate(r):
            for i, a in enumerate(panel.names):
                arr = np.array([[records[m][t]["scores"][r][i] for m in models] for t in common])
                mats[f"{r}/{a}"] = LossMatrix(dates, tuple(models), arr.reshape(len(common), len(models)))
        else:
            arr = np.array([[records[m][t]["scores"][r] for m in models] for t in common])
            mats[r] = LossMatrix(dates, tuple(models), arr.reshape(len(common), len(models)))
    pits = {m: np.array([records[m][t]["pit"] for t in common]).reshape(len(common), panel.n) for m in models}
    return mats, pits, dates


@dataclass
class RunResult:
    out_dir: Path
    losses: dict[str, LossMatrix]
    mcs: dict[str, MCSResult]
    subperiod_mcs: dict[str, list[MCSResult | None]]
    pit: dict[str, np.ndarray]
    dates: tuple
    statuses: dict[str, dict[str, int]] = field(default_factory=dict)


def _key_file(key: str) -> str:
    return key.replace("/", "__")


def _mcs_seed(master: int, key: str, part: int = 0) -> int:
    return int(np.random.SeedSequence(int(master), spawn_key=(zlib.crc32(key.encode()), part, PURPOSES["mcs"])).generate_state(1)[0])


def _mcs_all(losses: dict[str, LossMatrix], mcs_cfg: dict, master: int, part: int = 0):
    out = {}
    alpha = max(mcs_cfg["alphas"])
    for key, lm in losses.items():
        if lm.T < 50 or len(lm.models) < 2:
            out[key] = None
            continue
        conf = MCSConfig(alpha=alpha, reps=mcs_cfg["reps"], block_length=mcs_cfg["block_length"], seed=_mcs_seed(master, key, part))
        out[key] = run_mcs(lm, conf)
    return out


def _inclusion_rows(results: dict[str, MCSResult | None], models, alphas, period: str):
    rows = []
    groups: dict[str, list[MCSResult]] = {}
    for key, res in results.items():
        if res is None:
            continue
        rule = key.split("/")[0]
        if is_univariate(rule):
            groups.setdefault(rule, []).append(res)
            groups.setdefault("wcrps_all", []).append(res)
        else:
            groups.setdefault("multivariate", []).append(res)
    for group, rs in groups.items():
        for a in alphas:
            rates = inclusion_rates(rs, models, alpha=a)
            for m in models:
                rows.append([period, group, a, m, len(rs), round(rates[m] * len(rs)), rates[m]])
    return rows


def evaluate_losses(losses: dict[str, LossMatrix], cfg: dict[str, Any]):
    """
    MCS on every loss matrix over the full sample and each sub-period.

    Cells with fewer than 50 dates get ``None``. Returns ``(full, subperiods)``
    where ``subperiods[key]`` lists one result per sub-period.
    """
    mcs = _mcs_all(losses, cfg["mcs"], cfg["seed"])
    sub: dict[str, list[MCSResult | None]] = {}
    if cfg["subperiods"]:
        parts_by_key = {k: subperiod_split(lm, cfg["subperiods"]) for k, lm in losses.items()}
        for part in range(len(cfg["subperiods"]) + 1):
            res = _mcs_all({k: v[part] for k, v in parts_by_key.items()}, cfg["mcs"], cfg["seed"], part + 1)
            for k, r in res.items():
                sub.setdefault(k, []).append(r)
    return mcs, sub


def write_reports(
    out_dir: Path,
    losses: dict[str, LossMatrix],
    mcs: dict[str, MCSResult | None],
    subperiod_mcs: dict[str, list[MCSResult | None]],
    pit: dict[str, np.ndarray] | None,
    cfg: dict[str, Any],
) -> list[Path]:
    """Write loss, MCS and inclusion tables plus a plain-text summary."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    ldir = out_dir / "losses"
    ldir.mkdir(parents=True, exist_ok=True)
    for key, lm in losses.items():
        p = ldir / f"{_key_file(key)}.csv"
        lm.to_csv(p)
        written.append(p)
    mdir = out_dir / "mcs"
    mdir.mkdir(exist_ok=True)
    for key, res in mcs.items():
        if res is not None:
            p = mdir / f"{_key_file(key)}.json"
            p.write_text(res.to_json() + "\n")
            written.append(p)
    models = next(iter(losses.values())).models if losses else ()
    alphas = cfg["mcs"]["alphas"]

    p = out_dir / "mcs_pvalues.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", *models])
        for key, res in mcs.items():
            if res is not None:
                w.writerow([key, *(f"{res.p_values[m]:.4f}" for m in models)])
    written.append(p)

    p = out_dir / "inclusion_rates.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "group", "alpha", "model", "cells", "included", "rate"])
        w.writerows(_inclusion_rows(mcs, models, alphas, "full"))
    written.append(p)

    if subperiod_mcs:
        nparts = len(next(iter(subperiod_mcs.values())))
        p = out_dir / "subperiod_mcs_pvalues.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["period", "rule", *models])
            for k in range(nparts):
                for key, parts in subperiod_mcs.items():
                    res = parts[k]
                    if res is not None:
                        w.writerow([k + 1, key, *(f"{res.p_values[m]:.4f}" for m in models)])
        written.append(p)
        p = out_dir / "subperiod_inclusion_rates.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["period", "group", "alpha", "model", "cells", "included", "rate"])
            for k in range(nparts):
                w.writerows(_inclusion_rows({key: parts[k] for key, parts in subperiod_mcs.items()}, models, alphas, str(k + 1)))
        written.append(p)

    if pit:
        pdir = out_dir / "pit"
        pdir.mkdir(exist_ok=True)
        dates = next(iter(losses.values())).dates
        for m, arr in pit.items():
            p = pdir / f"{m}.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["date", *[f"x{i + 1}" for i in range(arr.shape[1])]])
                for d, row in zip(dates, arr):
                    w.writerow([d.isoformat() if hasattr(d, "isoformat") else d, *(repr(float(v)) for v in row)])
            written.append(p)

    p = out_dir / "summary.txt"
    p.write_text(_summary_text(losses, mcs, pit, cfg))
    written.append(p)
    return written


def _summary_text(losses, mcs, pit, cfg) -> str:
    lines = []
    any_lm = next(iter(losses.values()))
    lines.append(f"out-of-sample days: {any_lm.T}")
    if any_lm.T:
        lines.append(f"first date: {any_lm.dates[0]}  last date: {any_lm.dates[-1]}")
    lines.append(f"models: {', '.join(any_lm.models)}")
    lines.append("")
    lines.append("mean losses (multivariate rules)")
    width = max(len(m) for m in any_lm.models) + 2
    for key, lm in losses.items():
        if "/" in key:
            continue
        means = lm.mean()
        lines.append(f"  {key}")
        for m in lm.models:
            res = mcs.get(key)
            p = f"  MCS p={res.p_values[m]:.3f}" if res is not None else ""
            lines.append(f"    {m:<{width}}{means[m]:.6g}{p}")
    lines.append("")
    alpha = max(cfg["mcs"]["alphas"])
    rows = _inclusion_rows(mcs, any_lm.models, [alpha], "full")
    lines.append(f"univariate inclusion rates at alpha={alpha}")
    for period, group, a, m, cells, inc, rate in rows:
        if group == "wcrps_all":
            lines.append(f"    {m:<{width}}{inc}/{cells}  ({rate:.2f})")
    if pit:
        lines.append("")
        lines.append("PIT uniformity (KS p-values per asset)")
        for m, arr in pit.items():
            if arr.shape[0] >= 2:
                ps = [stats.kstest(arr[:, i], "uniform").pvalue for i in range(arr.shape[1])]
                lines.append(f"    {m:<{width}}" + " ".join(f"{q:.3f}" for q in ps))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- driver


def target_days(cfg: dict[str, Any], panel: Panel) -> list[int]:
    start = max(m["calibration"] for m in cfg["models"])
    if start >= panel.T:
        raise DataError(f"calibration length {start} leaves no out-of-sample days in {panel.T} rows")
    days = list(range(start, panel.T))
    k = cfg.get("evaluate_last")
    if k is not None:
        if k > len(days):
            raise ConfigError(f"evaluate_last={k} exceeds the {len(days)} available out-of-sample days")
        days = days[-k:]
    return days


def run_experiment(
    config: dict[str, Any] | str | Path,
    seed: int | None = None,
    jobs: int = 1,
    out: str | Path | None = None,
    resume: bool = True,
) -> RunResult:
    """
    Run a full backtest and write its outputs.

    Parameters
    ----------
    config : mapping or path
        Raw or normalised configuration, or a JSON/YAML file.
    seed, out : optional
        Override ``config['seed']`` and ``config['output']``.
    jobs : int
        Worker processes for stateless model families (GARCH models always run
        sequentially because of warm starts and the mis-calibration guard).
    resume : bool
        Reuse per-day checkpoints found in the output directory.
    """
    if isinstance(config, (str, Path)):
        cfg = load_config(config)
    else:
        cfg = normalize(config)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["output"] = str(out)
    out_dir = Path(cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    panel = load_data(cfg)
    if not np.all(np.isfinite(panel.values)):
        raise DataError("panel contains non-finite values")
    days = target_days(cfg, panel)

    labels = {panel.dates[t].isoformat() for t in days}
    for f in cfg["inject_failures"]:
        if f["date"] not in labels:
            warnings.warn(f"injected failure date {f['date']} is not an evaluated date", stacklevel=2)

    saved = {k: v for k, v in cfg.items() if k != "output"}
    (out_dir / "config.json").write_text(json.dumps(saved, indent=2, sort_keys=True) + "\n")
    save_panel(panel, out_dir / "data.csv")

    ck_dir = out_dir / "checkpoints"
    ck_dir.mkdir(exist_ok=True)
    if not resume or not cfg["checkpoint"]:
        for f in ck_dir.glob("*.jsonl"):
            f.unlink()

    records: dict[str, dict[int, dict]] = {}
    tasks = []
    for model in cfg["models"]:
        done = _load_checkpoints(ck_dir, model["id"]) if (resume and cfg["checkpoint"]) else {}
        done = {d: r for d, r in done.items() if d in set(days)}
        records[model["id"]] = done
        todo = [d for d in days if d not in done]
        if not todo:
            continue
        stateless = model["family"] not in ("ccc_garch", "dcc_garch")
        n_chunks = max(1, min(jobs, len(todo))) if stateless else 1
        for k, chunk in enumerate(np.array_split(np.array(todo), n_chunks)):
            ck = ck_dir / f"{model['id']}.{todo[0]}-{k}.jsonl" if cfg["checkpoint"] else None
            tasks.append((cfg, model, panel, [int(x) for x in chunk], ck))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_chunk_worker, tasks))
    else:
        results = [_chunk_worker(t) for t in tasks]
    for (cfg_, model, *_), recs in zip(tasks, results):
        for r in recs:
            records[model["id"]][r["day"]] = r

    models = [m["id"] for m in cfg["models"]]
    losses, pits, dates = _assemble(records, models, panel, cfg["rules"])
    mcs, sub = evaluate_losses(losses, cfg)
    files = write_reports(out_dir, losses, mcs, sub, pits, cfg)
    statuses = {
        m: {s: sum(1 for r in records[m].values() if r["status"] == s) for s in ("ok", "reused_previous", "fallback_edf")}
        for m in models
    }
    (out_dir / "status.json").write_text(json.dumps(statuses, indent=2, sort_keys=True) + "\n")
    manifest = {
        str(p.relative_to(out_dir)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(files + [out_dir / "config.json", out_dir / "data.csv", out_dir / "status.json"])
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(out_dir, losses, mcs, sub, pits, dates, statuses)


def forecast_for(cfg: dict[str, Any], model_id: str, date: str | None = None) -> tuple[Forecaster, dt.date, Panel]:
    """Fit one model for one target date (default: the last row) without running the backtest."""
    panel = load_data(cfg)
    try:
        model = next(m for m in cfg["models"] if m["id"] == model_id)
    except StopIteration:
        raise ConfigError(f"no model with id {model_id!r}") from None
    if date is None:
        t = panel.T - 1
    else:
        target = dt.date.fromisoformat(date)
        if target not in panel.dates:
            raise DataError(f"date {date} not in the panel")
        t = panel.dates.index(target)
    if t < model["calibration"]:
        raise DataError(f"date {panel.dates[t]} has fewer than {model['calibration']} prior rows")
    window = panel.rows(t - model["calibration"], t)
    fc = fit_model(model, window, _partition(cfg), stream(cfg["seed"], t, model_id, "fit"))
    return fc, panel.dates[t], panel

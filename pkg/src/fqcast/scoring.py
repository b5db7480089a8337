"""
Sample-based proper scoring rules, all negatively oriented.

Rule identifiers used across the package:

``wcrps_uniform``, ``wcrps_centre``, ``wcrps_left_tail``, ``wcrps_right_tail``,
``wcrps_both_tails``
    Quantile-weighted CRPS, one value per asset.
``es``
    Energy score ``E|Y - y| - E|Y - Y'| / 2``.
``vs_<p>``
    Variogram score of order ``p`` (e.g. ``vs_0.5``).
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

__all__ = [
    "DEFAULT_RULES",
    "LossMatrix",
    "WEIGHTS",
    "energy_score",
    "is_univariate",
    "score_backtest",
    "score_day",
    "variogram_score",
    "wcrps",
    "wcrps_all",
]

WEIGHTS = {
    "uniform": lambda a: np.ones_like(a),
    "centre": lambda a: a * (1.0 - a),
    "left_tail": lambda a: a**2,
    "right_tail": lambda a: (1.0 - a) ** 2,
    "both_tails": lambda a: (2.0 * a - 1.0) ** 2,
}

DEFAULT_RULES = (
    *(f"wcrps_{k}" for k in WEIGHTS),
    "es",
    "vs_0.5",
    "vs_1",
    "vs_2",
)

ES_EXACT_MAX = 2000
ES_RESAMPLES = 100
_ES_SEED = 20240101


def _alpha_grid(S: int, points: int) -> np.ndarray:
    a = (np.arange(points) + 0.5) / points
    return np.clip(a, 1.0 / (2 * S), 1.0 - 1.0 / (2 * S))


def _quantile_terms(samples: np.ndarray, y, points: int):
    x = np.asarray(samples, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("wCRPS needs at least two samples")
    a = _alpha_grid(x.shape[0], points)
    q = np.quantile(x, a, axis=0, method="hazen")
    y = np.asarray(y, dtype=float)
    ind = (y <= q).astype(float)
    a_col = a.reshape((-1,) + (1,) * (q.ndim - 1))
    return a, 2.0 * (ind - a_col) * (q - y)


def wcrps(samples, y, scheme: str = "uniform", points: int = 1000):
    """
    Quantile-weighted CRPS of a sample forecast.

    Midpoint rule on ``points`` levels clipped to ``[1/(2S), 1 - 1/(2S)]``;
    sample quantiles interpolate order statistics linearly (Hazen). With a
    2-d ``samples`` (S x n) and ``y`` of length n, returns one score per column.

    Parameters
    ----------
    scheme : {'uniform', 'centre', 'left_tail', 'right_tail', 'both_tails'}
    """
    if scheme not in WEIGHTS:
        raise ValueError(f"unknown weight scheme {scheme!r}")
    if np.size(samples) == 0:
        raise ValueError("empty sample")
    a, terms = _quantile_terms(samples, y, points)
    w = WEIGHTS[scheme](a).reshape((-1,) + (1,) * (terms.ndim - 1))
    out = np.mean(terms * w, axis=0)
    return out if np.ndim(out) else float(out)


def wcrps_all(samples, y, points: int = 1000) -> dict[str, np.ndarray]:
    """All five weightings from one quantile evaluation."""
    a, terms = _quantile_terms(samples, y, points)
    shape = (-1,) + (1,) * (terms.ndim - 1)
    return {k: np.mean(terms * f(a).reshape(shape), axis=0) for k, f in WEIGHTS.items()}


def energy_score(samples, y, exact_max: int = ES_EXACT_MAX, resamples: int = ES_RESAMPLES) -> float:
    """
    Energy score ``mean|Y_s - y| - sum_{s,s'} |Y_s - Y_s'| / (2 S^2)``.

    Above ``exact_max`` samples the pair term is estimated from ``resamples``
    random permutations pairing each sample with another, using a fixed
    internal seed so the score is a deterministic function of its inputs.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[1] != y.size:
        raise ValueError(f"samples have dimension {x.shape[1]}, observation {y.size}")
    S = x.shape[0]
    if S < 2:
        raise ValueError("energy score needs at least two samples")
    first = float(np.mean(np.linalg.norm(x - y, axis=1)))
    if S <= exact_max:
        pair = 2.0 * float(np.sum(pdist(x))) / S**2
    else:
        rng = np.random.default_rng(_ES_SEED)
        acc = 0.0
        for _ in range(resamples):
            perm = rng.permutation(S)
            acc += float(np.mean(np.linalg.norm(x - x[perm], axis=1)))
        pair = acc / resamples
    return first - 0.5 * pair


def variogram_score(samples, y, p: float) -> float:
    """
    Variogram score of order ``p``:
    ``sum_{i,j} (|y_i - y_j|^p - mean_s |Y_si - Y_sj|^p)^2``.
    """
    x = np.asarray(samples, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2 or x.shape[1] < 2 or y.size < 2:
        raise ValueError("variogram score needs at least two dimensions")
    if x.shape[1] != y.size:
        raise ValueError(f"samples have dimension {x.shape[1]}, observation {y.size}")
    if x.shape[0] < 2:
        raise ValueError("variogram score needs at least two samples")
    if not p > 0:
        raise ValueError("order p must be positive")
    i, j = np.triu_indices(y.size, k=1)
    obs = np.abs(y[i] - y[j]) ** p
    fc = np.mean(np.abs(x[:, i] - x[:, j]) ** p, axis=0)
    return float(2.0 * np.sum((obs - fc) ** 2))


def is_univariate(rule: str) -> bool:
    return rule.startswith("wcrps_")


def _vs_order(rule: str) -> float:
    try:
        return float(rule[3:])
    except ValueError:
        raise ValueError(f"cannot parse variogram order from {rule!r}") from None


def _check_rules(rules: Iterable[str]) -> tuple[str, ...]:
    rules = tuple(rules)
    for r in rules:
        if r == "es" or (is_univariate(r) and r[6:] in WEIGHTS):
            continue
        if r.startswith("vs_"):
            _vs_order(r)
            continue
        raise ValueError(f"unknown scoring rule {r!r}")
    return rules


def score_day(samples, y, rules: Sequence[str] = DEFAULT_RULES) -> dict[str, np.ndarray | float]:
    """
    Score one joint sample forecast against one observation vector.

    Univariate rules map to an n-vector (one value per asset), multivariate
    rules to a float.
    """
    rules = _check_rules(rules)
    x = np.asarray(samples, dtype=float)
    out: dict[str, np.ndarray | float] = {}
    if any(is_univariate(r) for r in rules):
        w = wcrps_all(x, y)
        for r in rules:
            if is_univariate(r):
                out[r] = np.atleast_1d(w[r[6:]])
    for r in rules:
        if r == "es":
            out[r] = energy_score(x, y)
        elif r.startswith("vs_"):
            out[r] = variogram_score(x, y, _vs_order(r))
    return out


@dataclass(frozen=True)
class LossMatrix:
    """T x N losses (dates by models), lower is better."""

    dates: tuple
    models: tuple[str, ...]
    losses: np.ndarray

    def __post_init__(self) -> None:
        L = np.array(self.losses, dtype=float)
        if L.ndim != 2:
            raise ValueError("losses must be a 2-d array")
        if L.shape != (len(self.dates), len(self.models)):
            raise ValueError(f"losses shape {L.shape} does not match {len(self.dates)} dates x {len(self.models)} models")
        if not np.all(np.isfinite(L)):
            raise ValueError("losses must be finite")
        if len(set(self.models)) != len(self.models):
            raise ValueError("duplicate model identifiers")
        L.setflags(write=False)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "losses", L)

    @property
    def T(self) -> int:
        return self.losses.shape[0]

    def select(self, models: Sequence[str]) -> LossMatrix:
        idx = [self.models.index(m) for m in models]
        return LossMatrix(self.dates, tuple(models), self.losses[:, idx])

    def take(self, rows) -> LossMatrix:
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return LossMatrix(tuple(self.dates[i] for i in rows), self.models, self.losses[rows])

    def tail(self, k: int) -> LossMatrix:
        return self.take(np.arange(max(0, self.T - k), self.T))

    def mean(self) -> dict[str, float]:
        return dict(zip(self.models, self.losses.mean(axis=0).tolist()))

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date", *self.models])
            for d, row in zip(self.dates, self.losses):
                label = d.isoformat() if hasattr(d, "isoformat") else str(d)
                w.writerow([label, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path: str | Path) -> LossMatrix:
        from .timeseries import load_panel

        panel = load_panel(path)
        if panel.dropped:
            raise ValueError(f"{path}: {panel.dropped} incomplete rows")
        return cls(panel.dates, panel.names, panel.values)


def score_backtest(
    forecasts: Mapping[str, Sequence[np.ndarray]],
    targets: np.ndarray,
    dates: Sequence,
    rules: Sequence[str] = DEFAULT_RULES,
    asset_names: Sequence[str] | None = None,
) -> dict[str, LossMatrix]:
    """
    Score per-date sample forecasts of several models.

    ``forecasts[model][t]`` is an S x n sample matrix for ``dates[t]``.
    Multivariate rules yield one :class:`LossMatrix` keyed by the rule name;
    univariate rules yield one per asset keyed ``"<rule>/<asset>"``.
    """
    rules = _check_rules(rules)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    T = len(dates)
    if targets.shape[0] != T:
        raise ValueError("targets and dates are not aligned")
    models = tuple(forecasts)
    n = targets.shape[1]
    assets = tuple(asset_names) if asset_names is not None else tuple(f"x{i}" for i in range(n))
    cols: dict[str, np.ndarray] = {}
    for k, model in enumerate(models):
        fc = forecasts[model]
        if len(fc) != T:
            raise ValueError(f"model {model!r} has {len(fc)} forecasts for {T} dates")
        for t in range(T):
            if fc[t] is None:
                raise ValueError(f"model {model!r} has no forecast for {dates[t]}")
            day = score_day(fc[t], targets[t], rules)
            for r, v in day.items():
                if is_univariate(r):
                    for i, a in enumerate(assets):
                        cols.setdefault(f"{r}/{a}", np.empty((T, len(models))))[t, k] = v[i]
                else:
                    cols.setdefault(r, np.empty((T, len(models))))[t, k] = v
    return {key: LossMatrix(tuple(dates), models, arr) for key, arr in cols.items()}

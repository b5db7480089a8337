"""
Model Confidence Set with a circular block bootstrap.

The range statistic ``T = max_ij |dbar_ij| / sigma_ij`` is computed over all
ordered pairs of surviving models, with ``sigma_ij^2`` the bootstrap variance of
the mean loss differential. Models are eliminated one at a time (the one with
the largest ``max_j t_ij``); each elimination's p-value is the running maximum
of the bootstrap p-values so far, and the last model standing gets 1.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .scoring import LossMatrix

__all__ = [
    "MCSConfig",
    "MCSResult",
    "ar_lag_tstats",
    "auto_block_length",
    "bootstrap_indices",
    "inclusion_rates",
    "run_mcs",
]


@dataclass(frozen=True)
class MCSConfig:
    alpha: float = 0.25
    reps: int = 1000
    block_length: int | str = "auto"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.reps < 100:
            raise ValueError("need at least 100 bootstrap replications")
        if self.block_length != "auto" and not (isinstance(self.block_length, (int, np.integer)) and self.block_length >= 1):
            raise ValueError("block_length must be 'auto' or a positive integer")


@dataclass(frozen=True)
class MCSResult:
    """
    Outcome of one MCS run.

    ``elimination_order`` lists ``(model, statistic, bootstrap p-value)`` in
    the order models were removed; the final survivor closes the list with
    statistic 0 and p-value 1.
    """

    models: tuple[str, ...]
    p_values: dict[str, float]
    elimination_order: tuple[tuple[str, float, float], ...]
    block_length: int
    alpha: float
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def survivors(self) -> tuple[str, ...]:
        return self.survivors_at(self.alpha)

    def survivors_at(self, alpha: float) -> tuple[str, ...]:
        return tuple(m for m in self.models if self.p_values[m] >= alpha)

    def to_dict(self) -> dict:
        return {
            "models": list(self.models),
            "alpha": self.alpha,
            "block_length": self.block_length,
            "survivors": list(self.survivors),
            "p_values": self.p_values,
            "elimination_order": [
                {"model": m, "statistic": s, "p_value": p} for m, s, p in self.elimination_order
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def ar_lag_tstats(d, p: int) -> np.ndarray:
    """OLS t-statistics of the lag coefficients of an AR(p) with intercept."""
    d = np.asarray(d, dtype=float)
    T = d.size
    if T <= 2 * p + 1:
        raise ValueError("series too short for the requested AR order")
    y = d[p:]
    X = np.column_stack([np.ones(T - p)] + [d[p - k : T - k] for k in range(1, p + 1)])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = X.shape[0] - X.shape[1]
    s2 = resid @ resid / dof
    xtx = X.T @ X
    if s2 <= 1e-300 or np.linalg.cond(xtx) > 1e12:
        return np.zeros(p)
    se = np.sqrt(s2 * np.diag(np.linalg.inv(xtx))[1:])
    return beta[1:] / se


def auto_block_length(d) -> int:
    """
    Block length from autoregressions on loss differentials.

    For each series, AR(p) models are fitted for ``p = 1, 2, ...`` up to
    ``floor(T^(1/3))`` and ``p`` keeps growing while the highest lag is
    significant at 5% (|t| > 1.96). The block length is the largest such ``p``
    over all series, at least 1. ``d`` may be a vector or a T x K matrix.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    T = d.shape[0]
    pmax = max(1, int(np.floor(T ** (1.0 / 3.0) + 1e-9)))
    best = 1
    for col in d.T:
        if np.ptp(col) == 0:
            continue
        for p in range(1, pmax + 1):
            if abs(ar_lag_tstats(col, p)[-1]) > 1.96:
                best = max(best, p)
            else:
                break
    return best


def bootstrap_indices(T: int, block: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Circular block bootstrap row indices, shape (reps, T)."""
    block = min(max(1, int(block)), T)
    nb = -(-T // block)
    starts = rng.integers(0, T, size=(reps, nb))
    idx = (starts[:, :, None] + np.arange(block)) % T
    return idx.reshape(reps, -1)[:, :T]


def _pairwise_differentials(L: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(L.shape[1], k=1)
    return L[:, i] - L[:, j]


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(num, den).shape)
    pos = den > 0
    np.divide(num, den, out=out, where=pos)
    return np.where(~pos & (num != 0), np.copysign(np.inf, num), out)


def run_mcs(losses: LossMatrix | np.ndarray, config: MCSConfig | None = None, models: Sequence[str] | None = None) -> MCSResult:
    """
    Model Confidence Set over the columns of a loss matrix.

    The full elimination sequence is computed, so the result answers for any
    level through :meth:`MCSResult.survivors_at`; ``config.alpha`` sets the
    default survivor set.

    Raises
    ------
    ValueError
        With fewer than 2 models or 50 dates.
    """
    config = config or MCSConfig()
    if isinstance(losses, LossMatrix):
        L = losses.losses
        names = losses.models
    else:
        L = np.asarray(losses, dtype=float)
        names = tuple(models) if models is not None else tuple(f"m{i}" for i in range(L.shape[1]))
    T, N = L.shape
    if N < 2:
        raise ValueError("MCS needs at least two models")
    if T < 50:
        raise ValueError(f"MCS needs at least 50 dates, got {T}")
    if len(names) != N:
        raise ValueError("model names do not match the loss columns")

    if config.block_length == "auto":
        block = auto_block_length(_pairwise_differentials(L))
    else:
        block = min(int(config.block_length), T)
    rng = np.random.default_rng(config.seed)
    idx = bootstrap_indices(T, block, config.reps, rng)
    counts = np.zeros((config.reps, T))
    np.add.at(counts, (np.arange(config.reps)[:, None], idx), 1.0)
    boot_means = counts @ L / T
    means = L.mean(axis=0)

    alive = list(range(N))
    order: list[tuple[str, float, float]] = []
    p_values: dict[str, float] = {}
    running = 0.0
    while len(alive) > 1:
        a = np.array(alive)
        dbar = means[a][:, None] - means[a][None, :]
        dstar = boot_means[:, a][:, :, None] - boot_means[:, a][:, None, :]
        centred = dstar - dbar
        sigma = np.sqrt(np.mean(centred**2, axis=0))
        t = _safe_ratio(dbar, sigma)
        stat = float(np.max(np.abs(t)))
        tstar = np.max(np.abs(_safe_ratio(centred, sigma)).reshape(config.reps, -1), axis=1)
        p = float(np.mean(tstar >= stat)) if np.isfinite(stat) else 0.0
        running = max(running, p)
        worst = alive[int(np.argmax(np.max(t, axis=1)))]
        p_values[names[worst]] = running
        order.append((names[worst], stat, p))
        alive.remove(worst)
    p_values[names[alive[0]]] = 1.0
    order.append((names[alive[0]], 0.0, 1.0))
    return MCSResult(
        models=tuple(names),
        p_values={m: p_values[m] for m in names},
        elimination_order=tuple(order),
        block_length=block,
        alpha=config.alpha,
    )


def inclusion_rates(
    results: Iterable[MCSResult],
    models: Sequence[str] | None = None,
    alpha: float | None = None,
) -> dict[str, float]:
    """
    Share of result sets whose MCS contains each model.

    ``alpha`` overrides each result's own level; models absent from a result's
    roster count as not included.
    """
    results = list(results)
    if not results:
        raise ValueError("need at least one MCS result")
    if models is None:
        seen: dict[str, None] = {}
        for r in results:
            seen.update(dict.fromkeys(r.models))
        models = list(seen)
    counts = dict.fromkeys(models, 0)
    for r in results:
        surv = set(r.survivors if alpha is None else r.survivors_at(alpha))
        for m in models:
            counts[m] += m in surv
    return {m: counts[m] / len(results) for m in models}

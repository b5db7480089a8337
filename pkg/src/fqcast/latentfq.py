"""
Latent-factor quantile marginals.

Two variants build one-day-ahead marginals from principal components of a
calibration window:

* **FQ-AL** regresses each demeaned variable on the *last* ``n - m``
  components and uses the fitted intercepts as quantile nodes.
* **FQ-AB** regresses on the *first* ``m`` components, treats the estimated
  node vector as Gaussian with covariance driven by the slopes and component
  variances, and bags PCHIP marginals built from draws of that law.

Both condition on ``x* = 0``, the unconditional component mean. An exogenous
factor mode is available for user-supplied regressors.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .distbuild import BaggedMarginal, MarginalDistribution, build, pchip_inverse_batch
from .qreg import QuantileFitSet, QuantilePartition, Q9, fit_partition, predict_nodes, rearrange
from .timeseries import Panel, demean

__all__ = [
    "AsymptoticQuantileLaw",
    "FactorBasis",
    "asymptotic_law",
    "exogenous_fq_marginals",
    "fq_ab_marginals",
    "fq_al_marginals",
    "fq_al_nodes",
    "pca",
    "psd_repair",
    "select_m",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FactorBasis:
    """
    Spectral decomposition of a window's sample covariance.

    Attributes
    ----------
    eigenvectors : ndarray, shape (n, n)
        Orthogonal ``W``, columns sorted by descending eigenvalue.
    eigenvalues : ndarray, shape (n,)
        Descending, nonnegative.
    means : ndarray, shape (n,)
        Column means removed before the decomposition.
    """

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    means: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def variance_explained(self) -> np.ndarray:
        lam = self.eigenvalues
        return np.cumsum(lam) / lam.sum()

    def components(self, centered: np.ndarray) -> np.ndarray:
        """Scores ``p_t = W' y_t`` for each (demeaned) row."""
        return np.asarray(centered, dtype=float) @ self.eigenvectors

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        return np.asarray(scores, dtype=float) @ self.eigenvectors.T


@dataclass(frozen=True)
class AsymptoticQuantileLaw:
    """Gaussian law of one variable's estimated node vector."""

    mean: np.ndarray
    cov: np.ndarray
    repaired: bool = False

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """``size`` node vectors, shape (size, q)."""
        w, v = np.linalg.eigh(self.cov)
        root = v * np.sqrt(np.clip(w, 0.0, None))
        z = rng.standard_normal((size, self.mean.size))
        return self.mean + z @ root.T


def pca(window: Panel | np.ndarray) -> FactorBasis:
    """
    Principal components of a calibration window.

    Eigenvectors are ordered by descending eigenvalue with ties kept in
    original column order, and each is signed so its largest-magnitude entry
    is positive.

    Raises
    ------
    ValueError
        If ``T < n`` or any column has zero variance.
    """
    values = window.values if isinstance(window, Panel) else np.asarray(window, dtype=float)
    t, n = values.shape
    if t < n:
        raise ValueError(f"need T >= n for a covariance decomposition (T={t}, n={n})")
    if not np.all(np.isfinite(values)):
        raise ValueError("window contains non-finite values")
    means = values.mean(axis=0)
    centered = values - means
    cov = np.atleast_2d(np.cov(centered, rowvar=False))
    flat = np.flatnonzero(np.diag(cov) <= 0)
    if flat.size:
        raise ValueError(f"degenerate covariance: column {int(flat[0])} has zero variance")
    lam, w = np.linalg.eigh(cov)
    order = np.argsort(-lam, kind="stable")
    lam = np.clip(lam[order], 0.0, None)
    w = w[:, order]
    pivot = np.argmax(np.abs(w), axis=0)
    signs = np.sign(w[pivot, np.arange(n)])
    w = w * np.where(signs == 0, 1.0, signs)
    for a in (w, lam, means):
        a.setflags(write=False)
    return FactorBasis(w, lam, means)


def select_m(basis: FactorBasis, threshold: float) -> int:
    """Smallest ``m`` whose cumulative variance share reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    cum = basis.variance_explained
    return int(np.argmax(cum >= threshold - 1e-12) + 1)


def psd_repair(cov: np.ndarray) -> tuple[np.ndarray, bool]:
    """Symmetrise and clip negative eigenvalues at zero."""
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    if w.min(initial=0.0) >= 0:
        return cov, False
    return (v * np.clip(w, 0.0, None)) @ v.T, True


def _window_parts(window: Panel):
    centered, means = demean(window)
    basis = pca(centered)
    scores = basis.components(centered.values)
    return centered, means, basis, scores


def fq_al_nodes(window: Panel, m: int, taus: QuantilePartition | Sequence[float] = Q9) -> np.ndarray:
    """Rearranged, location-restored node values, shape (n, q)."""
    if not 1 <= m < window.n:
        raise ValueError(f"FQ-AL needs 1 <= m < n (m={m}, n={window.n})")
    centered, means, _, scores = _window_parts(window)
    fit = fit_partition(scores[:, m:], centered.values, taus, names=window.names)
    return np.sort(fit.intercepts, axis=1) + means[:, None]


def fq_al_marginals(
    window: Panel,
    m: int,
    taus: QuantilePartition | Sequence[float] = Q9,
    method: str = "pchip",
) -> list[MarginalDistribution]:
    """
    FQ-AL marginals: intercepts of regressions on the last ``n - m`` components.

    Each demeaned variable is regressed on components ``m+1..n``; the intercept
    at every level (the prediction at ``x* = 0``) is a node. Nodes are
    rearranged, shifted back by the window mean and interpolated.
    """
    nodes = fq_al_nodes(window, m, taus)
    t = taus.array if isinstance(taus, QuantilePartition) else np.asarray(taus, dtype=float)
    return [build(t, row, method) for row in nodes]


def asymptotic_law(
    fitset: QuantileFitSet,
    basis: FactorBasis,
    m: int,
    x_star=None,
    scale: float = 1.0,
) -> list[AsymptoticQuantileLaw]:
    """
    Gaussian law of each variable's node vector.

    The covariance between levels ``i`` and ``j`` for variable ``k`` is
    ``b_k(tau_i) diag(lambda_1..lambda_m) b_k(tau_j)'`` times ``scale``; pass
    ``scale=1/T`` for the sampling-scale version. Non-PSD estimates are
    repaired by eigenvalue clipping.
    """
    if fitset.m != m:
        raise ValueError(f"fit set has {fitset.m} regressors, expected m={m}")
    if m > basis.n:
        raise ValueError(f"m={m} exceeds the basis dimension {basis.n}")
    x = np.zeros(m) if x_star is None else np.asarray(x_star, dtype=float)
    means = predict_nodes(fitset, x)
    lam = basis.eigenvalues[:m]
    laws = []
    for k in range(fitset.n):
        b = fitset.coefficients[k]
        cov = scale * (b * lam) @ b.T
        cov, repaired = psd_repair(cov)
        if repaired:
            log.info("PSD repair applied to node covariance of variable %d", k)
        laws.append(AsymptoticQuantileLaw(means[k], cov, repaired))
    return laws


def fq_ab_marginals(
    window: Panel,
    m: int,
    taus: QuantilePartition | Sequence[float] = Q9,
    N: int = 1000,
    B: int = 50,
    rng: np.random.Generator | None = None,
    omega_scale: float = 1.0,
    per_T: bool = False,
) -> list[BaggedMarginal]:
    """
    FQ-AB marginals by asymptotic bagging over the first ``m`` components.

    For each variable, ``B`` node vectors are drawn from its
    :class:`AsymptoticQuantileLaw`, rearranged and interpolated by PCHIP;
    ``N`` values are sampled from each and the ``N*B`` pooled values, shifted
    by the window mean, form an empirical marginal. The component PCHIP
    distributions are kept so the bagged density is their average.

    Parameters
    ----------
    omega_scale : float
        Multiplier on the node covariance; 0 removes estimation noise.
    per_T : bool
        Additionally divide the covariance by the window length.
    """
    if not 1 <= m <= window.n:
        raise ValueError(f"FQ-AB needs 1 <= m <= n (m={m}, n={window.n})")
    if N < 1 or B < 1:
        raise ValueError("N and B must be positive")
    rng = np.random.default_rng() if rng is None else rng
    t = taus.array if isinstance(taus, QuantilePartition) else np.asarray(taus, dtype=float)
    centered, means, basis, scores = _window_parts(window)
    fit = fit_partition(scores[:, :m], centered.values, t, names=window.names)
    scale = omega_scale / window.T if per_T else omega_scale
    laws = asymptotic_law(fit, basis, m, scale=scale)
    out = []
    for k, law in enumerate(laws):
        draws = np.sort(law.draw(B, rng), axis=1) + means[k]
        pooled = pchip_inverse_batch(t, draws, rng.random((B, N))).ravel()
        out.append(BaggedMarginal(pooled, t, draws))
    return out


def exogenous_fq_marginals(
    Y: Panel,
    X: Panel,
    taus: QuantilePartition | Sequence[float] = Q9,
    x_star=None,
    method: str = "pchip",
) -> list[MarginalDistribution]:
    """
    Marginals from quantile regressions on user-supplied factors.

    ``Y`` and ``X`` must share dates. Nodes are ``alpha + B x*`` per level,
    rearranged before interpolation.
    """
    if tuple(Y.dates) != tuple(X.dates):
        raise ValueError("factor panel is not aligned with the response panel")
    t = taus.array if isinstance(taus, QuantilePartition) else np.asarray(taus, dtype=float)
    fit = fit_partition(X.values, Y.values, t, names=Y.names)
    x = np.zeros(X.n) if x_star is None else np.asarray(x_star, dtype=float)
    nodes = predict_nodes(fit, x)
    return [build(t, rearrange(row), method) for row in nodes]

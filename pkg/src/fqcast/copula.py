"""
Copulas and Sklar composition.

Gaussian copulas work in any dimension. Gumbel and Clayton are bivariate and
sampled through their Marshall-Olkin frailty representation. Joint forecasts
are materialised as Monte Carlo sample matrices.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .distbuild import MarginalDistribution
from .timeseries import Panel

__all__ = [
    "CopulaSpec",
    "JointForecast",
    "compose",
    "fit_archimedean",
    "fit_gaussian_copula",
    "gaussian_spearman",
    "kendall_tau",
    "repair_correlation",
    "sample_copula",
    "theta_from_tau",
]

FAMILIES = ("gaussian", "gumbel", "clayton")


def repair_correlation(R: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and rescale to a unit diagonal."""
    R = 0.5 * (np.asarray(R, dtype=float) + np.asarray(R, dtype=float).T)
    w, v = np.linalg.eigh(R)
    if w.min() < 0:
        R = (v * np.clip(w, 0.0, None)) @ v.T
        d = np.sqrt(np.clip(np.diag(R), 1e-300, None))
        R = R / np.outer(d, d)
    np.fill_diagonal(R, 1.0)
    return R


def _psd_cholesky(R: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Lower factor of a PSD matrix; zero pivots give zero columns."""
    n = R.shape[0]
    L = np.zeros_like(R)
    for j in range(n):
        d = R[j, j] - L[j, :j] @ L[j, :j]
        if d < -1e-8:
            raise ValueError("correlation matrix is not positive semidefinite")
        if d <= tol:
            continue
        L[j, j] = np.sqrt(d)
        L[j + 1 :, j] = (R[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class CopulaSpec:
    """
    Copula family and parameters.

    Parameters
    ----------
    family : {'gaussian', 'gumbel', 'clayton'}
    R : ndarray, optional
        Correlation matrix of a Gaussian copula.
    theta : float, optional
        Archimedean parameter (Gumbel ``theta >= 1``, Clayton ``theta > 0``).
    """

    family: str
    R: np.ndarray | None = None
    theta: float | None = None
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown copula family {self.family!r}")
        if self.family == "gaussian":
            if self.R is None:
                raise ValueError("a Gaussian copula needs a correlation matrix")
            R = np.atleast_2d(np.array(self.R, dtype=float))
            if R.shape[0] != R.shape[1]:
                raise ValueError("correlation matrix must be square")
            if not np.allclose(R, R.T, atol=1e-12):
                raise ValueError("correlation matrix must be symmetric")
            if not np.allclose(np.diag(R), 1.0, atol=1e-12):
                raise ValueError("correlation matrix must have a unit diagonal")
            L = _psd_cholesky(R)
            R.setflags(write=False)
            L.setflags(write=False)
            object.__setattr__(self, "R", R)
            object.__setattr__(self, "_chol", L)
        else:
            _check_theta(self.family, self.theta)

    @property
    def dim(self) -> int:
        return self.R.shape[0] if self.family == "gaussian" else 2

    @classmethod
    def gaussian(cls, R) -> CopulaSpec:
        return cls("gaussian", R=R)

    @classmethod
    def independence(cls, n: int) -> CopulaSpec:
        return cls("gaussian", R=np.eye(n))

    def to_dict(self) -> dict:
        if self.family == "gaussian":
            return {"family": "gaussian", "R": self.R.tolist()}
        return {"family": self.family, "theta": self.theta}


def _check_theta(family: str, theta) -> None:
    if theta is None or not np.isfinite(theta):
        raise ValueError(f"{family} copula needs a finite theta")
    if family == "gumbel" and theta < 1:
        raise ValueError(f"Gumbel theta must be >= 1, got {theta}")
    if family == "clayton" and theta <= 0:
        raise ValueError(f"Clayton theta must be > 0, got {theta}")


def fit_gaussian_copula(window: Panel | np.ndarray) -> CopulaSpec:
    """
    Gaussian copula with correlation of normal scores ``Phi^-1(rank / (T+1))``.

    Raises
    ------
    ValueError
        If ``T < n + 2`` or a column is constant.
    """
    x = window.values if isinstance(window, Panel) else np.asarray(window, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    t, n = x.shape
    if t < n + 2:
        raise ValueError(f"need T >= n + 2 observations (T={t}, n={n})")
    if np.any(np.ptp(x, axis=0) == 0):
        raise ValueError(f"constant column {int(np.argmax(np.ptp(x, axis=0) == 0))}")
    if n == 1:
        return CopulaSpec.gaussian(np.eye(1))
    scores = stats.norm.ppf(stats.rankdata(x, axis=0) / (t + 1))
    R = np.corrcoef(scores, rowvar=False)
    return CopulaSpec.gaussian(repair_correlation(R))


def _positive_stable(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws with Laplace transform ``exp(-s**alpha)`` (Kanter's representation)."""
    if alpha == 1.0:
        return np.ones(size)
    u = rng.uniform(0.0, np.pi, size)
    w = rng.exponential(1.0, size)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return a * b


def sample_copula(spec: CopulaSpec, S: int, rng: np.random.Generator) -> np.ndarray:
    """
    ``S`` draws from the copula, shape (S, dim), values in [0, 1].

    Gaussian: ``Phi(L z)`` with ``L`` a PSD-tolerant Cholesky factor.
    Gumbel: frailty ``V`` positive stable of index ``1/theta`` and
    ``u = exp(-(E / V) ** (1/theta))``. Clayton: ``V ~ Gamma(1/theta)`` and
    ``u = (1 + E / V) ** (-1/theta)``.
    """
    if S < 1:
        raise ValueError("sample count must be positive")
    if spec.family == "gaussian":
        z = rng.standard_normal((S, spec.dim)) @ spec._chol.T
        return stats.norm.cdf(z)
    e = rng.exponential(1.0, (S, 2))
    theta = float(spec.theta)
    if spec.family == "gumbel":
        v = _positive_stable(1.0 / theta, S, rng)
        return np.exp(-((e / v[:, None]) ** (1.0 / theta)))
    v = rng.gamma(1.0 / theta, 1.0, S)
    return (1.0 + e / v[:, None]) ** (-1.0 / theta)


def kendall_tau(family: str, theta: float) -> float:
    """Population Kendall tau: ``1 - 1/theta`` (Gumbel), ``theta / (theta + 2)`` (Clayton)."""
    if family not in ("gumbel", "clayton"):
        raise ValueError(f"closed form available for gumbel and clayton, not {family!r}")
    _check_theta(family, theta)
    return 1.0 - 1.0 / theta if family == "gumbel" else theta / (theta + 2.0)


def theta_from_tau(family: str, tau: float) -> float:
    if not 0 <= tau < 1:
        raise ValueError("tau must lie in [0, 1)")
    if family == "gumbel":
        return 1.0 / (1.0 - tau)
    if family == "clayton":
        if tau == 0:
            raise ValueError("Clayton needs tau > 0")
        return 2.0 * tau / (1.0 - tau)
    raise ValueError(f"unknown Archimedean family {family!r}")


def gaussian_spearman(rho: float) -> float:
    """Spearman rank correlation of a bivariate Gaussian copula."""
    return 6.0 / np.pi * np.arcsin(rho / 2.0)


def _log_density(family: str, theta: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if family == "clayton":
        s = u ** (-theta) + v ** (-theta) - 1.0
        return (
            np.log1p(theta)
            - (theta + 1.0) * (np.log(u) + np.log(v))
            - (2.0 + 1.0 / theta) * np.log(s)
        )
    # Gumbel
    x, y = -np.log(u), -np.log(v)
    a = (x**theta + y**theta) ** (1.0 / theta)
    return (
        -a
        + (theta - 1.0) * (np.log(x) + np.log(y))
        - np.log(u * v)
        + (1.0 / theta - 2.0) * np.log(x**theta + y**theta)
        + np.log(a + theta - 1.0)
    )


def fit_archimedean(
    data: np.ndarray, family: str, grid: Sequence[float] | None = None
) -> CopulaSpec:
    """
    Grid-search pseudo-likelihood fit of a bivariate Archimedean copula.

    ``data`` is a T x 2 array; pseudo-observations are ``rank / (T+1)``.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("Archimedean fits are bivariate: expected a T x 2 array")
    u = stats.rankdata(x, axis=0) / (x.shape[0] + 1)
    if grid is None:
        grid = 1.0 + np.linspace(0.0, 9.0, 901) if family == "gumbel" else np.linspace(0.01, 10.0, 1000)
    ll = [np.sum(_log_density(family, th, u[:, 0], u[:, 1])) for th in grid]
    return CopulaSpec(family, theta=float(np.asarray(grid)[int(np.nanargmax(ll))]))


@dataclass(frozen=True)
class JointForecast:
    """Marginals coupled by a copula, materialised as an S x n sample matrix."""

    marginals: tuple[MarginalDistribution, ...]
    copula: CopulaSpec
    samples: np.ndarray

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]

    def to_csv(self, path: str | Path, names: Sequence[str] | None = None) -> None:
        names = names or [f"x{i}" for i in range(self.samples.shape[1])]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            w.writerows(self.samples.tolist())


def compose(
    marginals: Sequence[MarginalDistribution],
    spec: CopulaSpec,
    S: int,
    rng: np.random.Generator,
) -> JointForecast:
    """Sklar composition: column ``i`` is ``inverse_cdf_i`` of copula column ``i``."""
    marginals = tuple(marginals)
    if len(marginals) != spec.dim:
        raise ValueError(f"{len(marginals)} marginals for a {spec.dim}-dimensional copula")
    u = sample_copula(spec, S, rng)
    x = np.column_stack([m.inverse_cdf(u[:, i]) for i, m in enumerate(marginals)])
    x.setflags(write=False)
    return JointForecast(marginals, spec, x)

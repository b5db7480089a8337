"""
Benchmark forecasters.

* EDF: empirical marginals of the calibration window joined by a Gaussian
  copula with the window's rank correlation.
* EGARCH(1,1) with standardized Student-t innovations per column, joined by a
  constant (CCC) or dynamic (DCC(1,1)) conditional correlation.

The log-variance recursion is

    log s2[t] = kappa + gamma * log s2[t-1] + alpha * (|z[t-1]| - E|z|) + xi * z[t-1]

with ``z`` unit-variance Student-t and ``log s2[0]`` the log sample variance.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import astuple, dataclass, field

import numba
import numpy as np
from scipy import optimize, special, stats

from .copula import CopulaSpec, JointForecast, compose, fit_gaussian_copula, repair_correlation
from .distbuild import EmpiricalMarginal, MarginalDistribution
from .timeseries import Panel

__all__ = [
    "CorrelationModel",
    "EgarchFit",
    "EgarchFitError",
    "EgarchParams",
    "GarchForecaster",
    "MiscalibrationGuard",
    "ScaledT",
    "ccc_dcc_joint_forecast",
    "dcc_fit",
    "edf_joint_forecast",
    "edf_marginals",
    "egarch_fit",
    "egarch_loglik",
    "expected_abs_t",
    "fit_garch_model",
    "simulate_egarch",
]

log = logging.getLogger(__name__)

NU_MIN, NU_MAX = 2.01, 500.0


# ---------------------------------------------------------------- EDF


def edf_marginals(window: Panel) -> list[EmpiricalMarginal]:
    """Empirical distribution of each window column."""
    if window.T < 10:
        raise ValueError(f"EDF marginals need at least 10 observations, got {window.T}")
    return [EmpiricalMarginal(window.values[:, j]) for j in range(window.n)]


def edf_joint_forecast(window: Panel, S: int, rng: np.random.Generator) -> JointForecast:
    return compose(edf_marginals(window), fit_gaussian_copula(window), S, rng)


# ---------------------------------------------------------------- EGARCH


@dataclass(frozen=True)
class EgarchParams:
    mu: float
    kappa: float
    gamma: float
    alpha: float
    xi: float
    nu: float

    def __post_init__(self) -> None:
        if not abs(self.gamma) < 1:
            raise ValueError(f"|gamma| must be < 1, got {self.gamma}")
        if not self.nu > 2:
            raise ValueError(f"nu must exceed 2, got {self.nu}")

    def vector(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


class EgarchFitError(RuntimeError):
    """Optimisation failed; ``params`` holds the last iterate when available."""

    def __init__(self, message: str, params: EgarchParams | None = None) -> None:
        super().__init__(message)
        self.params = params


def expected_abs_t(nu: float) -> float:
    """``E|z|`` for a unit-variance Student-t with ``nu`` degrees of freedom."""
    return (
        2.0
        * math.sqrt(nu - 2.0)
        * math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2))
        / (math.sqrt(math.pi) * (nu - 1.0))
    )


@numba.njit(cache=True)
def _egarch_filter(y, mu, kappa, gamma, alpha, xi, nu, eabs, h0):  # pragma: no cover - compiled
    T = y.size
    h = np.empty(T + 1)
    z = np.empty(T)
    h[0] = h0
    const = (
        math.lgamma((nu + 1.0) / 2.0)
        - math.lgamma(nu / 2.0)
        - 0.5 * math.log(math.pi * (nu - 2.0))
    )
    ll = 0.0
    bad = -1
    for t in range(T):
        s = math.exp(0.5 * h[t])
        if not (s > 0.0 and math.isfinite(s)):  # variance under/overflow
            h[t + 1 :] = np.nan
            z[t:] = np.nan
            return -math.inf, h, z, t
        z[t] = (y[t] - mu) / s
        ll += const - 0.5 * h[t] - 0.5 * (nu + 1.0) * math.log1p(z[t] * z[t] / (nu - 2.0))
        h[t + 1] = kappa + gamma * h[t] + alpha * (abs(z[t]) - eabs) + xi * z[t]
        if bad < 0 and not (math.isfinite(ll) and math.isfinite(h[t + 1])):
            bad = t
    return ll, h, z, bad


def _filter(params: EgarchParams, y: np.ndarray):
    y = np.ascontiguousarray(y, dtype=float)
    var = y.var()
    if not var > 0:
        raise ValueError("series has zero variance")
    p = params
    return _egarch_filter(y, p.mu, p.kappa, p.gamma, p.alpha, p.xi, p.nu, expected_abs_t(p.nu), math.log(var))


def egarch_loglik(params: EgarchParams, y) -> float:
    """
    Student-t log-likelihood of ``y`` under the EGARCH(1,1) recursion.

    Raises
    ------
    FloatingPointError
        If the recursion produces a non-finite value; the message names the
        first offending observation.
    """
    ll, _, _, bad = _filter(params, np.asarray(y, dtype=float))
    if bad >= 0:
        raise FloatingPointError(f"EGARCH recursion became non-finite at t={bad}")
    return float(ll)


@dataclass(frozen=True)
class EgarchFit:
    """Fitted EGARCH model with its in-sample filter output."""

    params: EgarchParams
    loglik: float
    converged: bool
    log_variance: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    @property
    def next_log_variance(self) -> float:
        """One-step-ahead ``log s2[T+1]``."""
        return float(self.log_variance[-1])

    @property
    def next_sigma(self) -> float:
        return math.exp(0.5 * self.next_log_variance)


def _sigmoid(x):
    return 0.5 * (1.0 + math.tanh(0.5 * x))


def _logit(p):
    return math.log(p / (1.0 - p))


def _to_params(theta: np.ndarray) -> EgarchParams:
    mu, kappa, g, alpha, xi, v = theta
    gamma = 2.0 * _sigmoid(g) - 1.0
    gamma = min(max(gamma, -1 + 1e-12), 1 - 1e-12)
    nu = NU_MIN + (NU_MAX - NU_MIN) * _sigmoid(v)
    return EgarchParams(float(mu), float(kappa), float(gamma), float(alpha), float(xi), float(nu))


def _from_params(p: EgarchParams) -> np.ndarray:
    g = min(max((p.gamma + 1) / 2, 1e-9), 1 - 1e-9)
    v = min(max((p.nu - NU_MIN) / (NU_MAX - NU_MIN), 1e-9), 1 - 1e-9)
    return np.array([p.mu, p.kappa, _logit(g), p.alpha, p.xi, _logit(v)])


def default_starts(y: np.ndarray) -> list[EgarchParams]:
    """Three starting points: persistent/heavy, moderate, near-Gaussian."""
    mean, lv = float(np.mean(y)), math.log(float(np.var(y)))
    specs = [(0.95, 0.10, -0.05, 8.0), (0.90, 0.20, 0.0, 5.0), (0.98, 0.05, -0.10, 20.0)]
    return [EgarchParams(mean, (1 - g) * lv, g, a, x, n) for g, a, x, n in specs]


def egarch_fit(
    y,
    starts: Sequence[EgarchParams] | None = None,
    maxiter: int = 4000,
    tol: float = 1e-7,
) -> EgarchFit:
    """
    Maximum-likelihood EGARCH(1,1)-t by Nelder-Mead over transformed parameters.

    ``gamma`` is mapped through ``2*sigmoid - 1`` and ``nu`` through a scaled
    sigmoid onto ``(2.01, 500)``. Every starting point is run and the best
    likelihood wins; ``converged`` is False if that run hit ``maxiter``.

    Raises
    ------
    ValueError
        For a constant or too-short series.
    EgarchFitError
        If no start yields a finite likelihood.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if y.size < 50:
        raise ValueError(f"EGARCH fit needs a longer series (T={y.size})")
    if not y.var() > 0:
        raise ValueError("series has zero variance")
    lv0 = math.log(float(y.var()))
    starts = default_starts(y) if starts is None else list(starts)

    def objective(theta):
        try:
            p = _to_params(theta)
        except ValueError:
            return 1e300
        ll, _, _, bad = _egarch_filter(y, p.mu, p.kappa, p.gamma, p.alpha, p.xi, p.nu, expected_abs_t(p.nu), lv0)
        return -ll if bad < 0 else 1e300

    best = None
    for start in starts:
        res = optimize.minimize(
            objective,
            _from_params(start),
            method="Nelder-Mead",
            options={"maxiter": maxiter, "maxfev": 2 * maxiter, "xatol": tol, "fatol": tol, "adaptive": True},
        )
        if np.isfinite(res.fun) and res.fun < 1e300 and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise EgarchFitError("no starting point produced a finite likelihood", starts[0] if starts else None)
    params = _to_params(best.x)
    ll, h, z, _ = _filter(params, y)
    if not best.success:
        log.warning("EGARCH optimiser stopped without convergence: %s", best.message)
    return EgarchFit(params, float(ll), bool(best.success), h, z)


def simulate_egarch(params: EgarchParams, T: int, rng: np.random.Generator, burn: int = 500) -> np.ndarray:
    """Simulate ``T`` observations from the recursion after ``burn`` warm-up steps."""
    p = params
    eabs = expected_abs_t(p.nu)
    z = rng.standard_t(p.nu, T + burn) * math.sqrt((p.nu - 2.0) / p.nu)
    h = p.kappa / (1.0 - p.gamma)
    out = np.empty(T + burn)
    for t in range(T + burn):
        out[t] = p.mu + math.exp(0.5 * h) * z[t]
        h = p.kappa + p.gamma * h + p.alpha * (abs(z[t]) - eabs) + p.xi * z[t]
    return out[burn:]


def news_impact(params: EgarchParams, log_variance: float, shock: float) -> float:
    """Next-period volatility after a standardized shock from a fixed state."""
    p = params
    h = p.kappa + p.gamma * log_variance + p.alpha * (abs(shock) - expected_abs_t(p.nu)) + p.xi * shock
    return math.exp(0.5 * h)


class ScaledT(MarginalDistribution):
    """``mu + sigma * z`` with ``z`` unit-variance Student-t."""

    method = "scaled_t"

    def __init__(self, mu: float, sigma: float, nu: float) -> None:
        self.mu, self.sigma, self.nu = float(mu), float(sigma), float(nu)
        self._scale = self.sigma * math.sqrt((self.nu - 2.0) / self.nu)
        self._dist = stats.t(self.nu, loc=self.mu, scale=self._scale)
        q = np.array([0.001, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.999])
        self.taus = q
        self.values = self._dist.ppf(q)
        self.support = (-math.inf, math.inf)

    def cdf(self, x):
        return self._dist.cdf(x)

    def inverse_cdf(self, u):
        return self._dist.ppf(np.clip(u, 1e-300, 1 - 1e-16))

    def pdf(self, x):
        return self._dist.pdf(x)

    def shifted(self, c: float) -> MarginalDistribution:
        return ScaledT(self.mu + c, self.sigma, self.nu)

    def to_dict(self) -> dict:
        return {"method": self.method, "mu": self.mu, "sigma": self.sigma, "nu": self.nu}


# ---------------------------------------------------------------- correlation


@numba.njit(cache=True)
def _dcc_q(z, a, b, qbar):  # pragma: no cover - compiled
    T, n = z.shape
    Q = np.empty((T + 1, n, n))
    Q[0] = qbar
    for t in range(T):
        for i in range(n):
            for j in range(n):
                Q[t + 1, i, j] = (1.0 - a - b) * qbar[i, j] + a * z[t, i] * z[t, j] + b * Q[t, i, j]
    return Q


def _q_to_r(Q: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.einsum("...ii->...i", Q))
    return Q / (d[..., :, None] * d[..., None, :])


def _dcc_negloglik(ab, z, qbar) -> float:
    a, b = ab
    R = _q_to_r(_dcc_q(z, a, b, qbar)[:-1])
    sign, logdet = np.linalg.slogdet(R)
    if np.any(sign <= 0):
        return 1e300
    quad = np.einsum("ti,ti->t", z, np.linalg.solve(R, z[:, :, None])[:, :, 0])
    return 0.5 * float(np.sum(logdet + quad - np.einsum("ti,ti->t", z, z)))


@dataclass(frozen=True)
class CorrelationModel:
    """
    Conditional correlation layer.

    ``kind='ccc'`` uses the constant ``qbar``; ``kind='dcc'`` runs
    ``Q[t] = (1-a-b) qbar + a z z' + b Q[t-1]`` from ``Q[0] = qbar``.
    """

    kind: str
    qbar: np.ndarray
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("ccc", "dcc"):
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        if self.a < 0 or self.b < 0 or self.a + self.b >= 1:
            raise ValueError(f"need a, b >= 0 and a + b < 1 (a={self.a}, b={self.b})")

    def forecast(self, z: np.ndarray) -> np.ndarray:
        """Correlation for the period after the last residual row."""
        if self.kind == "ccc":
            return self.qbar.copy()
        Q = _dcc_q(np.ascontiguousarray(z, dtype=float), self.a, self.b, self.qbar)
        return repair_correlation(_q_to_r(Q[-1]))


def dcc_fit(z: np.ndarray) -> CorrelationModel:
    """Second-stage DCC(1,1) estimate of ``(a, b)`` on standardized residuals."""
    z = np.ascontiguousarray(z, dtype=float)
    qbar = repair_correlation(np.corrcoef(z, rowvar=False))

    def objective(theta):
        s = _sigmoid(theta[0])
        w = _sigmoid(theta[1])
        return _dcc_negloglik((s * w, s * (1 - w)), z, qbar)

    best = None
    for start in ((_logit(0.95), _logit(0.05)), (_logit(0.5), _logit(0.2))):
        res = optimize.minimize(objective, np.array(start), method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-7})
        if best is None or res.fun < best.fun:
            best = res
    s, w = _sigmoid(best.x[0]), _sigmoid(best.x[1])
    a, b = s * w, s * (1 - w)
    if a + b >= 1:
        b = max(0.0, 1 - 1e-9 - a)
    return CorrelationModel("dcc", qbar, a, b)


@dataclass(frozen=True)
class GarchForecaster:
    """Per-column EGARCH fits plus a correlation layer."""

    fits: tuple[EgarchFit, ...]
    correlation: CorrelationModel

    def vector(self) -> np.ndarray:
        """Flattened parameters for the mis-calibration guard."""
        parts = [f.params.vector() for f in self.fits]
        parts.append(np.array([self.correlation.a, self.correlation.b]))
        return np.concatenate(parts)

    @property
    def residuals(self) -> np.ndarray:
        return np.column_stack([f.residuals for f in self.fits])

    def marginals(self) -> list[ScaledT]:
        return [ScaledT(f.params.mu, f.next_sigma, f.params.nu) for f in self.fits]

    def joint_forecast(self, S: int, rng: np.random.Generator) -> JointForecast:
        R = self.correlation.forecast(self.residuals)
        return compose(self.marginals(), CopulaSpec.gaussian(R), S, rng)


def fit_garch_model(
    window: Panel,
    kind: str = "ccc",
    previous: GarchForecaster | None = None,
    starts: int | None = None,
) -> GarchForecaster:
    """
    Fit EGARCH per column, then the CCC or DCC layer on the residuals.

    With ``previous`` given, its parameters are used as the first starting
    point (warm start) followed by the documented defaults, truncated to
    ``starts`` runs when set.
    """
    if window.T < 500:
        raise ValueError(f"GARCH benchmarks need T >= 500, got {window.T}")
    fits = []
    for j, name in enumerate(window.names):
        y = window.values[:, j]
        init = default_starts(y)
        if previous is not None:
            init = [previous.fits[j].params, *init]
        if starts is not None:
            init = init[:starts]
        try:
            fits.append(egarch_fit(y, init))
        except (EgarchFitError, ValueError) as exc:
            raise EgarchFitError(f"column {name!r}: {exc}") from exc
    z = np.column_stack([f.residuals for f in fits])
    if kind == "ccc":
        corr = CorrelationModel("ccc", repair_correlation(np.corrcoef(z, rowvar=False)))
    elif kind == "dcc":
        corr = dcc_fit(z)
    else:
        raise ValueError(f"unknown correlation kind {kind!r}")
    return GarchForecaster(tuple(fits), corr)


def ccc_dcc_joint_forecast(window: Panel, kind: str, S: int, rng: np.random.Generator) -> JointForecast:
    """One-day-ahead EGARCH-CCC or EGARCH-DCC joint forecast with ``S`` samples."""
    return fit_garch_model(window, kind).joint_forecast(S, rng)


class MiscalibrationGuard:
    """
    Reject parameter jumps far outside the recent day-to-day variation.

    A new vector is rejected when its distance from the last accepted one
    exceeds ``multiple`` times the median of the trailing ``window`` accepted
    changes; at least ``min_history`` changes are needed before rejecting.
    """

    def __init__(self, multiple: float = 10.0, window: int = 20, min_history: int = 5) -> None:
        self.multiple = multiple
        self.window = window
        self.min_history = min_history
        self._last: np.ndarray | None = None
        self._changes: list[float] = []
        self.rejections = 0

    def accept(self, vector: np.ndarray) -> bool:
        v = np.asarray(vector, dtype=float)
        if not np.all(np.isfinite(v)):
            self.rejections += 1
            return False
        if self._last is None:
            self._last = v
            return True
        change = float(np.linalg.norm(v - self._last))
        recent = self._changes[-self.window :]
        if len(recent) >= self.min_history:
            med = float(np.median(recent))
            if med > 0 and change > self.multiple * med:
                self.rejections += 1
                return False
        self._changes.append(change)
        self._last = v
        return True

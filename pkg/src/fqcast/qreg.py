"""
Linear quantile regression over a partition of quantile levels.

Estimates come from two steps. Iteratively reweighted least squares on a
smoothed check loss gives a warm start for all (variable, level) problems at
once, since they share one design matrix. A basis-exchange polish then walks
the vertices of the check-loss polytope to an exact minimiser. When the
minimiser is not unique the polish moves to the solution with the smallest
intercept, so intercept-only fits reproduce the lower empirical quantile
``y[ceil(T * tau)]``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Q9",
    "QuantileFitSet",
    "QuantilePartition",
    "QuantileRegressionError",
    "check_loss",
    "equidistant_partition",
    "fit_partition",
    "fit_quantile",
    "pinball_loss",
    "predict_nodes",
    "rearrange",
]

IRLS_MAX_ITER = 200
IRLS_TOL = 1e-8
COLLINEARITY_TOL = 1e-10


class QuantileRegressionError(RuntimeError):
    """Raised when a quantile regression cannot be solved.

    ``best`` holds the best parameter vector found (intercept first) when the
    failure is a non-convergence; it is ``None`` for invalid designs.
    """

    def __init__(self, message: str, best: np.ndarray | None = None) -> None:
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class QuantilePartition:
    taus: tuple[float, ...]

    def __post_init__(self) -> None:
        taus = tuple(float(t) for t in self.taus)
        if len(taus) < 2:
            raise ValueError("a quantile partition needs at least two levels")
        arr = np.asarray(taus)
        if np.any(arr <= 0) or np.any(arr >= 1):
            raise ValueError("quantile levels must lie strictly inside (0, 1)")
        if np.any(np.diff(arr) <= 0):
            raise ValueError("quantile levels must be strictly increasing")
        object.__setattr__(self, "taus", taus)

    def __len__(self) -> int:
        return len(self.taus)

    def __iter__(self):
        return iter(self.taus)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.taus)


Q9 = QuantilePartition((0.001, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.999))


def equidistant_partition(q: int) -> QuantilePartition:
    """Levels ``k / (q + 1)`` for ``k = 1..q``."""
    return QuantilePartition(tuple(np.arange(1, q + 1) / (q + 1)))


def _as_partition(taus: QuantilePartition | Sequence[float]) -> QuantilePartition:
    return taus if isinstance(taus, QuantilePartition) else QuantilePartition(tuple(taus))


@dataclass(frozen=True)
class QuantileFitSet:
    """
    Fitted intercepts and slopes for ``n`` variables at ``q`` levels.

    Attributes
    ----------
    taus : QuantilePartition
    intercepts : ndarray, shape (n, q)
    coefficients : ndarray, shape (n, q, m)
    names : tuple of str
    X, Y : ndarray
        Training design (T x m) and responses (T x n), kept for residuals.
    """

    taus: QuantilePartition
    intercepts: np.ndarray
    coefficients: np.ndarray
    names: tuple[str, ...] = ()
    X: np.ndarray | None = None
    Y: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.intercepts.shape[0]

    @property
    def m(self) -> int:
        return self.coefficients.shape[2]

    def residuals(self) -> np.ndarray:
        """In-sample residuals, shape (T, n, q)."""
        if self.X is None or self.Y is None:
            raise ValueError("fit set was built without training data")
        fitted = self.intercepts[None] + np.einsum("tm,nqm->tnq", self.X, self.coefficients)
        return self.Y[:, :, None] - fitted


def check_loss(u: np.ndarray, tau: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0))


def pinball_loss(y, yhat, tau: float) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    return float(np.mean(check_loss(y - yhat, tau)))


def rearrange(nodes) -> np.ndarray:
    """Monotone rearrangement of predicted quantiles (sorting)."""
    return np.sort(np.asarray(nodes, dtype=float), kind="stable")


def _design(X, T: int) -> np.ndarray:
    if X is None:
        X = np.empty((T, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != T:
        raise ValueError(f"design has {X.shape[0]} rows, response has {T}")
    Z = np.column_stack([np.ones(T), X])
    sv = np.linalg.svd(Z, compute_uv=False)
    if sv[-1] < COLLINEARITY_TOL * sv[0]:
        raise QuantileRegressionError(
            "rank-deficient design: smallest singular value "
            f"{sv[-1]:.3g} < {COLLINEARITY_TOL:g} x largest {sv[0]:.3g}"
        )
    if T <= Z.shape[1]:
        raise QuantileRegressionError(f"need T > m + 1 observations, got T={T}, m={X.shape[1]}")
    return Z


def _irls(Z: np.ndarray, Y: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Smoothed check-loss IRLS for K problems sharing design ``Z``.

    ``Y`` is T x K and ``taus`` has length K. Returns K x p coefficients.
    """
    T, p = Z.shape
    beta = np.linalg.lstsq(Z, Y, rcond=None)[0].T
    scale = np.maximum(np.std(Y, axis=0), 1e-12)
    eps = 0.1 * scale
    eps_min = 1e-9 * scale
    ridge = 1e-12 * np.eye(p)
    ZZ = (Z[:, :, None] * Z[:, None, :]).reshape(T, p * p)
    for _ in range(IRLS_MAX_ITER):
        r = Y - Z @ beta.T
        w = np.where(r >= 0, taus, 1.0 - taus) / np.maximum(np.abs(r), eps)
        A = (w.T @ ZZ).reshape(-1, p, p) + ridge
        b = (w * Y).T @ Z
        new = np.linalg.solve(A, b[..., None])[..., 0]
        delta = np.max(np.abs(new - beta) / (1.0 + np.abs(beta)))
        beta = new
        annealed = np.all(eps <= eps_min)
        eps = np.maximum(0.5 * eps, eps_min)
        if annealed and delta < IRLS_TOL:
            break
    return beta


def _initial_basis(Z: np.ndarray, r: np.ndarray) -> np.ndarray:
    p = Z.shape[1]
    basis: list[int] = []
    rows = np.empty((0, p))
    for i in np.argsort(np.abs(r), kind="stable"):
        trial = np.vstack([rows, Z[i]])
        if np.linalg.matrix_rank(trial, tol=1e-10 * np.abs(Z).max()) == len(basis) + 1:
            basis.append(int(i))
            rows = trial
            if len(basis) == p:
                break
    if len(basis) < p:
        raise QuantileRegressionError("could not find a nonsingular basis")
    return np.array(basis)


def _slopes(r: np.ndarray, U: np.ndarray, tau: float, basis: np.ndarray, sigma: float):
    """Directional derivatives of the check loss along ``sigma * U[:, j]``.

    ``U`` is T x p with ``U[i, j] = z_i' d_j``; moving along ``d_j`` drives
    basis residual ``j`` away from zero and keeps the other basis residuals at 0.
    """
    V = sigma * U
    pos = r > 0
    neg = r < 0
    zero = ~(pos | neg)
    g = -tau * (V * pos[:, None]).sum(0) + (1 - tau) * (V * neg[:, None]).sum(0)
    # exactly-zero residuals off the basis: slope depends on the move direction
    Vz = V[zero]
    g += np.where(Vz > 0, (1 - tau) * Vz, -tau * Vz).sum(0)
    # undo the zero-residual contribution of the basis rows and add the leaving row
    Vb = V[basis]
    g -= np.where(Vb > 0, (1 - tau) * Vb, -tau * Vb).sum(0)
    g += (1 - tau) if sigma > 0 else tau
    return g


def _line_search(r: np.ndarray, u: np.ndarray, g0: float, flat: bool):
    """Exact minimisation of sum rho(r - t u) over t >= 0 along a ray.

    Returns ``(t, entering_index)``. With ``flat`` the search runs to the far
    end of the zero-slope stretch instead of stopping at its first breakpoint.
    """
    mask = (u != 0) & ((r / np.where(u == 0, 1, u)) > 0) & ((r > 0) == (u > 0))
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None, None
    t = r[idx] / u[idx]
    order = np.argsort(t, kind="stable")
    slope = g0
    for k in order:
        slope += abs(u[idx[k]])
        if slope > 1e-12 * (1 + abs(u[idx[k]])) or (not flat and slope >= 0):
            return float(t[k]), int(idx[k])
    return float(t[order[-1]]), int(idx[order[-1]])


def _polish(Z: np.ndarray, y: np.ndarray, tau: float, beta0: np.ndarray) -> np.ndarray:
    T, p = Z.shape
    basis = _initial_basis(Z, y - Z @ beta0)
    beta = np.linalg.solve(Z[basis], y[basis])
    tol = 1e-10
    zero_tol = 1e-12 * (1.0 + np.abs(y).max())
    max_iter = 10 * T + 100
    for _ in range(max_iter):
        r = y - Z @ beta
        r[basis] = 0.0
        r[np.abs(r) <= zero_tol] = 0.0
        D = np.linalg.inv(Z[basis])
        U = Z @ D
        scale = 1.0 + np.abs(U).sum(0)
        best = None
        for sigma in (1.0, -1.0):
            g = _slopes(r, U, tau, basis, sigma)
            j = int(np.argmin(g / scale))
            if g[j] < -tol * scale[j] and (best is None or g[j] / scale[j] < best[0]):
                best = (g[j] / scale[j], sigma, j, g[j])
        flat = False
        if best is None:
            # optimal; among zero-slope edges prefer one that lowers the intercept
            for sigma in (1.0, -1.0):
                g = _slopes(r, U, tau, basis, sigma)
                for j in np.flatnonzero(np.abs(g) <= tol * scale):
                    if sigma * D[0, j] < -1e-14:
                        best = (0.0, sigma, int(j), 0.0)
                        flat = True
                        break
                if best is not None:
                    break
            if best is None:
                return beta
        _, sigma, j, g0 = best
        u = sigma * U[:, j]
        u[basis] = 0.0
        t, entering = _line_search(r, u, g0 if not flat else 0.0, flat)
        if t is None:
            if flat:
                return beta
            raise QuantileRegressionError("unbounded check-loss direction", best=beta)
        beta = beta + t * sigma * D[:, j]
        basis = basis.copy()
        basis[j] = entering
        beta = np.linalg.solve(Z[basis], y[basis])
    raise QuantileRegressionError(
        f"vertex polish did not converge in {max_iter} iterations", best=beta
    )


def _fit_many(Z: np.ndarray, Y: np.ndarray, taus: np.ndarray) -> np.ndarray:
    start = _irls(Z, Y, taus)
    out = np.empty_like(start)
    for k in range(Y.shape[1]):
        out[k] = _polish(Z, Y[:, k], float(taus[k]), start[k])
    return out


def fit_quantile(X, y, tau: float) -> tuple[float, np.ndarray]:
    """
    Linear quantile regression of ``y`` on ``X`` at level ``tau``.

    Parameters
    ----------
    X : array_like, shape (T, m) or None
        Regressors without an intercept column; ``None`` or an empty T x 0
        array fits the intercept only.
    y : array_like, shape (T,)
    tau : float in (0, 1)

    Returns
    -------
    intercept : float
    beta : ndarray, shape (m,)
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    y = np.asarray(y, dtype=float).ravel()
    Z = _design(X, y.size)
    coef = _fit_many(Z, y[:, None], np.array([tau]))[0]
    return float(coef[0]), coef[1:].copy()


def fit_partition(X, Y, taus: QuantilePartition | Sequence[float], names=None) -> QuantileFitSet:
    """Fit every (variable, level) pair; ``Y`` is T x n, ``X`` is T x m."""
    part = _as_partition(taus)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    T, n = Y.shape
    Z = _design(X, T)
    q = len(part)
    tau_arr = np.tile(part.array, n)
    Ystack = np.repeat(Y, q, axis=1)
    start = _irls(Z, Ystack, tau_arr)
    coef = np.empty_like(start)
    for k in range(n * q):
        try:
            coef[k] = _polish(Z, Ystack[:, k], float(tau_arr[k]), start[k])
        except QuantileRegressionError as exc:
            i, jt = divmod(k, q)
            label = names[i] if names is not None else i
            raise QuantileRegressionError(
                f"variable {label}, tau={part.taus[jt]}: {exc}", best=exc.best
            ) from exc
    coef = coef.reshape(n, q, -1)
    return QuantileFitSet(
        taus=part,
        intercepts=coef[:, :, 0].copy(),
        coefficients=coef[:, :, 1:].copy(),
        names=tuple(names) if names is not None else tuple(str(i) for i in range(n)),
        X=Z[:, 1:].copy(),
        Y=Y.copy(),
    )


def predict_nodes(fit: QuantileFitSet, x_star) -> np.ndarray:
    """Predicted quantiles, shape (n, q); no crossing repair is applied."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if fit.m == 0 and x_star.size == 0:
        return fit.intercepts.copy()
    if x_star.shape != (fit.m,):
        raise ValueError(f"x_star has shape {x_star.shape}, expected ({fit.m},)")
    return fit.intercepts + fit.coefficients @ x_star

"""
Univariate distributions interpolated from quantile nodes.

``build`` turns ``(tau_k, v_k)`` pairs into a :class:`MarginalDistribution`.
Available methods:

``pchip``
    Monotone piecewise cubic Hermite interpolation of the distribution function
    through the points ``(v_k, tau_k)``. Tied node values become atoms.
``pchip_quantile``
    The same interpolant applied the other way round: ``v`` as a function of
    ``tau``, i.e. an interpolated quantile function.
``step``
    Right-continuous quantile function holding the value of the next smallest
    node, a discrete law on the node values.
``epanechnikov_kernel``
    Equal-weight Epanechnikov mixture centred on the node values, bandwidth
    from Silverman's rule.

Beyond the outermost nodes both PCHIP variants extend linearly with the slope
of the outermost segment until probability 0 and 1 are reached, so the support
is finite. :class:`EmpiricalMarginal` wraps a sample (EDF marginals, pooled
bagging output).
"""

from __future__ import annotations

from collections.abc import Sequence

import numba
import numpy as np
from scipy.special import kolmogorov

__all__ = [
    "METHODS",
    "BaggedMarginal",
    "EmpiricalMarginal",
    "MarginalDistribution",
    "build",
    "ks_distance",
    "ks_two_sample",
    "pchip_inverse_batch",
    "pchip_slopes",
    "pit",
    "sample",
]

METHODS = ("pchip", "pchip_quantile", "step", "epanechnikov_kernel")


def pchip_slopes(x: np.ndarray, y_left: np.ndarray, y_right: np.ndarray | None = None) -> np.ndarray:
    """
    Shape-preserving knot derivatives (Fritsch-Carlson with Fritsch-Butland means).

    ``y_left``/``y_right`` are the function values approaching each knot from
    the left and leaving it to the right; they differ only at jumps. Interior
    slopes are weighted harmonic means of the adjacent secants (zero at local
    extrema), end slopes use the three-point formula with the usual shape
    limiter. Works along the last axis, so rows of a 2-d ``x`` are independent
    interpolants.
    """
    x = np.asarray(x, dtype=float)
    yl = np.broadcast_to(np.asarray(y_left, dtype=float), x.shape)
    yr = yl if y_right is None else np.broadcast_to(np.asarray(y_right, dtype=float), x.shape)
    k = x.shape[-1]
    if k < 2:
        return np.zeros(x.shape)
    h = np.diff(x, axis=-1)
    delta = (yl[..., 1:] - yr[..., :-1]) / h
    m = np.zeros(x.shape)
    if k == 2:
        m[...] = delta[..., :1]
        return m
    d0, d1 = delta[..., :-1], delta[..., 1:]
    w1 = 2 * h[..., 1:] + h[..., :-1]
    w2 = h[..., 1:] + 2 * h[..., :-1]
    same = (np.sign(d0) == np.sign(d1)) & (d0 != 0) & (d1 != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = (w1 + w2) / (w1 / d0 + w2 / d1)
    m[..., 1:-1] = np.where(same, hm, 0.0)
    m[..., 0] = _edge_slope(h[..., 0], h[..., 1], delta[..., 0], delta[..., 1])
    m[..., -1] = _edge_slope(h[..., -1], h[..., -2], delta[..., -1], delta[..., -2])
    return m


def _edge_slope(h0, h1, d0, d1):
    d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    d = np.where(np.sign(d) != np.sign(d0), 0.0, d)
    return np.where((np.sign(d0) != np.sign(d1)) & (np.abs(d) > np.abs(3 * d0)), 3 * d0, d)


def _hermite(x0, x1, y0, y1, m0, m1, xq):
    h = x1 - x0
    t = (xq - x0) / h
    t2 = t * t
    t3 = t2 * t
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + t) * h * m0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * m1
    )


def _hermite_deriv(x0, x1, y0, y1, m0, m1, xq):
    h = x1 - x0
    t = (xq - x0) / h
    t2 = t * t
    return (
        (6 * t2 - 6 * t) * y0 / h
        + (3 * t2 - 4 * t + 1) * m0
        + (-6 * t2 + 6 * t) * y1 / h
        + (3 * t2 - 2 * t) * m1
    )


def _invert_monotone(f, fprime, target, lo, hi, iters: int = 60):
    """
    Safeguarded Newton for nondecreasing ``f`` on brackets ``[lo, hi]``.

    ``f(z, idx)`` and ``fprime(z, idx)`` evaluate the function for the
    elements ``idx`` of the flattened problem; converged elements drop out.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    every = np.arange(target.size)
    flo, fhi = f(lo.ravel(), every).reshape(target.shape), f(hi.ravel(), every).reshape(target.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(fhi > flo, (target - flo) / (fhi - flo), 0.5)
    x = lo + np.clip(w, 0.0, 1.0) * (hi - lo)
    active = np.arange(target.size)
    xs, ls, hs, ts = x.ravel(), lo.ravel(), hi.ravel(), target.ravel()
    for _ in range(iters):
        xa, la, ha, ta = xs[active], ls[active], hs[active], ts[active]
        fx = f(xa, active) - ta
        la = np.where(fx <= 0, xa, la)
        ha = np.where(fx > 0, xa, ha)
        d = fprime(xa, active)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xa - fx / d
        tol = 1e-14 * (1.0 + np.abs(xa))
        close = np.isfinite(step) & (np.abs(step - xa) <= tol)
        ok = np.isfinite(step) & (step > la) & (step < ha)
        xn = np.where(ok, step, 0.5 * (la + ha))
        done = (fx == 0) | close | (ha - la <= tol)
        xs[active] = np.where(fx == 0, xa, np.where(close, np.clip(step, la, ha), xn))
        ls[active], hs[active] = la, ha
        active = active[~done]
        if active.size == 0:
            break
    return xs.reshape(target.shape)


@numba.njit(cache=True)
def _hermite_solve(x0, x1, y0, y1, m0, m1, target):  # pragma: no cover - compiled
    """Per-element safeguarded Newton inverse of monotone cubic segments."""
    out = np.empty(target.size)
    for k in range(target.size):
        a, b = x0[k], x1[k]
        h = b - a
        p0, p1, s0, s1, u = y0[k], y1[k], m0[k], m1[k], target[k]
        lo, hi = 0.0, 1.0
        t = (u - p0) / (p1 - p0) if p1 > p0 else 0.5
        t = min(max(t, 0.0), 1.0)
        for _ in range(100):
            t2 = t * t
            t3 = t2 * t
            f = (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * s0 + (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * h * s1 - u
            if f == 0.0:
                break
            if f < 0:
                lo = t
            else:
                hi = t
            d = (6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * h * s0 + (-6 * t2 + 6 * t) * p1 + (3 * t2 - 2 * t) * h * s1
            nt = t - f / d if d > 0 else -1.0
            if abs(nt - t) <= 1e-15:
                t = min(max(nt, lo), hi)
                break
            if not (lo < nt < hi):
                nt = 0.5 * (lo + hi)
            if hi - lo <= 1e-15:
                break
            t = nt
        out[k] = a + t * h
    return out


class MarginalDistribution:
    """
    Base class for univariate forecast distributions.

    Subclasses implement ``cdf``, ``inverse_cdf`` and ``pdf``. Instances are
    immutable once built.
    """

    method: str = ""
    taus: np.ndarray
    values: np.ndarray
    support: tuple[float, float]

    def cdf(self, x):
        raise NotImplementedError

    def inverse_cdf(self, u):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    ppf = property(lambda self: self.inverse_cdf)

    @property
    def nodes(self) -> list[tuple[float, float]]:
        return list(zip(self.taus.tolist(), self.values.tolist()))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample(self, n, rng)

    def pit(self, y):
        return pit(self, y)

    def shifted(self, c: float) -> MarginalDistribution:
        """The same law translated by ``c``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "taus": self.taus.tolist(),
            "values": self.values.tolist(),
            "support": [float(self.support[0]), float(self.support[1])],
        }

    def __repr__(self) -> str:
        lo, hi = self.support
        return f"{type(self).__name__}(method={self.method!r}, nodes={len(self.taus)}, support=[{lo:.4g}, {hi:.4g}])"


class _PchipCDF(MarginalDistribution):
    method = "pchip"

    def __init__(self, taus: np.ndarray, values: np.ndarray) -> None:
        self.taus = taus
        self.values = values
        knots, first = np.unique(values, return_index=True)
        last = np.r_[first[1:] - 1, values.size - 1]
        f_lo = taus[first].astype(float)
        f_hi = taus[last].astype(float)
        if knots.size == 1:
            f_lo[0], f_hi[0] = 0.0, 1.0
            self._slope_lo = self._slope_hi = 0.0
            lower = upper = float(knots[0])
        else:
            self._slope_lo = (f_lo[1] - f_hi[0]) / (knots[1] - knots[0])
            self._slope_hi = (f_lo[-1] - f_hi[-2]) / (knots[-1] - knots[-2])
            lower = float(knots[0] - f_lo[0] / self._slope_lo)
            upper = float(knots[-1] + (1.0 - f_hi[-1]) / self._slope_hi)
        self._x = knots
        self._f_lo = f_lo
        self._f_hi = f_hi
        self._m = pchip_slopes(knots, f_lo, f_hi)
        self.support = (lower, upper)

    def _segment(self, x):
        j = np.clip(np.searchsorted(self._x, x, side="right") - 1, 0, max(self._x.size - 2, 0))
        return j

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xk, lo, hi = self._x, self._f_lo, self._f_hi
        out = np.empty_like(x)
        below = x < xk[0]
        above = x >= xk[-1]
        mid = ~(below | above)
        out[below] = np.clip(lo[0] + self._slope_lo * (x[below] - xk[0]), 0.0, lo[0])
        out[above] = np.clip(hi[-1] + self._slope_hi * (x[above] - xk[-1]), hi[-1], 1.0)
        if np.any(mid):
            xm = x[mid]
            j = self._segment(xm)
            val = _hermite(xk[j], xk[j + 1], hi[j], lo[j + 1], self._m[j], self._m[j + 1], xm)
            # exact knot hits take the right-continuous value
            at = xm == xk[j]
            val[at] = hi[j[at]]
            out[mid] = np.clip(val, hi[j], lo[j + 1])
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xk, lo, hi = self._x, self._f_lo, self._f_hi
        out = np.zeros_like(x)
        lower, upper = self.support
        tail_lo = (x >= lower) & (x < xk[0])
        tail_hi = (x >= xk[-1]) & (x <= upper)
        out[tail_lo] = self._slope_lo
        out[tail_hi] = self._slope_hi
        mid = (x >= xk[0]) & (x < xk[-1])
        if np.any(mid):
            xm = x[mid]
            j = self._segment(xm)
            out[mid] = np.maximum(
                _hermite_deriv(xk[j], xk[j + 1], hi[j], lo[j + 1], self._m[j], self._m[j + 1], xm),
                0.0,
            )
        return out if out.ndim else float(out)

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        xk, lo, hi, m = self._x, self._f_lo, self._f_hi, self._m
        out = np.empty_like(u)
        uc = np.clip(u, 0.0, 1.0)
        if xk.size == 1:
            out[...] = xk[0]
            return out if out.ndim else float(out)
        low = uc < lo[0]
        high = uc > hi[-1]
        out[low] = xk[0] - (lo[0] - uc[low]) / self._slope_lo
        out[high] = xk[-1] + (uc[high] - hi[-1]) / self._slope_hi
        rest = ~(low | high)
        if np.any(rest):
            ur = uc[rest]
            # knot k owns [lo_k, hi_k]; segment k owns (hi_k, lo_{k+1})
            k = np.clip(np.searchsorted(hi, ur, side="left"), 0, xk.size - 1)
            on_knot = ur >= lo[k]
            res = np.empty_like(ur)
            res[on_knot] = xk[k[on_knot]]
            seg = ~on_knot
            if np.any(seg):
                j = k[seg] - 1
                x0, x1 = xk[j], xk[j + 1]
                y0, y1, m0, m1 = hi[j], lo[j + 1], m[j], m[j + 1]
                res[seg] = _hermite_solve(x0, x1, y0, y1, m0, m1, ur[seg])
            out[rest] = res
        return out if out.ndim else float(out)

    def shifted(self, c: float) -> MarginalDistribution:
        return _PchipCDF(self.taus, self.values + c)


class _PchipQuantile(MarginalDistribution):
    method = "pchip_quantile"

    def __init__(self, taus: np.ndarray, values: np.ndarray) -> None:
        self.taus = taus
        self.values = values
        self._m = pchip_slopes(taus, values)
        self._slope_lo = (values[1] - values[0]) / (taus[1] - taus[0])
        self._slope_hi = (values[-1] - values[-2]) / (taus[-1] - taus[-2])
        self.support = (
            float(values[0] - taus[0] * self._slope_lo),
            float(values[-1] + (1 - taus[-1]) * self._slope_hi),
        )

    def inverse_cdf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        t, v, m = self.taus, self.values, self._m
        out = np.empty_like(u)
        low = u < t[0]
        high = u > t[-1]
        out[low] = v[0] + self._slope_lo * (u[low] - t[0])
        out[high] = v[-1] + self._slope_hi * (u[high] - t[-1])
        mid = ~(low | high)
        if np.any(mid):
            um = u[mid]
            j = np.clip(np.searchsorted(t, um, side="right") - 1, 0, t.size - 2)
            val = _hermite(t[j], t[j + 1], v[j], v[j + 1], m[j], m[j + 1], um)
            out[mid] = np.clip(val, v[j], v[j + 1])
        return out if out.ndim else float(out)

    def _qprime(self, u):
        t, v, m = self.taus, self.values, self._m
        u = np.asarray(u, dtype=float)
        j = np.clip(np.searchsorted(t, u, side="right") - 1, 0, t.size - 2)
        d = _hermite_deriv(t[j], t[j + 1], v[j], v[j + 1], m[j], m[j + 1], u)
        d = np.where(u < t[0], self._slope_lo, d)
        return np.where(u > t[-1], self._slope_hi, d)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lower, upper = self.support
        out = np.zeros_like(x)
        out[x >= upper] = 1.0
        inside = (x >= lower) & (x < upper)
        if np.any(inside):
            xi = x[inside]
            lo = np.zeros_like(xi)
            hi = np.ones_like(xi)
            # largest u with Q(u) <= x, bisection to 1e-10 in probability
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                le = self.inverse_cdf(mid) <= xi
                lo = np.where(le, mid, lo)
                hi = np.where(le, hi, mid)
                if np.max(hi - lo) < 1e-12:
                    break
            out[inside] = lo
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lower, upper = self.support
        u = np.atleast_1d(self.cdf(x))
        d = self._qprime(u)
        with np.errstate(divide="ignore"):
            dens = np.where(d > 0, 1.0 / d, 0.0)
        dens = np.where((x >= lower) & (x <= upper), dens, 0.0)
        return dens if np.ndim(x) else float(dens[0])

    def shifted(self, c: float) -> MarginalDistribution:
        return _PchipQuantile(self.taus, self.values + c)


class _Step(MarginalDistribution):
    method = "step"

    def __init__(self, taus: np.ndarray, values: np.ndarray) -> None:
        self.taus = taus
        self.values = values
        self.support = (float(values[0]), float(values[-1]))
        self._next = np.r_[taus[1:], 1.0]

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self.taus, u, side="right") - 1, 0, self.taus.size - 1)
        return self.values[k] if u.ndim else float(self.values[k])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.values, x, side="right")
        out = np.where(j == 0, 0.0, self._next[np.clip(j - 1, 0, None)])
        return out if out.ndim else float(out)

    def pdf(self, x):
        raise ValueError("the step-function build is discrete and has no density")

    def shifted(self, c: float) -> MarginalDistribution:
        return _Step(self.taus, self.values + c)


class _Kernel(MarginalDistribution):
    method = "epanechnikov_kernel"

    def __init__(self, taus: np.ndarray, values: np.ndarray, bandwidth: float | None = None) -> None:
        self.taus = taus
        self.values = values
        self.bandwidth = silverman_bandwidth(values) if bandwidth is None else float(bandwidth)
        h = self.bandwidth
        self.support = (float(values[0] - h), float(values[-1] + h))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        h = self.bandwidth
        if h == 0:
            out = np.mean(x[..., None] >= self.values, axis=-1)
        else:
            z = np.clip((x[..., None] - self.values) / h, -1.0, 1.0)
            out = np.mean(0.5 + 0.75 * (z - z**3 / 3.0), axis=-1)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        h = self.bandwidth
        if h == 0:
            raise ValueError("zero-bandwidth kernel build has no density")
        z = (x[..., None] - self.values) / h
        out = np.mean(np.where(np.abs(z) <= 1, 0.75 * (1 - z**2), 0.0), axis=-1) / h
        return out if out.ndim else float(out)

    def inverse_cdf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        lower, upper = self.support
        if self.bandwidth == 0:
            emp = EmpiricalMarginal(self.values)
            return emp.inverse_cdf(u)
        lo = np.full(u.shape, lower)
        hi = np.full(u.shape, upper)
        x = _invert_monotone(lambda z, i: self.cdf(z), lambda z, i: self.pdf(z), u, lo, hi, iters=80)
        return x if np.ndim(x) else float(x)

    def shifted(self, c: float) -> MarginalDistribution:
        return _Kernel(self.taus, self.values + c, self.bandwidth)

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["bandwidth"] = self.bandwidth
        return d


def silverman_bandwidth(values: np.ndarray) -> float:
    """
    Silverman's rule of thumb ``0.9 min(sd, IQR / 1.34) q^(-1/5)`` on the node values.

    Used directly as the Epanechnikov scale, so each node spreads its mass over
    ``[v - h, v + h]``.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    sd = v.std(ddof=1)
    q75, q25 = np.percentile(v, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return float(0.9 * spread * v.size ** (-0.2))


class EmpiricalMarginal(MarginalDistribution):
    """
    Distribution backed by a sample.

    The inverse CDF returns order statistics with the lower convention
    ``x[ceil(n u)]``. ``components`` optionally carries the distributions whose
    pooled draws formed the sample (bagging); ``pdf`` then averages their
    densities.
    """

    method = "ecdf"

    def __init__(self, samples, components: Sequence[MarginalDistribution] | None = None) -> None:
        s = np.sort(np.asarray(samples, dtype=float).ravel())
        if s.size == 0:
            raise ValueError("empirical marginal needs at least one observation")
        if not np.all(np.isfinite(s)):
            raise ValueError("empirical marginal needs finite observations")
        s.setflags(write=False)
        self.samples = s
        self.components = tuple(components) if components is not None else ()
        self.support = (float(s[0]), float(s[-1]))
        probs = np.arange(1, s.size + 1) / s.size
        self.taus = probs
        self.values = s

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.samples, x, side="right") / self.samples.size
        return out if out.ndim else float(out)

    def inverse_cdf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        n = self.samples.size
        k = np.clip(np.ceil(n * u).astype(int) - 1, 0, n - 1)
        out = self.samples[k]
        return out if np.ndim(out) else float(out)

    def pdf(self, x):
        if not self.components:
            raise ValueError("an empirical marginal without components has no density")
        return np.mean([c.pdf(x) for c in self.components], axis=0)

    def shifted(self, c: float) -> MarginalDistribution:
        return EmpiricalMarginal(self.samples + c, [m.shifted(c) for m in self.components])

    def to_dict(self) -> dict:
        from .qreg import Q9

        grid = np.array(Q9.taus)
        return {
            "method": self.method,
            "size": int(self.samples.size),
            "taus": grid.tolist(),
            "values": np.atleast_1d(self.inverse_cdf(grid)).tolist(),
            "support": [self.support[0], self.support[1]],
        }


class BaggedMarginal(EmpiricalMarginal):
    """
    Pooled sample from ``pchip`` builds of several node vectors.

    The component distributions are only constructed when a density is
    requested.
    """

    method = "bagged_ecdf"

    def __init__(self, samples, taus, node_draws: np.ndarray) -> None:
        super().__init__(samples)
        self._taus = np.asarray(taus, dtype=float)
        draws = np.array(node_draws, dtype=float)
        draws.setflags(write=False)
        self.node_draws = draws
        self._components: tuple[MarginalDistribution, ...] | None = None

    @property
    def components(self) -> tuple[MarginalDistribution, ...]:
        if self._components is None:
            self._components = tuple(build(self._taus, d, "pchip") for d in self.node_draws)
        return self._components

    @components.setter
    def components(self, value) -> None:
        # the base initialiser assigns an empty tuple
        pass

    def shifted(self, c: float) -> MarginalDistribution:
        return BaggedMarginal(self.samples + c, self._taus, self.node_draws + c)


_BUILDERS = {
    "pchip": _PchipCDF,
    "pchip_quantile": _PchipQuantile,
    "step": _Step,
    "epanechnikov_kernel": _Kernel,
}


def build(taus, values, method: str = "pchip") -> MarginalDistribution:
    """
    Build a marginal distribution from quantile nodes.

    Parameters
    ----------
    taus : array_like
        Strictly increasing probability levels in (0, 1).
    values : array_like
        Nondecreasing quantile values at ``taus``; apply
        :func:`fqcast.qreg.rearrange` first if predictions may cross.
    method : {'pchip', 'pchip_quantile', 'step', 'epanechnikov_kernel'}

    Raises
    ------
    ValueError
        For duplicate or unordered levels, non-monotone values or an unknown
        method.
    """
    t = np.asarray(taus, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    if t.shape != v.shape:
        raise ValueError(f"{t.size} levels but {v.size} values")
    if t.size < 2:
        raise ValueError("need at least two nodes")
    if np.any(t <= 0) or np.any(t >= 1):
        raise ValueError("levels must lie strictly inside (0, 1)")
    dt = np.diff(t)
    if np.any(dt == 0):
        raise ValueError("duplicate quantile level")
    if np.any(dt < 0):
        raise ValueError("quantile levels must be increasing")
    if not np.all(np.isfinite(v)):
        raise ValueError("quantile values must be finite")
    if np.any(np.diff(v) < 0):
        raise ValueError("non-monotone quantile values; rearrange before building")
    try:
        cls = _BUILDERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}") from None
    t.setflags(write=False)
    v.setflags(write=False)
    return cls(t, v)


def pchip_inverse_batch(taus, values: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    Inverse CDFs of many ``pchip`` builds sharing the same levels.

    Row ``b`` of the result equals ``build(taus, values[b]).inverse_cdf(u[b])``.
    Rows with tied node values fall back to the scalar path.
    """
    t = np.asarray(taus, dtype=float)
    V = np.atleast_2d(np.asarray(values, dtype=float))
    U = np.clip(np.atleast_2d(np.asarray(u, dtype=float)), 0.0, 1.0)
    if U.shape[0] != V.shape[0]:
        raise ValueError("need one row of uniforms per node vector")
    out = np.empty(U.shape)
    strict = np.all(np.diff(V, axis=1) > 0, axis=1)
    for b in np.flatnonzero(~strict):
        out[b] = build(t, V[b]).inverse_cdf(U[b])
    rows = np.flatnonzero(strict)
    if rows.size == 0:
        return out
    X = V[rows]
    Ur = U[rows]
    m = pchip_slopes(X, t)
    s_lo = (t[1] - t[0]) / (X[:, 1] - X[:, 0])
    s_hi = (t[-1] - t[-2]) / (X[:, -1] - X[:, -2])
    res = np.empty(Ur.shape)
    low = Ur < t[0]
    high = Ur > t[-1]
    r_lo, _ = np.nonzero(low)
    r_hi, _ = np.nonzero(high)
    res[low] = X[r_lo, 0] - (t[0] - Ur[low]) / s_lo[r_lo]
    res[high] = X[r_hi, -1] + (Ur[high] - t[-1]) / s_hi[r_hi]
    mid = ~(low | high)
    r, _ = np.nonzero(mid)
    um = Ur[mid]
    j = np.clip(np.searchsorted(t, um, side="right") - 1, 0, t.size - 2)
    x0, x1 = X[r, j], X[r, j + 1]
    y0, y1 = t[j], t[j + 1]
    m0, m1 = m[r, j], m[r, j + 1]
    res[mid] = _hermite_solve(x0, x1, y0, y1, m0, m1, um)
    out[rows] = res
    return out


def sample(dist: MarginalDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform draws ``dist.inverse_cdf(U)``, ``U ~ Uniform(0, 1)``."""
    if n < 1:
        raise ValueError("sample size must be positive")
    return np.asarray(dist.inverse_cdf(rng.random(n)), dtype=float)


def pit(dist: MarginalDistribution, y):
    """Probability integral transform ``F(y)``, clamped to [0, 1]."""
    out = np.clip(dist.cdf(y), 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def ks_two_sample(a, b) -> tuple[float, float]:
    """
    Two-sample Kolmogorov-Smirnov test.

    Returns the statistic ``sup |F_a - F_b|`` and the asymptotic p-value
    ``P(K > sqrt(n_eff) D)`` with ``n_eff = n_a n_b / (n_a + n_b)``.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return d, float(kolmogorov(np.sqrt(n_eff) * d)) if d > 0 else 1.0


def ks_distance(a: MarginalDistribution, b, points: int = 20001) -> float:
    """
    Sup-distance between two distribution functions.

    ``b`` may be another :class:`MarginalDistribution` or a vectorised CDF
    callable. The supremum is taken over a dense grid spanning both supports
    plus every node, approached from both sides.
    """
    cdf_b = b.cdf if isinstance(b, MarginalDistribution) else b
    lo, hi = a.support
    if isinstance(b, MarginalDistribution):
        lo, hi = min(lo, b.support[0]), max(hi, b.support[1])
    pad = 1e-9 * max(1.0, hi - lo)
    knots = [np.asarray(a.values)]
    if isinstance(b, MarginalDistribution):
        knots.append(np.asarray(b.values))
    knots = np.concatenate(knots)
    grid = np.concatenate([np.linspace(lo - pad, hi + pad, points), knots, knots - pad])
    return float(np.max(np.abs(np.asarray(a.cdf(grid)) - np.asarray(cdf_b(grid)))))

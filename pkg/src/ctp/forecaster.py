"""ARIMA(p, d, q) price forecasting and window-length selection.

Model convention: with ``z = nabla^d y``,

    z_t = c + sum_k phi_k z_{t-k} + e_t + sum_k theta_k e_{t-k}

i.e. AR polynomial ``1 - phi_1 B - ...`` and MA polynomial
``1 + theta_1 B + ...``. Coefficients are estimated by conditional sum of
squares (pre-sample innovations set to zero) using Nelder-Mead over a
partial-autocorrelation parameterisation, so every fit is stationary and
invertible by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, signal, stats

from .errors import DataError, DegenerateSeriesError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArimaSpec:
    p: int = 1
    d: int = 1
    q: int = 1

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0 or self.p + self.q < 1:
            raise ValueError(f"invalid ARIMA order {self}")

    @property
    def min_obs(self) -> int:
        """Smallest sample the model is fitted on."""
        return 10 + self.p + self.q + self.d


@dataclass(frozen=True, eq=False)
class ArimaFit:
    spec: ArimaSpec
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    sigma2: float
    residuals: np.ndarray   # aligned with diffed[p:]
    fitted: np.ndarray      # level-scale one-step predictions, aligned with y[d + p:]
    diffed: np.ndarray
    converged: bool = True
    n_iter: int = 0

    @property
    def actual(self) -> np.ndarray:
        """Level-scale observations matching ``fitted``."""
        return self.fitted + self.residuals


@dataclass(frozen=True)
class Forecast:
    points: np.ndarray
    sigma: float

    @property
    def horizon(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class WindowChoice:
    T: int
    r2: float
    scores: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass(frozen=True)
class WhiteNoiseReport:
    q_stat: float
    p_value: float
    df: int
    lags: int
    max_abs_acf: float
    passed: bool


# --- differencing ------------------------------------------------------

def difference(series, d: int = 1) -> np.ndarray:
    y = np.asarray(series, dtype=float)
    if d >= len(y):
        raise DataError(f"cannot difference {len(y)} values {d} times")
    return np.diff(y, n=d) if d else y.copy()


def integrate(diffed, anchors, d: int | None = None) -> np.ndarray:
    """Undo ``difference``: values that follow ``anchors`` given their d-th differences.

    ``anchors`` are original-scale values immediately preceding the
    differenced stretch; the last ``d`` of them are used.
    """
    anchors = np.asarray(anchors, dtype=float)
    d = len(anchors) if d is None else d
    if len(anchors) < d:
        raise DataError(f"need {d} anchor values, got {len(anchors)}")
    out = np.asarray(diffed, dtype=float)
    tail = anchors[len(anchors) - d:] if d else anchors[:0]
    for j in range(d - 1, -1, -1):
        last = np.diff(tail, n=j)[-1]
        out = last + np.cumsum(out)
    return out


# --- correlation structure ---------------------------------------------

def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag (biased, divide-by-N)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n <= max_lag:
        raise DataError(f"series of length {n} too short for {max_lag} lags")
    x = x - x.mean()
    denom = x @ x
    if denom <= 1e-300 * n:
        raise DegenerateSeriesError("constant series has no autocorrelation")
    return np.array([x[: n - k] @ x[k:] for k in range(max_lag + 1)]) / denom


def pacf_from_acf(rho: np.ndarray) -> np.ndarray:
    """Partial autocorrelations (lags 0..K) by the Durbin-Levinson recursion."""
    K = len(rho) - 1
    out = np.zeros(K + 1)
    out[0] = 1.0
    if K == 0:
        return out
    phi = np.array([rho[1]])
    v = 1.0 - rho[1] ** 2
    out[1] = rho[1]
    for k in range(2, K + 1):
        a = (rho[k] - phi @ rho[k - 1:0:-1]) / v if v > 0 else 0.0
        phi = np.r_[phi - a * phi[::-1], a]
        v *= 1.0 - a * a
        out[k] = a
    return out


def pacf(series, max_lag: int) -> np.ndarray:
    return pacf_from_acf(acf(series, max_lag))


# --- parameter transforms ----------------------------------------------

def _pacf_to_coefs(r: np.ndarray) -> np.ndarray:
    """Map partial autocorrelations in (-1, 1) to stable AR coefficients."""
    if len(r) == 1:
        return np.asarray(r, dtype=float).copy()
    a = np.zeros(0)
    for rk in r:
        a = np.append(a - rk * a[::-1], rk)
    return a


def _coefs_to_pacf(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    r = np.zeros(len(a))
    for k in range(len(a) - 1, -1, -1):
        rk = a[k]
        r[k] = rk
        if k == 0:
            break
        if abs(rk) >= 1:
            raise ValueError("non-stationary coefficients")
        a = (a[:k] + rk * a[:k][::-1]) / (1 - rk * rk)
    return r


def _unpack(params: np.ndarray, p: int, q: int):
    c = params[0]
    phi = _pacf_to_coefs(np.tanh(params[1:1 + p])) if p else np.zeros(0)
    theta = -_pacf_to_coefs(np.tanh(params[1 + p:1 + p + q])) if q else np.zeros(0)
    return c, phi, theta


def _innovations(z: np.ndarray, c: float, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    p = len(phi)
    w = z[p:] - c
    for k in range(1, p + 1):
        w = w - phi[k - 1] * z[p - k: len(z) - k]
    if len(theta):
        return signal.lfilter(_ONE, np.concatenate((_ONE, theta)), w)
    return w


_ONE = np.ones(1)


def _start_values(z: np.ndarray, p: int, q: int) -> np.ndarray:
    """Hannan-Rissanen style starting point, mapped to the optimiser's space."""
    n = len(z)
    try:
        resid = np.zeros(n)
        if q:
            m = max(p + q, min(8, n // 5))
            X = np.column_stack([np.ones(n - m)] + [z[m - k: n - k] for k in range(1, m + 1)])
            coef, *_ = np.linalg.lstsq(X, z[m:], rcond=None)
            resid[m:] = z[m:] - X @ coef
        s = max(p, q)
        start = s + (max(p + q, min(8, n // 5)) if q else 0)
        cols = [np.ones(n - start)]
        cols += [z[start - k: n - k] for k in range(1, p + 1)]
        cols += [resid[start - k: n - k] for k in range(1, q + 1)]
        coef, *_ = np.linalg.lstsq(np.column_stack(cols), z[start:], rcond=None)
        phi = np.clip(coef[1:1 + p], -0.9, 0.9)
        theta = np.clip(coef[1 + p:], -0.9, 0.9)
        u_phi = np.arctanh(np.clip(_coefs_to_pacf(phi), -0.95, 0.95)) if p else []
        u_theta = np.arctanh(np.clip(_coefs_to_pacf(-theta), -0.95, 0.95)) if q else []
        c0 = z.mean() * (1 - phi.sum())
        return np.r_[c0, u_phi, u_theta]
    except (ValueError, np.linalg.LinAlgError):
        return np.r_[z.mean(), np.zeros(p + q)]


def fit(series, spec: ArimaSpec = ArimaSpec(), maxiter: int | None = None) -> ArimaFit:
    """Fit ARIMA ``spec`` to ``series`` by conditional sum of squares."""
    y = np.asarray(series, dtype=float)
    if len(y) < spec.min_obs:
        raise DataError(f"need at least {spec.min_obs} observations for {spec}, got {len(y)}")
    z = difference(y, spec.d)
    scale = float(np.std(z))
    if scale <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise DegenerateSeriesError("series is constant after differencing")
    zs = z / scale
    p, q = spec.p, spec.q

    def sse(params):
        c, phi, theta = _unpack(params, p, q)
        e = _innovations(zs, c, phi, theta)
        return float(e @ e)

    x0 = _start_values(zs, p, q)
    dim = len(x0)
    nm_options = {"xatol": 1e-4, "fatol": 1e-8 * len(zs), "maxiter": maxiter or 400 * dim,
                  "adaptive": dim > 3}
    res = optimize.minimize(sse, x0, method="Nelder-Mead", options=nm_options)
    zero = np.zeros(dim)
    zero[0] = zs.mean()
    if sse(zero) < res.fun:
        res = optimize.minimize(sse, zero, method="Nelder-Mead", options=nm_options)
    if not res.success:
        logger.debug("ARIMA fit did not converge: %s", res.message)

    c, phi, theta = _unpack(res.x, p, q)
    e = _innovations(zs, c, phi, theta) * scale
    fitted = y[spec.d + p:] - e
    return ArimaFit(spec=spec, phi=phi, theta=theta, intercept=float(c * scale),
                    sigma2=float(e @ e / len(e)), residuals=e, fitted=fitted, diffed=z,
                    converged=bool(res.success), n_iter=int(res.nit))


def forecast(fit: ArimaFit, last_values, horizon: int = 3) -> Forecast:
    """Point forecasts on the original scale, future innovations set to zero.

    ``last_values`` is the original-scale tail the model was fitted to
    (at least ``d`` values, the last of which is the final observation).
    ``sigma`` is the population standard deviation of the forecast points.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p, q = fit.spec.p, fit.spec.q
    z = list(fit.diffed)
    e = [0.0] * p + list(fit.residuals)
    for _ in range(horizon):
        zt = fit.intercept
        zt += sum(fit.phi[k - 1] * z[-k] for k in range(1, p + 1))
        zt += sum(fit.theta[k - 1] * e[-k] for k in range(1, q + 1) if k <= len(e))
        z.append(zt)
        e.append(0.0)
    z_future = np.array(z[len(fit.diffed):])
    points = integrate(z_future, last_values, fit.spec.d)
    return Forecast(points=points, sigma=float(np.std(points)))


# --- goodness of fit ---------------------------------------------------

def r_squared(actual, fitted) -> float:
    """Coefficient of determination ``1 - SSE / SST``."""
    a = np.asarray(actual, dtype=float)
    f = np.asarray(fitted, dtype=float)
    if a.shape != f.shape or len(a) < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    sst = float(np.sum((a - a.mean()) ** 2))
    if sst <= 0:
        raise DegenerateSeriesError("actual values have zero variance")
    return 1.0 - float(np.sum((a - f) ** 2)) / sst


def white_noise_check(residuals, lags: int = 20, n_params: int = 0,
                      alpha: float = 0.05) -> WhiteNoiseReport:
    """Ljung-Box portmanteau test with ``lags - n_params`` degrees of freedom."""
    e = np.asarray(residuals, dtype=float)
    n = len(e)
    if n <= lags:
        raise DataError(f"{n} residuals are too few for {lags} lags")
    rho = acf(e, lags)[1:]
    k = np.arange(1, lags + 1)
    q_stat = float(n * (n + 2) * np.sum(rho ** 2 / (n - k)))
    df = max(lags - n_params, 1)
    p_value = float(stats.chi2.sf(q_stat, df))
    return WhiteNoiseReport(q_stat, p_value, df, lags, float(np.max(np.abs(rho))),
                            p_value > alpha)


# --- window selection --------------------------------------------------

def window_r2(values, T: int, spec: ArimaSpec = ArimaSpec()) -> float:
    """In-sample R^2 (price scale) of a fit on the trailing ``T`` values."""
    window = np.asarray(values, dtype=float)[-T:]
    f = fit(window, spec)
    return r_squared(f.actual, f.fitted)


def _safe_r2(values, T, spec) -> float:
    try:
        return window_r2(values, T, spec)
    except (DataError, DegenerateSeriesError):
        return -np.inf


DEFAULT_CANDIDATES = tuple(range(20, 121, 10))


def optimal_window(values, spec: ArimaSpec = ArimaSpec(),
                   candidates: Sequence[int] = DEFAULT_CANDIDATES,
                   eval_span: int = 200, stride: int = 5) -> WindowChoice:
    """Window length whose worst in-sample R^2 over the evaluation span is largest.

    Each candidate ``T`` is fitted on windows ending at every ``stride``-th
    day of the last ``eval_span`` days; its score is the minimum R^2 seen.
    """
    y = np.asarray(values, dtype=float)
    n = len(y)
    span = min(eval_span, n)
    ends = np.arange(n - span, n, stride) + 1  # exclusive end indices
    scores = {}
    for T in candidates:
        if T < spec.min_obs or ends[0] - T < 0:
            continue
        scores[T] = min(_safe_r2(y[:e], T, spec) for e in ends)
    if not scores:
        raise DataError(f"no candidate window fits {n} observations")
    best = max(scores, key=lambda T: (scores[T], -T))
    return WindowChoice(best, scores[best], scores)


def adaptive_window(values, spec: ArimaSpec = ArimaSpec(), T0: int = 60,
                    max_steps: int = 50,
                    scorer: Callable[[int], float] | None = None) -> WindowChoice:
    """Hill-climb the window length from ``T0`` one day at a time.

    At each step R^2 is compared at ``T - 1``, ``T`` and ``T + 1`` and the
    climb moves to a strictly better neighbour; it stops at a local maximum,
    at the edge of the available history, or after ``max_steps`` moves.
    ``scorer`` overrides the fit-based R^2 (useful for testing).
    """
    y = np.asarray(values, dtype=float)
    lo, hi = spec.min_obs, len(y)
    if hi < lo:
        raise DataError(f"history of {hi} values is shorter than {lo}")
    score = scorer or (lambda T: _safe_r2(y, T, spec))
    cache: dict[int, float] = {}

    def r2(T):
        if T not in cache:
            cache[T] = score(T)
        return cache[T]

    T = int(min(max(T0, lo), hi))
    for _ in range(max_steps):
        best_T, best = T, r2(T)
        for cand in (T - 1, T + 1):
            if lo <= cand <= hi and r2(cand) > best:
                best_T, best = cand, r2(cand)
        if best_T == T:
            break
        T = best_T
    return WindowChoice(T, r2(T), dict(cache))

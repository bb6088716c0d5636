"""Core daily-series types, error metrics, and seasonal decomposition."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .errors import ContractError, DataQualityError


@dataclass(frozen=True)
class DailySeries:
    """A gap-free sequence of daily values starting at ``start``.

    ``kind`` distinguishes raw attendance counts (non-negative) from
    transformed series (residuals, deseasonalized) which may be negative.
    """

    start: date
    values: np.ndarray
    kind: str = "raw"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ContractError("DailySeries requires a non-empty 1-d value sequence")
        if not np.all(np.isfinite(vals)):
            raise DataQualityError("DailySeries values must be finite")
        if self.kind not in ("raw", "transformed"):
            raise ContractError(f"unknown series kind {self.kind!r}")
        if self.kind == "raw" and np.any(vals < 0):
            raise DataQualityError("raw attendance series must be non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def end(self) -> date:
        return self.start + timedelta(days=len(self.values) - 1)

    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(len(self.values))]

    def date_at(self, i: int) -> date:
        return self.start + timedelta(days=int(i))

    def index_of(self, d: date) -> int:
        i = (d - self.start).days
        if i < 0 or i >= len(self.values):
            raise ContractError(f"date {d} outside series range")
        return i

    def slice(self, start_idx: int, stop_idx: int) -> "DailySeries":
        if not (0 <= start_idx < stop_idx <= len(self.values)):
            raise ContractError("invalid slice bounds")
        return DailySeries(self.date_at(start_idx), self.values[start_idx:stop_idx].copy(), self.kind)

    def with_values(self, values, kind=None) -> "DailySeries":
        return DailySeries(self.start, np.array(values, dtype=float), kind or self.kind)


@dataclass(frozen=True)
class ErrorSummary:
    mae: float
    mape: float
    n: int


@dataclass(frozen=True)
class Decomposition:
    trend: np.ndarray
    seasonal: np.ndarray
    remainder: np.ndarray
    period: int = 7

    def reconstruct(self) -> np.ndarray:
        return self.trend + self.seasonal + self.remainder


def _check_pair(actual, predicted):
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.ndim != 1 or p.ndim != 1:
        raise ContractError("metric inputs must be 1-d sequences")
    if a.size == 0:
        raise ContractError("metric inputs must be non-empty")
    if a.size != p.size:
        raise ContractError(f"length mismatch: {a.size} actuals vs {p.size} predictions")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
        raise ContractError("metric inputs must be finite")
    return a, p


def mae(actual, predicted) -> float:
    """Mean absolute error."""
    a, p = _check_pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent.

    Zero actuals are an error (not silently skipped): skipping would bias
    comparisons across models.
    """
    a, p = _check_pair(actual, predicted)
    zeros = np.flatnonzero(a == 0.0)
    if zeros.size:
        raise ContractError(f"mape undefined: actual is zero at index {int(zeros[0])}")
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


def error_summary(actual, predicted) -> ErrorSummary:
    a, p = _check_pair(actual, predicted)
    return ErrorSummary(mae=mae(a, p), mape=mape(a, p), n=int(a.size))


# ---------------------------------------------------------------------------
# LOESS + STL decomposition
# ---------------------------------------------------------------------------

def _tricube(u):
    w = np.clip(1.0 - np.abs(u) ** 3, 0.0, None) ** 3
    return w


def loess_smooth(y, span, eval_points=None, robust_weights=None):
    """Local linear regression with tricube weights over `span` nearest points.

    `y` is sampled at integer positions 0..n-1; `eval_points` may extrapolate
    beyond the sample (used for the STL cycle-subseries extension).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    x = np.arange(n, dtype=float)
    if eval_points is None:
        eval_points = x
    eval_points = np.asarray(eval_points, dtype=float)
    rw = np.ones(n) if robust_weights is None else np.asarray(robust_weights, dtype=float)
    q = min(int(span), n)

    # Fast path: evaluation at the sample grid with uniform robustness weights.
    # Interior points see a symmetric window, where the local-linear slope term
    # vanishes and the fit reduces to a fixed-kernel convolution.
    uniform = robust_weights is None or np.all(rw == rw[0])
    if (uniform and q % 2 == 1 and q >= 3 and eval_points.size == n
            and np.array_equal(eval_points, x)):
        half = (q - 1) // 2
        lam = float(half)
        if span > n:
            lam += (span - n) / 2.0
        kernel = _tricube(np.abs(np.arange(-half, half + 1)) / lam)
        kernel /= kernel.sum()
        out = np.empty(n)
        if n >= q:
            out[half:n - half] = np.convolve(y, kernel[::-1], mode="valid")
        edge = min(half, n)
        for i in list(range(edge)) + list(range(max(n - edge, edge), n)):
            out[i] = _loess_point(x, y, rw, q, span, n, float(i))
        return out

    out = np.empty(eval_points.size)
    for i, x0 in enumerate(eval_points):
        out[i] = _loess_point(x, y, rw, q, span, n, x0)
    return out


def _loess_point(x, y, rw, q, span, n, x0):
    d = np.abs(x - x0)
    idx = np.argpartition(d, q - 1)[:q] if q < n else np.arange(n)
    dq = d[idx]
    lam = dq.max()
    if span > n:
        # Cleveland's rule: inflate the bandwidth when span exceeds n.
        lam += (span - n) / 2.0
    if lam <= 0:
        return y[idx][0]
    w = _tricube(dq / lam) * rw[idx]
    sw = w.sum()
    if sw <= 0:
        w = np.ones_like(w)
        sw = w.sum()
    xs = x[idx]
    ys = y[idx]
    xbar = (w * xs).sum() / sw
    ybar = (w * ys).sum() / sw
    sxx = (w * (xs - xbar) ** 2).sum()
    beta = (w * (xs - xbar) * (ys - ybar)).sum() / sxx if sxx > 1e-12 * max(1.0, xbar * xbar) else 0.0
    return ybar + beta * (x0 - xbar)


def _moving_average(y, width):
    kernel = np.full(width, 1.0 / width)
    return np.convolve(y, kernel, mode="valid")


def _next_odd(x) -> int:
    k = int(np.ceil(x))
    return k if k % 2 == 1 else k + 1


def decompose_stl(series: DailySeries, period: int, seasonal_span: int = 7,
                  inner: int = 2, outer: int = 1) -> Decomposition:
    """Additive seasonal-trend decomposition via iterated LOESS smoothing.

    Fixed smoother spans: the seasonal smoother spans `seasonal_span` cycles;
    the trend window is the next odd integer >= 1.5*period/(1 - 1.5/seasonal_span).
    Two inner iterations and one robustness (outer) iteration.
    """
    if period < 2:
        raise ContractError("period must be >= 2")
    y = np.asarray(series.values, dtype=float)
    n = y.size
    if n < 2 * period:
        raise DataQualityError(f"series too short for decomposition: {n} < {2 * period}")

    nt = _next_odd(1.5 * period / (1.0 - 1.5 / seasonal_span))
    nl = _next_odd(period)

    trend = np.zeros(n)
    seasonal = np.zeros(n)
    rw = np.ones(n)

    for outer_it in range(outer + 1):
        for _ in range(inner):
            detrended = y - trend
            # Smooth each cycle-subseries, extended one cycle on both ends.
            cycle = np.empty(n + 2 * period)
            for j in range(period):
                sub = detrended[j::period]
                m = sub.size
                smoothed = loess_smooth(sub, seasonal_span,
                                        eval_points=np.arange(-1, m + 1, dtype=float),
                                        robust_weights=rw[j::period])
                positions = j + period * np.arange(-1, m + 1)
                cycle[positions + period] = smoothed
            # Low-pass filter the extended cycle-subseries.
            low = _moving_average(_moving_average(_moving_average(cycle, period), period), 3)
            low = loess_smooth(low, nl)
            seasonal = cycle[period:period + n] - low
            trend = loess_smooth(y - seasonal, nt, robust_weights=rw)
        if outer_it < outer:
            resid = y - trend - seasonal
            scale = 6.0 * np.median(np.abs(resid))
            if scale <= 1e-12:
                rw = np.ones(n)
            else:
                rw = np.clip(1.0 - (np.abs(resid) / scale) ** 2, 0.0, None) ** 2

    # Center the seasonal per complete cycle so each full period sums to ~0;
    # the removed means move into the trend.
    for k in range(n // period):
        block = slice(k * period, (k + 1) * period)
        m = seasonal[block].mean()
        seasonal[block] -= m
        trend[block] += m
    tail = slice((n // period) * period, n)
    if n % period:
        m = seasonal[tail].mean()
        seasonal[tail] -= m
        trend[tail] += m

    remainder = y - trend - seasonal
    return Decomposition(trend=trend, seasonal=seasonal, remainder=remainder, period=period)

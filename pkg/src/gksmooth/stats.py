"""Empirical distributions, quantiles, QQ curves and kernel density estimates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .core import Field

__all__ = [
    "LineFit",
    "QQCurve",
    "SampleSet",
    "empirical_cdf",
    "exponential_quantile",
    "fit_line",
    "grid_axis",
    "kde",
    "normal_cdf",
    "normal_probability_plot",
    "normal_quantile",
    "plotting_positions",
    "qq_curve",
    "sample_quantile",
]


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Finite real observations together with their order statistics."""

    values: np.ndarray
    sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if values.size == 0:
            raise ValueError("sample set must be non-empty")
        if not np.all(np.isfinite(values)):
            raise ValueError("samples must be finite")
        values.setflags(write=False)
        order = np.sort(values, kind="stable")
        order.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sorted", order)

    def __len__(self) -> int:
        return self.values.size


def _as_samples(s) -> SampleSet:
    return s if isinstance(s, SampleSet) else SampleSet(s)


def plotting_positions(n: int) -> np.ndarray:
    """``(j - 0.5) / n`` for ``j = 1..n``."""
    return (np.arange(1, n + 1) - 0.5) / n


def empirical_cdf(s, q):
    """Fraction of samples ``<= q``; ``q`` may be a scalar or an array."""
    s = _as_samples(s)
    counts = np.searchsorted(s.sorted, q, side="right")
    out = counts / len(s)
    return float(out) if np.ndim(out) == 0 else out


def _check_open_unit(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("probabilities must lie strictly between 0 and 1")
    return p


def sample_quantile(s, p):
    """Sample quantile with ``X_(j)`` placed at ``(j - 0.5) / n``.

    Linear interpolation between neighbouring plotting positions; clamped to
    the extreme order statistics outside ``[0.5/n, 1 - 0.5/n]``.
    """
    s = _as_samples(s)
    p = _check_open_unit(p)
    out = np.interp(p, plotting_positions(len(s)), s.sorted)
    return float(out) if out.ndim == 0 else out


def normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * np.frompyfunc(math.erfc, 1, 1)(-x / math.sqrt(2.0)).astype(np.float64)
    return float(out) if out.ndim == 0 else out


# Acklam's rational approximation to the normal quantile (rel. error ~1e-9)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    a, b, c, d = _A, _B, _C, _D
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        q = math.sqrt(-2.0 * math.log1p(-p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def _normal_quantile_scalar(p: float) -> float:
    x = _acklam(p)
    # one Halley step on the erfc-based CDF; the upper tail works with 1 - p,
    # which is exact for p >= 0.5
    if x <= 0:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_quantile(p):
    """Inverse standard normal CDF, accurate to about 1e-15 relative."""
    p = _check_open_unit(p)
    if p.ndim == 0:
        return _normal_quantile_scalar(float(p))
    return np.array([_normal_quantile_scalar(v) for v in p.ravel()]).reshape(p.shape)


def exponential_quantile(rate: float, p):
    """Quantile ``-ln(1 - p) / rate`` of the exponential law with the given rate."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p >= 1)):
        raise ValueError("p must lie in [0, 1)")
    out = -np.log1p(-p) / rate
    return float(out) if out.ndim == 0 else out


QuantileSource = Union[SampleSet, Sequence[float], np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class QQCurve:
    """Paired quantiles ``(qx[k], qy[k])`` at increasing probabilities ``p[k]``."""

    p: np.ndarray
    qx: np.ndarray
    qy: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.p) == len(self.qx) == len(self.qy)):
            raise ValueError("p, qx and qy must have equal length")
        if np.any(np.diff(self.p) <= 0):
            raise ValueError("p must be strictly increasing")

    def __len__(self) -> int:
        return len(self.p)


def _quantiles(src: QuantileSource, p: np.ndarray) -> np.ndarray:
    if callable(src) and not isinstance(src, SampleSet):
        return np.asarray(src(p), dtype=np.float64)
    return np.asarray(sample_quantile(_as_samples(src), p), dtype=np.float64)


def qq_curve(x: QuantileSource, y: QuantileSource, n_points: int = 100) -> QQCurve:
    """QQ curve on the grid ``p = (j - 0.5) / n_points``.

    Each side is either a sample (sample quantiles are used) or a quantile
    function such as :func:`normal_quantile`.
    """
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    p = plotting_positions(n_points)
    return QQCurve(p, _quantiles(x, p), _quantiles(y, p))


def normal_probability_plot(s) -> QQCurve:
    """Order statistics against standard normal quantiles at ``(j - 0.5) / n``."""
    s = _as_samples(s)
    if len(s) < 3:
        raise ValueError(f"normal probability plot needs n >= 3, got {len(s)}")
    p = plotting_positions(len(s))
    return QQCurve(p, normal_quantile(p), s.sorted.copy())


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    @property
    def degenerate(self) -> bool:
        """True when R^2 is undefined (a constant coordinate)."""
        return math.isnan(self.r_squared)


def fit_line(curve: QQCurve, trim: float = 0.05) -> LineFit:
    """Least-squares line of ``qy`` on ``qx`` over points with ``trim <= p <= 1 - trim``.

    The default keeps the middle 90%, ignoring the noisy extremes.
    """
    keep = (curve.p >= trim) & (curve.p <= 1.0 - trim)
    x = np.asarray(curve.qx)[keep]
    y = np.asarray(curve.qy)[keep]
    if x.size < 2:
        raise ValueError("fewer than two points left after trimming")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    sxy = float(dx @ dy)
    if sxx == 0:
        return LineFit(math.nan, math.nan, math.nan, int(x.size))
    slope = sxy / sxx
    r2 = sxy * sxy / (sxx * syy) if syy > 0 else math.nan
    return LineFit(slope, float(y.mean() - slope * x.mean()), r2, int(x.size))


def grid_axis(start: float, step: float, stop: float) -> np.ndarray:
    """Nodes ``start, start + step, ...`` up to and including ``stop``."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"empty grid {start}:{step}:{stop}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def kde(points, sigma: float, axes: Sequence[np.ndarray]) -> Field:
    """Gaussian kernel density estimate ``(1/n) sum_i K_sigma(x - x_i)`` on a grid.

    Parameters
    ----------
    points : array_like
        Shape ``(n,)`` for 1-D data or ``(n, d)``.
    sigma : float
        Bandwidth of the (untruncated) product Gaussian kernel.
    axes : sequence of 1-D arrays
        Ascending, evenly spaced node coordinates, one array per dimension.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must have shape (n,) or (n, d) with n >= 1")
    axes = [np.asarray(a, dtype=np.float64) for a in axes]
    if len(axes) != pts.shape[1]:
        raise ValueError(f"{len(axes)} grid axes for {pts.shape[1]}-D points")
    spacing = []
    for k, a in enumerate(axes):
        if a.ndim != 1 or a.size == 0:
            raise ValueError("each grid axis must be a non-empty 1-D array")
        if np.any(pts[:, k] < a[0]) or np.any(pts[:, k] > a[-1]):
            warnings.warn(f"grid axis {k} does not cover the data", stacklevel=2)
        spacing.append(float(a[1] - a[0]) if a.size > 1 else 1.0)

    norm = 1.0 / (math.sqrt(2.0 * math.pi) * sigma)
    factors = [
        norm * np.exp(-0.5 * ((a[None, :] - pts[:, k, None]) / sigma) ** 2)
        for k, a in enumerate(axes)
    ]
    letters = "abcdefghijklmnopqrstuvwxyz"[: len(axes)]
    spec = ",".join("n" + c for c in letters) + "->" + letters
    density = np.einsum(spec, *factors) / pts.shape[0]
    return Field(density, spacing)

"""Seeded random draws and the smoothing experiments.

Random numbers come from the PCG64 bit generator (a fixed, documented
algorithm whose raw 64-bit stream is stable across platforms and NumPy
releases). Uniforms, normals and exponentials are derived from the raw
stream here rather than through ``numpy.random.Generator`` methods, whose
output is not guaranteed stable between releases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .convolve import smooth
from .core import Field, separable_kernel
from .stats import (
    SampleSet,
    exponential_quantile,
    fit_line,
    normal_probability_plot,
)

__all__ = [
    "ExperimentReport",
    "KEY_EDGE_PIXEL",
    "KEY_SHAPE",
    "Rng",
    "experiment_1d",
    "experiment_2d",
    "experiment_gaussianness",
    "experiment_key",
    "exponential_draws",
    "key_image",
    "normal_draws",
    "rmse",
]


class Rng:
    """Deterministic generator seeded by a non-negative 64-bit integer."""

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.spawn_key = tuple(_spawn_key)
        self._bits = np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.spawn_key))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, spawn_key={self.spawn_key})"

    def child(self, index: int) -> "Rng":
        """Independent stream derived from this generator's seed, not its state."""
        return Rng(self.seed, self.spawn_key + (int(index),))

    def uniform(self, count: int) -> np.ndarray:
        """``count`` doubles in ``[0, 1)`` with 53 random bits each."""
        raw = self._bits.random_raw(count)
        return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, mu: float = 0.0, sigma: float = 1.0, shape=1) -> np.ndarray:
        """Polar Box-Muller normals, filled in row-major order."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape))
        out = np.empty(count)
        filled = 0
        while filled < count:
            pairs = int((count - filled) / 2 / 0.78) + 16
            v = 2.0 * self.uniform(2 * pairs).reshape(pairs, 2) - 1.0
            s = v[:, 0] ** 2 + v[:, 1] ** 2
            ok = (s > 0) & (s < 1)
            v, s = v[ok], s[ok]
            z = (v * np.sqrt(-2.0 * np.log(s) / s)[:, None]).ravel()
            take = min(z.size, count - filled)
            out[filled:filled + take] = z[:take]
            filled += take
        return (mu + sigma * out).reshape(shape)


def normal_draws(rng: Rng, mu: float, sigma: float, count: int) -> SampleSet:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return SampleSet(rng.normal(mu, sigma, count))


def exponential_draws(rng: Rng, rate: float, count: int) -> SampleSet:
    """Inverse-transform draws ``-ln(1 - U) / rate``."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return SampleSet(exponential_quantile(rate, rng.uniform(count)))


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


@dataclass
class ExperimentReport:
    """Parameters, scalar metrics and array outputs of one experiment run."""

    name: str
    parameters: dict[str, Any]
    metrics: dict[str, float]
    data: dict[str, Any] = field(default_factory=dict, repr=False)
    files: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"experiment={self.name}"]
        lines += [f"param.{k}={_fmt(v)}" for k, v in self.parameters.items()]
        lines += [f"metric.{k}={_fmt(v)}" for k, v in self.metrics.items()]
        lines += [f"file={f}" for f in self.files]
        return "\n".join(lines) + "\n"


def _fmt(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _noise(rng: Rng, sd: float, shape) -> np.ndarray:
    if sd < 0:
        raise ValueError(f"noise_sd must be non-negative, got {sd}")
    if sd == 0:
        return np.zeros(shape)
    return rng.normal(0.0, sd, shape)


def experiment_1d(
    rng: Rng,
    bandwidth_sigma: float = 10.0,
    noise_sd: float = 2.0,
    radius: int = 5,
    boundary: str = "zero",
) -> ExperimentReport:
    """Parabola ``(t - 50)^2 / 500`` on t = 1..100 plus noise, then smoothed.

    The default 11-point window and zero padding mirror a 'same'-shaped
    convolution with offsets -5..5.
    """
    t = np.arange(1, 101, dtype=np.float64)
    mu = (t - 50.0) ** 2 / 500.0
    y = mu + _noise(rng, noise_sd, t.shape)
    kernel = separable_kernel(bandwidth_sigma, radius, rank=1)
    ys = smooth(Field(y), kernel, boundary).values
    return ExperimentReport(
        name="1d",
        parameters={
            "seed": rng.seed, "bandwidth_sigma": bandwidth_sigma, "noise_sd": noise_sd,
            "radius": radius, "boundary": boundary,
        },
        metrics={"rmse_noisy": rmse(y, mu), "rmse_smoothed": rmse(ys, mu)},
        data={"t": t, "signal": mu, "noisy": y, "smoothed": ys},
    )


def experiment_2d(
    rng: Rng,
    bandwidth_sigma: float = 1.0,
    noise_sd: float = 0.4,
    radius: int = 2,
    boundary: str = "zero",
) -> ExperimentReport:
    """``cos(10 x) + sin(8 y)`` on the 101 x 101 grid over [0, 1]^2, plus noise.

    Rows index y and columns index x, so entry ``[i, j]`` sits at
    ``(x, y) = (j / 100, i / 100)``.
    """
    g = np.arange(101) / 100.0
    px, py = np.meshgrid(g, g)
    mu = np.cos(10.0 * px) + np.sin(8.0 * py)
    y = mu + _noise(rng, noise_sd, mu.shape)
    kernel = separable_kernel(bandwidth_sigma, radius, rank=2)
    ys = smooth(Field(y), kernel, boundary).values
    return ExperimentReport(
        name="2d",
        parameters={
            "seed": rng.seed, "bandwidth_sigma": bandwidth_sigma, "noise_sd": noise_sd,
            "radius": radius, "boundary": boundary,
        },
        metrics={"rmse_noisy": rmse(y, mu), "rmse_smoothed": rmse(ys, mu)},
        data={"signal": mu, "noisy": y, "smoothed": ys},
    )


KEY_SHAPE = (596, 368)
#: (row, col), zero-based: left edge of the key shaft, with background at col 163.
KEY_EDGE_PIXEL = (314, 164)


def key_image(shape: tuple[int, int] = KEY_SHAPE) -> np.ndarray:
    """Binary key-like test image with values in {0, 1}.

    Drawn on a 596 x 368 canvas (rows x cols): an annular bow centred at
    (130, 184) with radii 45 and 95, a shaft over rows 215-539 and columns
    164-203, and three teeth on the shaft's right side. Other shapes are
    rescaled from this layout.
    """
    h, w = shape
    sy, sx = h / KEY_SHAPE[0], w / KEY_SHAPE[1]
    r, c = np.mgrid[0:h, 0:w]
    r = (r + 0.5) / sy - 0.5
    c = (c + 0.5) / sx - 0.5
    d2 = (r - 130.0) ** 2 + (c - 184.0) ** 2
    key = (d2 <= 95.0**2) & (d2 >= 45.0**2)
    key |= (r >= 215) & (r < 540) & (c >= 164) & (c < 204)
    for top, bottom, right in ((430, 456, 250), (480, 506, 240), (515, 540, 260)):
        key |= (r >= top) & (r < bottom) & (c >= 204) & (c < right)
    return key.astype(np.float64)


def experiment_key(
    rng: Rng,
    sigmas: Sequence[float] = (1.0, 10.0),
    noise_sd: float = 5.0,
    radius: int = 10,
    boundary: str = "zero",
) -> ExperimentReport:
    """Recover the key image from heavy noise with a 21 x 21 window per bandwidth."""
    signal = key_image()
    f = signal + _noise(rng, noise_sd, signal.shape)
    metrics = {"rmse_raw": rmse(f, signal)}
    data: dict[str, Any] = {"signal": signal, "noisy": f}
    for s in sigmas:
        out = smooth(Field(f), separable_kernel(s, radius, rank=2), boundary).values
        metrics[f"rmse_sigma_{_fmt(float(s))}"] = rmse(out, signal)
        data[f"smoothed_sigma_{_fmt(float(s))}"] = out
    return ExperimentReport(
        name="key",
        parameters={
            "seed": rng.seed, "sigmas": [float(s) for s in sigmas], "noise_sd": noise_sd,
            "radius": radius, "boundary": boundary,
        },
        metrics=metrics,
        data=data,
    )


def experiment_gaussianness(
    rng: Rng,
    n_reps: int = 50,
    sigma: float = 100.0,
    pixel: tuple[int, int] = KEY_EDGE_PIXEL,
    noise_sd: float = 5.0,
    radius: int = 10,
    boundary: str = "zero",
) -> ExperimentReport:
    """Raw and smoothed value at one key-edge pixel over repeated noise fields.

    Repetition ``i`` draws its noise from ``rng.child(i)``. The expected
    variance ratio of smoothed to raw values is the sum of squared dense
    kernel weights.
    """
    if n_reps < 2:
        raise ValueError(f"n_reps must be >= 2 for a variance, got {n_reps}")
    signal = key_image()
    row, col = pixel
    h, w = signal.shape
    if not (radius <= row < h - radius and radius <= col < w - radius):
        raise ValueError(f"pixel {pixel} is not at least {radius} from the image border")
    kernel = separable_kernel(sigma, radius, rank=2)
    raw = np.empty(n_reps)
    smoothed = np.empty(n_reps)
    for i in range(n_reps):
        f = signal + _noise(rng.child(i), noise_sd, signal.shape)
        raw[i] = f[row, col]
        smoothed[i] = smooth(Field(f), kernel, boundary).values[row, col]

    qq_raw = normal_probability_plot(raw)
    qq_smooth = normal_probability_plot(smoothed)
    var_raw = float(np.var(raw, ddof=1))
    var_smooth = float(np.var(smoothed, ddof=1))
    expected = float(np.sum(kernel.dense() ** 2))
    ratio = var_smooth / var_raw if var_raw > 0 else math.nan
    return ExperimentReport(
        name="gaussianness",
        parameters={
            "seed": rng.seed, "n_reps": n_reps, "sigma": sigma, "pixel": list(pixel),
            "noise_sd": noise_sd, "radius": radius, "boundary": boundary,
        },
        metrics={
            "var_raw": var_raw,
            "var_smoothed": var_smooth,
            "variance_ratio": ratio,
            "expected_variance_ratio": expected,
            "r2_raw": fit_line(qq_raw).r_squared,
            "r2_smoothed": fit_line(qq_smooth).r_squared,
        },
        data={"raw": raw, "smoothed": smoothed, "qq_raw": qq_raw, "qq_smoothed": qq_smooth},
    )

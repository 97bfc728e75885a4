"""Fields, Gaussian kernels, bandwidth conversions and scale-space stacks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "FWHM_PER_SIGMA",
    "Field",
    "Kernel1D",
    "SeparableKernel",
    "default_radius",
    "fwhm_to_sigma",
    "gaussian_kernel_1d",
    "scale_space",
    "separable_kernel",
    "sigma_to_fwhm",
]

#: Ratio FWHM / sigma of a Gaussian, 2 sqrt(2 ln 2).
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Field:
    """An n-dimensional grid of real samples with per-axis spacing.

    ``values`` is stored as a read-only float64 array whose shape is the
    field's ``dims``; ``spacing`` defaults to 1.0 along every axis.
    """

    values: np.ndarray
    spacing: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim == 0:
            raise ValueError("field must have at least one axis")
        if any(d < 1 for d in values.shape):
            raise ValueError(f"every extent must be >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        spacing = tuple(float(s) for s in self.spacing) or (1.0,) * values.ndim
        if len(spacing) != values.ndim:
            raise ValueError(
                f"spacing has {len(spacing)} entries for a rank-{values.ndim} field"
            )
        if not all(s > 0 and math.isfinite(s) for s in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def rank(self) -> int:
        return self.values.ndim

    def with_values(self, values: np.ndarray) -> "Field":
        """Same grid, new samples."""
        return Field(values, self.spacing)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Field):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.dims == other.dims
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Kernel1D:
    """Discrete normalized Gaussian weights of length ``2 * radius + 1``."""

    sigma: float
    radius: int
    weights: np.ndarray
    spacing: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen(self.weights))
        if self.weights.shape != (2 * self.radius + 1,):
            raise ValueError("weights length must be 2 * radius + 1")

    @property
    def size(self) -> int:
        return 2 * self.radius + 1


@dataclass(frozen=True)
class SeparableKernel:
    """Product kernel: one :class:`Kernel1D` per field axis."""

    axes: tuple[Kernel1D, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ValueError("separable kernel needs at least one axis")

    @property
    def rank(self) -> int:
        return len(self.axes)

    def dense(self) -> np.ndarray:
        """Materialize the outer product of the per-axis weights."""
        out = self.axes[0].weights
        for k in self.axes[1:]:
            out = np.multiply.outer(out, k.weights)
        return out


def sigma_to_fwhm(sigma: float) -> float:
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    return sigma * FWHM_PER_SIGMA


def fwhm_to_sigma(fwhm: float) -> float:
    """Convert a full width at half maximum to the Gaussian bandwidth."""
    if fwhm < 0:
        raise ValueError(f"fwhm must be non-negative, got {fwhm}")
    return fwhm / FWHM_PER_SIGMA


def default_radius(sigma: float, spacing: float = 1.0) -> int:
    """Truncation radius ``ceil(4 sigma / spacing)``, at least 1."""
    return max(1, math.ceil(4.0 * sigma / spacing))


def gaussian_kernel_1d(
    sigma: float, radius: int | None = None, spacing: float = 1.0
) -> Kernel1D:
    """Sampled Gaussian ``exp(-(k h)^2 / (2 sigma^2))`` renormalized to unit sum.

    Parameters
    ----------
    sigma : float
        Bandwidth, in the same length units as ``spacing``.
    radius : int, optional
        Half-width in grid steps. Defaults to :func:`default_radius`.
    spacing : float
        Grid step ``h``.

    The weights are built from one half and mirrored, so ``w[r-k] == w[r+k]``
    holds bit for bit.
    """
    if not sigma > 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if radius is None:
        radius = default_radius(sigma, spacing)
    if int(radius) != radius or radius < 1:
        raise ValueError(f"radius must be an integer >= 1, got {radius}")
    radius = int(radius)

    t = np.arange(radius + 1) * spacing
    half = np.exp(-(t * t) / (2.0 * sigma * sigma))
    total = half[0] + 2.0 * math.fsum(half[1:])
    half = half / total
    weights = np.concatenate([half[:0:-1], half])
    return Kernel1D(sigma=float(sigma), radius=radius, weights=weights, spacing=float(spacing))


def separable_kernel(
    sigma: float,
    radius: int | None = None,
    rank: int = 2,
    spacing: Sequence[float] | None = None,
) -> SeparableKernel:
    """Isotropic product kernel with one normalized 1-D factor per axis.

    When ``radius`` is None each axis gets its own default radius for its
    spacing.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if spacing is None:
        spacing = (1.0,) * rank
    if len(spacing) != rank:
        raise ValueError(f"spacing has {len(spacing)} entries for rank {rank}")
    return SeparableKernel(tuple(gaussian_kernel_1d(sigma, radius, h) for h in spacing))


def scale_space(
    field: Field,
    sigmas: Sequence[float],
    radius: int | None = None,
    boundary: str = "zero",
) -> list[Field]:
    """Smoothed copies of ``field``, one per bandwidth, fine to coarse.

    ``radius`` fixes the window for every level; by default each level uses
    the ``ceil(4 sigma / spacing)`` rule.
    """
    from .convolve import smooth

    sigmas = [float(s) for s in sigmas]
    if not sigmas:
        raise ValueError("sigmas must be non-empty")
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError(f"sigmas must be strictly ascending, got {sigmas}")
    return [
        smooth(field, separable_kernel(s, radius, field.rank, field.spacing), boundary)
        for s in sigmas
    ]

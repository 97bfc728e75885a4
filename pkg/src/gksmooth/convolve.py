"""Separable 'same'-shaped convolution with explicit boundary handling.

All passes are implemented as correlation; Gaussian kernels are symmetric,
so this is indistinguishable from convolution.
"""
from __future__ import annotations

import enum
import itertools
from typing import Sequence

import numpy as np

from .core import Field, Kernel1D, SeparableKernel

__all__ = ["BoundaryMode", "convolve_axis", "convolve_dense", "smooth"]


class BoundaryMode(enum.Enum):
    """How samples outside the grid are supplied.

    ZERO pads with zeros. REFLECT mirrors about the outer sample edge
    (``c b a | a b c``), which preserves the sum of the field. REPLICATE
    repeats the outermost sample.
    """

    ZERO = "zero"
    REFLECT = "reflect"
    REPLICATE = "replicate"

    @classmethod
    def parse(cls, mode: "BoundaryMode | str") -> "BoundaryMode":
        if isinstance(mode, cls):
            return mode
        try:
            return cls(str(mode).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown boundary mode {mode!r}; expected one of {names}") from None


_NP_PAD = {
    BoundaryMode.ZERO: "constant",
    BoundaryMode.REFLECT: "symmetric",
    BoundaryMode.REPLICATE: "edge",
}


def _check_axis(field: Field, kernel: Kernel1D, axis: int) -> int:
    if not -field.rank <= axis < field.rank:
        raise ValueError(f"axis {axis} out of range for rank-{field.rank} field")
    axis %= field.rank
    if kernel.radius >= field.dims[axis]:
        raise ValueError(
            f"kernel radius {kernel.radius} too wide for extent {field.dims[axis]} "
            f"along axis {axis}"
        )
    return axis


def _correlate_axis(x: np.ndarray, weights: np.ndarray, axis: int, mode: BoundaryMode) -> np.ndarray:
    r = (len(weights) - 1) // 2
    pad = [(0, 0)] * x.ndim
    pad[axis] = (r, r)
    xp = np.pad(x, pad, mode=_NP_PAD[mode])
    n = x.shape[axis]
    out = np.zeros(x.shape, dtype=np.float64)
    index = [slice(None)] * x.ndim
    # fixed summation order k = 0..2r keeps results independent of how lines are batched
    for k, w in enumerate(weights):
        index[axis] = slice(k, k + n)
        out += w * xp[tuple(index)]
    return out


def convolve_axis(
    field: Field,
    kernel: Kernel1D,
    axis: int,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
) -> Field:
    """Convolve ``field`` with a 1-D kernel along one axis, keeping its shape."""
    mode = BoundaryMode.parse(boundary)
    axis = _check_axis(field, kernel, axis)
    return field.with_values(_correlate_axis(field.values, kernel.weights, axis, mode))


def smooth(
    field: Field,
    kernel: SeparableKernel,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
    order: Sequence[int] | None = None,
) -> Field:
    """Apply the separable kernel as one 1-D pass per axis.

    ``order`` permutes the axis passes; the result does not depend on it
    beyond rounding.
    """
    mode = BoundaryMode.parse(boundary)
    if kernel.rank != field.rank:
        raise ValueError(f"rank-{kernel.rank} kernel applied to rank-{field.rank} field")
    axes = range(field.rank) if order is None else list(order)
    if sorted(axes) != list(range(field.rank)):
        raise ValueError(f"order must be a permutation of the axes, got {order}")
    for a in axes:
        _check_axis(field, kernel.axes[a], a)
    x = field.values
    for a in axes:
        x = _correlate_axis(x, kernel.axes[a].weights, a, mode)
    return field.with_values(x)


def _source_index(i: np.ndarray, n: int, mode: BoundaryMode) -> np.ndarray:
    # maps virtual indices to real ones; n is the zero slot for ZERO
    if mode is BoundaryMode.ZERO:
        return np.where((i < 0) | (i >= n), n, i)
    if mode is BoundaryMode.REPLICATE:
        return np.clip(i, 0, n - 1)
    m = np.mod(i, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def convolve_dense(
    field: Field,
    kernel: SeparableKernel,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
) -> Field:
    """Brute-force n-D window sum with the materialized outer-product kernel.

    Shares no code with :func:`smooth` beyond argument checking; used as the
    reference it is tested against.
    """
    mode = BoundaryMode.parse(boundary)
    if kernel.rank != field.rank:
        raise ValueError(f"rank-{kernel.rank} kernel applied to rank-{field.rank} field")
    for a in range(field.rank):
        _check_axis(field, kernel.axes[a], a)
    dense = kernel.dense()
    radii = [k.radius for k in kernel.axes]
    x = field.values
    if mode is BoundaryMode.ZERO:
        x = np.pad(x, [(0, 1)] * x.ndim)
    # one gather through the boundary map builds the extended grid
    ext = x[np.ix_(*(
        _source_index(np.arange(-r, n + r), n, mode) for n, r in zip(field.dims, radii)
    ))]
    out = np.zeros(field.dims, dtype=np.float64)
    for pos in itertools.product(*(range(2 * r + 1) for r in radii)):
        window = tuple(slice(j, j + n) for j, n in zip(pos, field.dims))
        out += dense[pos] * ext[window]
    return field.with_values(out)

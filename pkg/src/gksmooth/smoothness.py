"""Effective FWHM of residual noise, estimated along lattice edges.

For ``n`` residual images, residuals at each voxel are scaled to unit
length across images. Along an edge of length ``dx`` joining voxels 1 and
2, ``du = ||u_1 - u_2||``, roughness ``lam = du / dx`` and the edge's
effective FWHM is ``sqrt(4 ln 2) / lam``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import Field

__all__ = [
    "DegenerateResidualError",
    "EdgeEstimate",
    "EfwhmSummary",
    "ResidualEnsemble",
    "edge_efwhm",
    "field_efwhm",
    "normalize_residuals",
]

SQRT_4LN2 = math.sqrt(4.0 * math.log(2.0))


class DegenerateResidualError(ValueError):
    """A voxel has zero residual in every image, so it cannot be normalized."""

    def __init__(self, voxel: tuple[int, ...]):
        self.voxel = voxel
        super().__init__(f"all residuals are zero at voxel {voxel}")


@dataclass(frozen=True)
class ResidualEnsemble:
    """``n >= 2`` residual images on a common lattice.

    Stored as one array of shape ``(n, *dims)``; image ``i`` is ``data[i]``.
    """

    data: np.ndarray
    spacing: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim < 2:
            raise ValueError("ensemble data must have shape (n_images, *dims)")
        if data.shape[0] < 2:
            raise ValueError(f"need at least 2 images, got {data.shape[0]}")
        data.setflags(write=False)
        spacing = tuple(float(s) for s in self.spacing) or (1.0,) * (data.ndim - 1)
        # validates dims/spacing/finiteness once
        Field(data[0], spacing)
        if not np.all(np.isfinite(data)):
            raise ValueError("residuals must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def from_fields(cls, fields: Sequence[Field]) -> "ResidualEnsemble":
        fields = list(fields)
        if len(fields) < 2:
            raise ValueError(f"need at least 2 images, got {len(fields)}")
        first = fields[0]
        for f in fields[1:]:
            if f.dims != first.dims or f.spacing != first.spacing:
                raise ValueError("all residual fields must share dims and spacing")
        return cls(np.stack([f.values for f in fields]), first.spacing)

    @classmethod
    def demeaned(cls, fields: Sequence[Field]) -> "ResidualEnsemble":
        """Residuals of the mean-only model: each image minus the voxelwise mean."""
        ens = cls.from_fields(fields)
        return cls(ens.data - ens.data.mean(axis=0), ens.spacing)

    @property
    def n_images(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def fields(self) -> list[Field]:
        return [Field(x, self.spacing) for x in self.data]

    def scaled(self, c: float) -> "ResidualEnsemble":
        return ResidualEnsemble(self.data * c, self.spacing)


@dataclass(frozen=True)
class EdgeEstimate:
    voxel_a: tuple[int, ...]
    voxel_b: tuple[int, ...]
    axis: int
    delta_u: float
    roughness: float
    efwhm: float


def normalize_residuals(ens: ResidualEnsemble) -> ResidualEnsemble:
    """Scale residuals so that at every voxel the squares sum to one over images."""
    norm = np.sqrt(np.einsum("i...,i...->...", ens.data, ens.data))
    bad = np.argwhere(norm == 0)
    if len(bad):
        raise DegenerateResidualError(tuple(int(i) for i in bad[0]))
    return ResidualEnsemble(ens.data / norm, ens.spacing)


def _efwhm(lam: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(lam > 0, SQRT_4LN2 / np.where(lam > 0, lam, 1.0), np.inf)


def edge_efwhm(
    ens_normalized: ResidualEnsemble,
    voxel_a: Sequence[int],
    voxel_b: Sequence[int],
    delta_x: float | None = None,
) -> EdgeEstimate:
    """Roughness and effective FWHM along one lattice edge.

    ``delta_x`` defaults to the ensemble's spacing along the edge's axis.
    The ensemble must already be normalized.
    """
    a = tuple(int(i) for i in voxel_a)
    b = tuple(int(i) for i in voxel_b)
    if len(a) != len(ens_normalized.dims) or len(b) != len(a):
        raise ValueError("voxel indices must match the ensemble rank")
    diff = [abs(i - j) for i, j in zip(a, b)]
    if sorted(diff) != [0] * (len(diff) - 1) + [1]:
        raise ValueError(f"voxels {a} and {b} are not adjacent along one axis")
    axis = diff.index(1)
    if delta_x is None:
        delta_x = ens_normalized.spacing[axis]
    if not delta_x > 0:
        raise ValueError(f"delta_x must be positive, got {delta_x}")
    ua = ens_normalized.data[(slice(None),) + a]
    ub = ens_normalized.data[(slice(None),) + b]
    du = math.sqrt(math.fsum((ua - ub) ** 2))
    lam = du / delta_x
    return EdgeEstimate(a, b, axis, du, lam, float(_efwhm(np.array(lam))))


@dataclass(frozen=True)
class EfwhmSummary:
    """Per-edge estimates for every lattice edge plus scalar summaries.

    Edge ``e`` joins flat voxel index ``start[e]`` to its neighbour one step
    along ``axis[e]``. ``interior[e]`` marks the edges that feed the
    summaries.
    """

    dims: tuple[int, ...]
    axis: np.ndarray
    start: np.ndarray
    delta_u: np.ndarray
    roughness: np.ndarray
    efwhm: np.ndarray
    interior: np.ndarray
    median: float
    rms_efwhm: float
    n_edges: int
    n_infinite: int

    def estimates(self) -> Iterator[EdgeEstimate]:
        for e in range(len(self.axis)):
            a = tuple(int(i) for i in np.unravel_index(self.start[e], self.dims))
            b = list(a)
            b[self.axis[e]] += 1
            yield EdgeEstimate(
                a, tuple(b), int(self.axis[e]),
                float(self.delta_u[e]), float(self.roughness[e]), float(self.efwhm[e]),
            )

    def summary(self) -> dict[str, float | int]:
        return {
            "n_edges": self.n_edges,
            "n_infinite": self.n_infinite,
            "median_efwhm": self.median,
            "rms_roughness_efwhm": self.rms_efwhm,
        }


def field_efwhm(ens: ResidualEnsemble, margin: int = 1) -> EfwhmSummary:
    """Estimate effective FWHM on every edge of the lattice.

    Parameters
    ----------
    ens : ResidualEnsemble
        Raw (unnormalized) residuals.
    margin : int
        Edges with an endpoint closer than ``margin`` voxels to any face are
        reported but left out of the summaries. Use the smoothing radius to
        drop edges biased by zero padding; ``0`` keeps every edge.

    The headline number is ``median`` over finite interior estimates, with
    infinite ones counted in ``n_infinite``. ``rms_efwhm`` is
    ``sqrt(4 ln 2) / sqrt(mean(lam^2))`` over the same edges.
    """
    if any(d < 2 for d in ens.dims):
        raise ValueError(f"every axis needs extent >= 2, got {ens.dims}")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    u = normalize_residuals(ens).data
    dims = ens.dims
    flat = np.arange(int(np.prod(dims))).reshape(dims)
    coords = np.indices(dims)

    axes, starts, dus, lams, inner = [], [], [], [], []
    for ax in range(len(dims)):
        lo = [slice(None)] * len(dims)
        hi = [slice(None)] * len(dims)
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        d = u[(slice(None),) + tuple(lo)] - u[(slice(None),) + tuple(hi)]
        du = np.sqrt(np.einsum("i...,i...->...", d, d))
        ok = np.ones(du.shape, dtype=bool)
        for k, n in enumerate(dims):
            c = coords[k][tuple(lo)]
            top = c + (1 if k == ax else 0)
            ok &= (c >= margin) & (top <= n - 1 - margin)
        axes.append(np.full(du.size, ax))
        starts.append(flat[tuple(lo)].ravel())
        dus.append(du.ravel())
        lams.append(du.ravel() / ens.spacing[ax])
        inner.append(ok.ravel())

    axis = np.concatenate(axes)
    start = np.concatenate(starts)
    delta_u = np.concatenate(dus)
    lam = np.concatenate(lams)
    interior = np.concatenate(inner)
    efwhm = _efwhm(lam)

    sel = efwhm[interior]
    finite = np.sort(sel[np.isfinite(sel)])
    median = float(np.median(finite)) if finite.size else math.inf
    mean_sq = float(np.mean(lam[interior] ** 2)) if interior.any() else 0.0
    rms = SQRT_4LN2 / math.sqrt(mean_sq) if mean_sq > 0 else math.inf
    return EfwhmSummary(
        dims=tuple(dims), axis=axis, start=start, delta_u=delta_u, roughness=lam,
        efwhm=efwhm, interior=interior, median=median, rms_efwhm=rms,
        n_edges=int(interior.sum()), n_infinite=int(sel.size - finite.size),
    )

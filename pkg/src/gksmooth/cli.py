"""Command-line interface and the mask blurring workflow.

Every subcommand is a thin wrapper: parse flags, load files, call one
library routine, serialize the result.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import formats
from .convolve import BoundaryMode, smooth
from .core import Field, fwhm_to_sigma, scale_space, separable_kernel
from .sim import (
    Rng,
    experiment_1d,
    experiment_2d,
    experiment_gaussianness,
    experiment_key,
)
from .smoothness import ResidualEnsemble, field_efwhm
from .stats import (
    QQCurve,
    SampleSet,
    exponential_quantile,
    grid_axis,
    kde,
    normal_quantile,
    qq_curve,
)

__all__ = ["gaussblur_fwhm", "main"]


def gaussblur_fwhm(
    field: Field,
    fwhm: float,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
    radius: int | None = None,
) -> Field:
    """Isotropic Gaussian blur with the bandwidth given as a FWHM, any rank."""
    if not fwhm > 0:
        raise ValueError(f"fwhm must be positive, got {fwhm}")
    kernel = separable_kernel(fwhm_to_sigma(fwhm), radius, field.rank, field.spacing)
    return smooth(field, kernel, boundary)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line diagnostic, exit 2
        self.exit(2, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None


def _qq_source(spec: str):
    if spec == "normal":
        return normal_quantile
    if spec.startswith("exp:"):
        rate = float(spec[4:])
        if not rate > 0:
            raise ValueError(f"exponential rate must be positive, got {rate}")
        return lambda p: exponential_quantile(rate, p)
    _, table = formats.read_csv_table(spec)
    return SampleSet(table[:, 0])


def write_qq_svg(path, curve: QQCurve, size: int = 400) -> None:
    """Polyline of the curve scaled into a square viewport."""
    x, y = np.asarray(curve.qx), np.asarray(curve.qy)

    def scale(v):
        lo, hi = float(v.min()), float(v.max())
        span = hi - lo if hi > lo else 1.0
        return (v - lo) / span

    px = 10 + scale(x) * (size - 20)
    py = size - 10 - scale(y) * (size - 20)
    pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
    Path(path).write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<polyline fill="none" stroke="black" points="{pts}"/>\n</svg>\n'
    )


def write_qq(path, curve: QQCurve) -> None:
    if Path(path).suffix.lower() == ".svg":
        write_qq_svg(path, curve)
    else:
        formats.write_csv_table(path, ["p", "qx", "qy"], [curve.p, curve.qx, curve.qy])


def _cmd_smooth(args) -> None:
    field = formats.read_field(args.inp)
    if args.fwhm is not None:
        out = gaussblur_fwhm(field, args.fwhm, args.boundary, args.radius)
    else:
        kernel = separable_kernel(args.sigma, args.radius, field.rank, field.spacing)
        out = smooth(field, kernel, args.boundary)
    formats.write_field(args.out, out)


def _cmd_scalespace(args) -> None:
    field = formats.read_field(args.inp)
    levels = scale_space(field, _floats(args.sigmas), args.radius, args.boundary)
    for i, level in enumerate(levels):
        formats.write_field(f"{args.out_prefix}{i:02d}.{args.format}", level)


def _cmd_efwhm(args) -> None:
    if len(args.residuals) == 1:
        stack = formats.read_field(args.residuals[0])
        if stack.rank < 2:
            raise ValueError("a residual stack needs rank >= 2 with images on axis 0")
        fields = [Field(x, stack.spacing[1:]) for x in stack.values]
    else:
        fields = [formats.read_field(p) for p in args.residuals]
    if args.spacing:
        fields = [Field(f.values, _floats(args.spacing)) for f in fields]
    ens = ResidualEnsemble.demeaned(fields) if args.demean else ResidualEnsemble.from_fields(fields)
    result = field_efwhm(ens, margin=args.margin)
    est = list(result.estimates())
    fmt = lambda v: ";".join(str(i) for i in v)  # noqa: E731
    formats.write_csv_table(
        args.out,
        ["axis", "voxel_a", "voxel_b", "delta_u", "roughness", "efwhm", "interior"],
        [
            [e.axis for e in est], [fmt(e.voxel_a) for e in est], [fmt(e.voxel_b) for e in est],
            [e.delta_u for e in est], [e.roughness for e in est], [e.efwhm for e in est],
            [int(b) for b in result.interior],
        ],
    )
    summary = result.summary()
    out = Path(args.out)
    formats.write_csv_table(
        out.with_name(out.stem + "_summary.csv"),
        ["key", "value"],
        [list(summary), list(summary.values())],
    )
    for k, v in summary.items():
        print(f"{k}={formats.format_float(v) if isinstance(v, float) else v}")


def _cmd_qq(args) -> None:
    curve = qq_curve(_qq_source(args.x), _qq_source(args.y), args.points)
    write_qq(args.out, curve)


def _cmd_kde(args) -> None:
    header, pts = formats.read_csv_table(args.points)
    axes = []
    for part in args.grid.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise ValueError(f"grid must be MIN:STEP:MAX, got {part!r}")
        axes.append(grid_axis(*map(float, bits)))
    if len(axes) == 1 and pts.shape[1] > 1:
        axes = axes * pts.shape[1]
    dens = kde(pts, args.sigma, axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.ravel() for m in mesh] + [dens.values.ravel()]
    names = [f"x{k}" for k in range(len(axes))] + ["density"]
    formats.write_csv_table(args.out, names, cols)


def _cmd_binarize(args) -> None:
    img = formats.read_netpbm(args.inp)
    formats.write_field(args.out, formats.binarize_first_channel(img))


_EXPERIMENTS = {
    "1d": experiment_1d,
    "2d": experiment_2d,
    "key": experiment_key,
    "gaussianness": experiment_gaussianness,
}


def _parse_params(items: Sequence[str]) -> dict:
    params: dict = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--params entries must be key=value, got {item!r}")
        key = key.replace("-", "_")
        if key == "sigmas":
            params[key] = _floats(value)
        elif key == "pixel":
            # one-based row,col on the command line
            r, c = (int(v) for v in value.split(","))
            params[key] = (r - 1, c - 1)
        elif key in ("radius", "n_reps"):
            params[key] = int(value)
        elif key == "boundary":
            params[key] = BoundaryMode.parse(value).value
        else:
            params[key] = float(value)
    return params


def _save_report(report, out_dir: Path) -> None:
    d = report.data
    files: list[str] = []

    def grid(name, arr):
        formats.write_grid(out_dir / name, Field(arr))
        files.append(name)

    if report.name == "1d":
        formats.write_csv_table(
            out_dir / "series.csv", ["t", "signal", "noisy", "smoothed"],
            [d["t"], d["signal"], d["noisy"], d["smoothed"]],
        )
        files.append("series.csv")
    elif report.name == "gaussianness":
        n = len(d["raw"])
        formats.write_csv_table(
            out_dir / "pixel_values.csv", ["rep", "raw", "smoothed"],
            [list(range(n)), d["raw"], d["smoothed"]],
        )
        files.append("pixel_values.csv")
        for key in ("qq_raw", "qq_smoothed"):
            write_qq(out_dir / f"{key}.csv", d[key])
            write_qq_svg(out_dir / f"{key}.svg", d[key])
            files += [f"{key}.csv", f"{key}.svg"]
    else:
        for key, arr in d.items():
            grid(f"{key}.gks", arr)
        if report.name == "key":
            formats.write_pgm(out_dir / "signal.pgm", d["signal"], maxval=255)
            files.append("signal.pgm")
    report.files = files
    (out_dir / "report.txt").write_text(report.to_text())


def _cmd_simulate(args) -> None:
    seed = args.seed
    if seed is None:
        env = os.environ.get("GKS_SEED")
        if env is None:
            raise ValueError("no seed: pass --seed or set GKS_SEED")
        try:
            seed = int(env)
        except ValueError:
            raise ValueError(f"GKS_SEED must be an integer, got {env!r}") from None
    params = _parse_params(args.params or [])
    try:
        report = _EXPERIMENTS[args.experiment](Rng(seed), **params)
    except TypeError as exc:
        raise ValueError(f"bad --params for {args.experiment}: {exc}") from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _save_report(report, out_dir)
    sys.stdout.write(report.to_text())


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gksmooth", description="Gaussian kernel smoothing tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    boundary = dict(choices=[m.value for m in BoundaryMode], default="zero")

    s = sub.add_parser("smooth", help="smooth a field or image")
    s.add_argument("--in", dest="inp", required=True)
    bw = s.add_mutually_exclusive_group(required=True)
    bw.add_argument("--sigma", type=_positive)
    bw.add_argument("--fwhm", type=_positive)
    s.add_argument("--radius", type=int)
    s.add_argument("--boundary", **boundary)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_smooth)

    s = sub.add_parser("scalespace", help="smooth at several bandwidths")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--sigmas", required=True, help="comma-separated, ascending")
    s.add_argument("--radius", type=int)
    s.add_argument("--boundary", **boundary)
    s.add_argument("--format", choices=["gks", "csv", "pgm"], default="gks")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=_cmd_scalespace)

    s = sub.add_parser("efwhm", help="effective FWHM from residual images")
    s.add_argument("--residuals", nargs="+", required=True,
                   help="one file per image, or one stack with images on axis 0")
    s.add_argument("--spacing", help="comma-separated grid steps")
    s.add_argument("--demean", action="store_true", help="subtract the voxelwise mean first")
    s.add_argument("--margin", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_efwhm)

    s = sub.add_parser("qq", help="quantile-quantile curve")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True, help="CSV file, 'normal' or 'exp:RATE'")
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_qq)

    s = sub.add_parser("kde", help="Gaussian kernel density estimate")
    s.add_argument("--points", required=True)
    s.add_argument("--sigma", type=_positive, required=True)
    s.add_argument("--grid", required=True, help="MIN:STEP:MAX, comma-separated per axis")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_kde)

    s = sub.add_parser("binarize", help="scale the first image channel to [0, 1]")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_binarize)

    s = sub.add_parser("simulate", help="run a seeded experiment")
    s.add_argument("--experiment", choices=sorted(_EXPERIMENTS), required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--params", nargs="*", metavar="KEY=VALUE")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=_cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"gksmooth {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

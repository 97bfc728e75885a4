"""Binary grid files, Netpbm images and CSV tables."""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Field

__all__ = [
    "FormatError",
    "GRID_MAGIC",
    "NetpbmImage",
    "binarize_first_channel",
    "format_float",
    "image_to_field",
    "read_csv_field",
    "read_csv_table",
    "read_field",
    "read_grid",
    "read_netpbm",
    "write_csv_field",
    "write_csv_table",
    "write_field",
    "write_grid",
    "write_pgm",
]

GRID_MAGIC = b"GKSF"
GRID_VERSION = 1


class FormatError(ValueError):
    """Malformed input file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int | None = None, path: str | None = None):
        self.offset = offset
        self.path = path
        where = f" at byte {offset}" if offset is not None else ""
        src = f"{path}: " if path else ""
        super().__init__(f"{src}{message}{where}")


def format_float(x: float) -> str:
    """Shortest decimal string that reads back to the same double."""
    return repr(float(x))


# -- grid files ---------------------------------------------------------------
#
# magic "GKSF" | version u8 | rank u8 | dims u64[rank] | spacing f64[rank] |
# values f32[prod(dims)], all little-endian, values row-major.


def write_grid(path, field: Field) -> None:
    buf = bytearray(GRID_MAGIC)
    buf += struct.pack("<BB", GRID_VERSION, field.rank)
    buf += struct.pack(f"<{field.rank}Q", *field.dims)
    buf += struct.pack(f"<{field.rank}d", *field.spacing)
    buf += np.ascontiguousarray(field.values, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_grid(path) -> Field:
    data = Path(path).read_bytes()
    return parse_grid(data, str(path))


def parse_grid(data: bytes, name: str | None = None) -> Field:
    def need(offset: int, n: int, what: str) -> None:
        if len(data) < offset + n:
            raise FormatError(f"truncated {what}", len(data), name)

    need(0, 6, "header")
    if data[:4] != GRID_MAGIC:
        raise FormatError("bad magic, expected GKSF", 0, name)
    version, rank = data[4], data[5]
    if version != GRID_VERSION:
        raise FormatError(f"unsupported version {version}", 4, name)
    if rank < 1:
        raise FormatError("rank must be >= 1", 5, name)
    off = 6
    need(off, 16 * rank, "dims/spacing")
    dims = struct.unpack_from(f"<{rank}Q", data, off)
    if any(d < 1 for d in dims):
        raise FormatError(f"zero extent in dims {dims}", off, name)
    off += 8 * rank
    spacing = struct.unpack_from(f"<{rank}d", data, off)
    if not all(s > 0 for s in spacing):
        raise FormatError(f"non-positive spacing {spacing}", off, name)
    off += 8 * rank
    count = int(np.prod(dims, dtype=object))
    if len(data) - off != 4 * count:
        raise FormatError(
            f"payload holds {len(data) - off} bytes, header implies {4 * count}",
            min(len(data), off + 4 * count), name,
        )
    values = np.frombuffer(data, dtype="<f4", count=count, offset=off).astype(np.float64)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise FormatError("non-finite value", off + 4 * bad, name)
    return Field(values.reshape(dims), spacing)


# -- Netpbm ----------------------------------------------------------------------


@dataclass(frozen=True)
class NetpbmImage:
    """Integer pixels of shape (rows, cols) or (rows, cols, 3), and their maxval."""

    pixels: np.ndarray
    maxval: int

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]


def _header_tokens(data: bytes, count: int, name: str | None) -> tuple[list[int], int]:
    tokens: list[int] = []
    i = 2
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and data[i:i + 1].isdigit():
            i += 1
        if start == i:
            raise FormatError("expected an integer in header", start, name)
        tokens.append(int(data[start:i]))
    return tokens, i


def parse_netpbm(data: bytes, name: str | None = None) -> NetpbmImage:
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r}; expected P2, P3, P5 or P6", 0, name)
    (width, height, maxval), off = _header_tokens(data, 3, name)
    if width < 1 or height < 1:
        raise FormatError(f"empty image {width}x{height}", 3, name)
    if not 0 < maxval < 65536:
        raise FormatError(f"maxval {maxval} out of range", off, name)
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        if off >= len(data) or not data[off:off + 1].isspace():
            raise FormatError("missing whitespace after header", off, name)
        off += 1
        dtype = ">u2" if maxval > 255 else "u1"
        size = np.dtype(dtype).itemsize * count
        if len(data) - off < size:
            raise FormatError(f"truncated pixel data, need {size} bytes", len(data), name)
        pix = np.frombuffer(data, dtype=dtype, count=count, offset=off).astype(np.int64)
    else:
        body = data[off:].split()
        if len(body) < count:
            raise FormatError(f"expected {count} samples, found {len(body)}", len(data), name)
        try:
            pix = np.array([int(t) for t in body[:count]], dtype=np.int64)
        except ValueError:
            raise FormatError("non-integer sample", off, name) from None
    if pix.size and pix.max() > maxval:
        raise FormatError(f"sample exceeds maxval {maxval}", off, name)
    shape = (height, width) if channels == 1 else (height, width, channels)
    return NetpbmImage(pix.reshape(shape), maxval)


def read_netpbm(path) -> NetpbmImage:
    return parse_netpbm(Path(path).read_bytes(), str(path))


def write_pgm(path, image, maxval: int | None = None, ascii: bool = False) -> None:
    """Write a grayscale image.

    ``image`` is a :class:`NetpbmImage` (written as-is) or a 2-D Field/array
    of values in [0, 1], quantized to ``maxval`` levels (default 65535).
    """
    if isinstance(image, NetpbmImage):
        if image.channels != 1:
            raise ValueError("write_pgm needs a single-channel image")
        pix, maxval = image.pixels, image.maxval
    else:
        values = image.values if isinstance(image, Field) else np.asarray(image, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"PGM needs a 2-D field, got rank {values.ndim}")
        maxval = 65535 if maxval is None else int(maxval)
        pix = np.rint(np.clip(values, 0.0, 1.0) * maxval).astype(np.int64)
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval {maxval} out of range")
    h, w = pix.shape
    if ascii:
        rows = "\n".join(" ".join(str(int(v)) for v in row) for row in pix)
        Path(path).write_bytes(f"P2\n{w} {h}\n{maxval}\n{rows}\n".encode())
        return
    dtype = ">u2" if maxval > 255 else "u1"
    Path(path).write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + pix.astype(dtype).tobytes())


def image_to_field(img: NetpbmImage) -> Field:
    """Grayscale values scaled to [0, 1]; colour images use their first channel."""
    return binarize_first_channel(img)


def binarize_first_channel(img: NetpbmImage) -> Field:
    """First channel divided by maxval.

    No threshold is applied: a 0/maxval mask becomes exactly {0, 1} and
    other levels pass through scaled.
    """
    if img.pixels.size == 0:
        raise ValueError("empty image")
    chan = img.pixels if img.pixels.ndim == 2 else img.pixels[:, :, 0]
    return Field(chan.astype(np.float64) / img.maxval)


# -- CSV -------------------------------------------------------------------------


def write_csv_table(path, header: Sequence[str], columns: Sequence[Sequence]) -> None:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(out.getvalue())


def read_csv_table(path) -> tuple[list[str], np.ndarray]:
    """Header and a float array of shape (rows, columns)."""
    name = str(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty CSV", 0, name)
    header, body = rows[0], [r for r in rows[1:] if r]
    offset = len(",".join(header)) + 1
    table = []
    for r in body:
        if len(r) != len(header):
            raise FormatError(f"row has {len(r)} fields, header has {len(header)}", offset, name)
        try:
            table.append([float(v) for v in r])
        except ValueError:
            raise FormatError(f"non-numeric value in row {r}", offset, name) from None
        offset += len(",".join(r)) + 1
    if not table:
        raise FormatError("CSV has no data rows", offset, name)
    return header, np.array(table, dtype=np.float64)


def write_csv_field(path, field: Field) -> None:
    """1-D fields as one ``value`` column; 2-D fields as rows ``c0..c{n-1}``."""
    v = field.values
    if v.ndim == 1:
        write_csv_table(path, ["value"], [v.tolist()])
    elif v.ndim == 2:
        write_csv_table(path, [f"c{j}" for j in range(v.shape[1])], [col.tolist() for col in v.T])
    else:
        raise ValueError("CSV fields must be rank 1 or 2")


def read_csv_field(path) -> Field:
    header, table = read_csv_table(path)
    if header == ["value"]:
        return Field(table[:, 0])
    return Field(table)


_GRID_EXT = {".gks", ".grid"}
_PNM_EXT = {".pgm", ".ppm", ".pnm"}


def read_field(path) -> Field:
    """Load a field from a grid, Netpbm or CSV file, chosen by extension."""
    ext = Path(path).suffix.lower()
    if ext in _GRID_EXT:
        return read_grid(path)
    if ext in _PNM_EXT:
        return image_to_field(read_netpbm(path))
    if ext == ".csv":
        return read_csv_field(path)
    raise ValueError(f"unrecognized input format {ext!r} for {path}")


def write_field(path, field: Field) -> None:
    ext = Path(path).suffix.lower()
    if ext in _GRID_EXT:
        write_grid(path, field)
    elif ext == ".pgm":
        write_pgm(path, field)
    elif ext == ".csv":
        write_csv_field(path, field)
    else:
        raise ValueError(f"unrecognized output format {ext!r} for {path}")

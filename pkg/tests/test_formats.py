import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from gksmooth.core import Field
from gksmooth.formats import (
    FormatError,
    NetpbmImage,
    binarize_first_channel,
    format_float,
    parse_grid,
    parse_netpbm,
    read_csv_field,
    read_csv_table,
    read_field,
    read_grid,
    read_netpbm,
    write_csv_field,
    write_csv_table,
    write_grid,
    write_pgm,
)


def f32_fields():
    return hnp.arrays(
        np.float32,
        hnp.array_shapes(min_dims=1, max_dims=3, min_side=1, max_side=6),
        elements=st.floats(-65504.0, 65504.0, width=32),
    )


class TestGridFile:
    def test_layout(self, tmp_path):
        p = tmp_path / "a.gks"
        write_grid(p, Field(np.array([[1.0, 2.0, 3.0]]), (0.5, 2.0)))
        data = p.read_bytes()
        assert data[:4] == b"GKSF"
        assert data[4] == 1 and data[5] == 2
        assert struct.unpack_from("<2Q", data, 6) == (1, 3)
        assert struct.unpack_from("<2d", data, 22) == (0.5, 2.0)
        assert struct.unpack_from("<3f", data, 38) == (1.0, 2.0, 3.0)
        assert len(data) == 38 + 12

    @given(values=f32_fields())
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, tmp_path_factory, values):
        p = tmp_path_factory.mktemp("g") / "x.gks"
        spacing = tuple(0.25 * (k + 1) for k in range(values.ndim))
        f = Field(values.astype(np.float64), spacing)
        write_grid(p, f)
        assert read_grid(p) == f

    def test_values_rounded_to_float32(self, tmp_path):
        p = tmp_path / "x.gks"
        write_grid(p, Field(np.array([0.1])))
        assert read_grid(p).values[0] == float(np.float32(0.1))

    @pytest.mark.parametrize("mutate,offset", [
        (lambda d: b"XKSF" + d[4:], 0),
        (lambda d: d[:4] + b"\x07" + d[5:], 4),
        (lambda d: d[:-2], 52),
        (lambda d: d[:10], 10),
    ])
    def test_malformed(self, tmp_path, mutate, offset):
        p = tmp_path / "x.gks"
        write_grid(p, Field(np.ones((2, 2))))
        with pytest.raises(FormatError) as err:
            parse_grid(mutate(p.read_bytes()))
        assert err.value.offset == offset
        assert f"byte {offset}" in str(err.value)


class TestNetpbm:
    @pytest.mark.parametrize("maxval", [255, 65535, 1000])
    @pytest.mark.parametrize("ascii", [False, True])
    def test_round_trip(self, tmp_path, maxval, ascii):
        rng = np.random.default_rng(maxval)
        img = NetpbmImage(rng.integers(0, maxval + 1, (7, 5)), maxval)
        p = tmp_path / "x.pgm"
        write_pgm(p, img, ascii=ascii)
        back = read_netpbm(p)
        assert back.maxval == maxval
        assert np.array_equal(back.pixels, img.pixels)

    def test_field_round_trip_quantized(self, tmp_path):
        levels = np.random.default_rng(0).integers(0, 256, (6, 6))
        f = Field(levels / 255.0)
        p = tmp_path / "x.pgm"
        write_pgm(p, f, maxval=255)
        assert read_field(p) == f

    def test_header_comments(self):
        img = parse_netpbm(b"P2\n# made by hand\n3 1\n# max\n9\n0 4 9\n")
        assert img.pixels.tolist() == [[0, 4, 9]]

    def test_ppm_first_channel(self):
        pix = bytes([255, 0, 0, 128, 9, 9, 0, 255, 255])
        img = parse_netpbm(b"P6\n3 1\n255\n" + pix)
        assert img.channels == 3
        f = binarize_first_channel(img)
        assert f.values.tolist() == [[1.0, 128 / 255, 0.0]]
        assert f.values[0, 1] == pytest.approx(0.50196, abs=1e-5)

    def test_binary_mask_is_exact(self):
        img = NetpbmImage(np.array([[0, 255], [255, 0]]), 255)
        assert set(np.unique(binarize_first_channel(img).values)) == {0.0, 1.0}

    @pytest.mark.parametrize("data", [
        b"P4\n1 1\n", b"P5\n2 2\n255\n\x00", b"P2\n2 1\n10\n3 11\n", b"P5\nx 1\n255\n",
    ])
    def test_malformed(self, data):
        with pytest.raises(FormatError):
            parse_netpbm(data)

    def test_sixteen_bit_big_endian(self):
        img = parse_netpbm(b"P5\n2 1\n65535\n\x01\x02\xff\xfe")
        assert img.pixels.tolist() == [[0x0102, 0xFFFE]]


class TestCsv:
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_bit_exact_round_trip(self, tmp_path_factory, xs):
        p = tmp_path_factory.mktemp("c") / "v.csv"
        write_csv_table(p, ["value"], [xs])
        _, table = read_csv_table(p)
        assert [v.hex() for v in table[:, 0].tolist()] == [float(x).hex() for x in xs]

    def test_shortest_repr(self):
        assert format_float(0.1) == "0.1"
        assert format_float(1e-300) == "1e-300"

    def test_field_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        for shape in [(5,), (3, 4)]:
            f = Field(rng.normal(size=shape))
            p = tmp_path / f"f{len(shape)}.csv"
            write_csv_field(p, f)
            assert read_csv_field(p) == f

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3\n")
        with pytest.raises(FormatError) as err:
            read_csv_table(p)
        assert err.value.offset == 8

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a\nfoo\n")
        with pytest.raises(FormatError):
            read_csv_table(p)


def test_unknown_extension(tmp_path):
    with pytest.raises(ValueError):
        read_field(tmp_path / "x.tif")

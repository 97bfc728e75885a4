import subprocess
import sys

import numpy as np
import pytest

from gksmooth.cli import gaussblur_fwhm, main
from gksmooth.convolve import smooth
from gksmooth.core import Field, separable_kernel, sigma_to_fwhm
from gksmooth.formats import (
    NetpbmImage,
    read_csv_table,
    read_grid,
    read_netpbm,
    write_csv_table,
    write_grid,
    write_pgm,
)
from gksmooth.sim import Rng
from gksmooth.stats import normal_quantile
from golden import PRINTED_SIGMA_ONE


def delta_grid(path, n=11):
    x = np.zeros((n, n))
    x[n // 2, n // 2] = 1.0
    write_grid(path, Field(x))


def one_line_error(capsys):
    err = capsys.readouterr().err
    assert err.count("\n") == 1
    return err


class TestGaussblurFwhm:
    def test_printed_matrix(self):
        x = np.zeros((11, 11))
        x[5, 5] = 1.0
        out = gaussblur_fwhm(Field(x), sigma_to_fwhm(1.0), radius=2).values
        np.testing.assert_allclose(out[3:8, 3:8], PRINTED_SIGMA_ONE, atol=5e-5)

    def test_mask_stays_in_unit_interval(self):
        mask = (np.random.default_rng(0).random((60, 50)) > 0.7).astype(float)
        out = gaussblur_fwhm(Field(mask), 10.0).values
        assert out.min() >= 0 and out.max() <= 1 + 1e-12

    def test_small_fwhm_is_identity(self):
        x = np.random.default_rng(1).random((9, 9))
        out = gaussblur_fwhm(Field(x), 1e-3, radius=1).values
        np.testing.assert_allclose(out, x, atol=1e-12)

    def test_three_dimensional(self):
        x = np.random.default_rng(2).random((8, 9, 10))
        out = gaussblur_fwhm(Field(x), 3.0, "reflect")
        ref = smooth(Field(x), separable_kernel(3.0 / sigma_to_fwhm(1.0), None, 3), "reflect")
        np.testing.assert_allclose(out.values, ref.values, rtol=1e-15)

    def test_non_positive(self):
        with pytest.raises(ValueError):
            gaussblur_fwhm(Field(np.ones(5)), 0.0)


class TestSmoothCommand:
    def test_delta_grid(self, tmp_path):
        delta_grid(tmp_path / "d.gks")
        assert main(["smooth", "--in", str(tmp_path / "d.gks"), "--sigma", "1", "--radius", "2",
                     "--out", str(tmp_path / "o.gks")]) == 0
        out = read_grid(tmp_path / "o.gks").values
        np.testing.assert_allclose(out[3:8, 3:8], PRINTED_SIGMA_ONE, atol=5e-5)

    def test_fwhm_on_pgm(self, tmp_path):
        mask = np.zeros((30, 30), dtype=int)
        mask[10:20, 8:22] = 255
        write_pgm(tmp_path / "m.pgm", NetpbmImage(mask, 255))
        assert main(["smooth", "--in", str(tmp_path / "m.pgm"), "--fwhm", "4",
                     "--out", str(tmp_path / "o.pgm")]) == 0
        out = read_netpbm(tmp_path / "o.pgm")
        assert out.maxval == 65535
        ref = gaussblur_fwhm(Field(mask / 255.0), 4.0).values
        np.testing.assert_allclose(out.pixels / 65535, ref, atol=1 / 65535)

    def test_sigma_and_fwhm_exclusive(self, tmp_path, capsys):
        delta_grid(tmp_path / "d.gks")
        with pytest.raises(SystemExit) as exc:
            main(["smooth", "--in", str(tmp_path / "d.gks"), "--sigma", "1", "--fwhm", "2",
                  "--out", str(tmp_path / "o.gks")])
        assert exc.value.code == 2
        one_line_error(capsys)

    def test_malformed_input(self, tmp_path, capsys):
        (tmp_path / "bad.gks").write_bytes(b"GKSF\x01")
        code = main(["smooth", "--in", str(tmp_path / "bad.gks"), "--sigma", "1",
                     "--out", str(tmp_path / "o.gks")])
        assert code == 2
        assert "byte" in one_line_error(capsys)

    def test_radius_too_wide(self, tmp_path, capsys):
        delta_grid(tmp_path / "d.gks", n=5)
        code = main(["smooth", "--in", str(tmp_path / "d.gks"), "--sigma", "3",
                     "--out", str(tmp_path / "o.gks")])
        assert code == 2
        one_line_error(capsys)


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    one_line_error(capsys)


def test_unknown_flag(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["qq", "--x", "a", "--y", "b", "--out", "c", "--bogus"])
    assert exc.value.code == 2
    one_line_error(capsys)


def test_scalespace(tmp_path):
    x = np.random.default_rng(0).random((20, 20))
    write_grid(tmp_path / "x.gks", Field(x))
    assert main(["scalespace", "--in", str(tmp_path / "x.gks"), "--sigmas", "0.5,1,2",
                 "--out-prefix", str(tmp_path / "level")]) == 0
    levels = [read_grid(tmp_path / f"level{i:02d}.gks").values for i in range(3)]
    for s, lv in zip([0.5, 1.0, 2.0], levels):
        ref = smooth(Field(x.astype(np.float32)), separable_kernel(s, None, 2)).values
        np.testing.assert_allclose(lv, ref.astype(np.float32), rtol=1e-6)


def test_scalespace_rejects_descending(tmp_path):
    write_grid(tmp_path / "x.gks", Field(np.ones((20, 20))))
    assert main(["scalespace", "--in", str(tmp_path / "x.gks"), "--sigmas", "2,1",
                 "--out-prefix", str(tmp_path / "l")]) == 2


class TestQQCommand:
    def test_same_file(self, tmp_path):
        write_csv_table(tmp_path / "a.csv", ["x"], [Rng(1).normal(0, 1, 40).tolist()])
        assert main(["qq", "--x", str(tmp_path / "a.csv"), "--y", str(tmp_path / "a.csv"),
                     "--points", "25", "--out", str(tmp_path / "qq.csv")]) == 0
        header, t = read_csv_table(tmp_path / "qq.csv")
        assert header == ["p", "qx", "qy"]
        assert len(t) == 25 and np.array_equal(t[:, 1], t[:, 2])

    def test_against_normal(self, tmp_path):
        write_csv_table(tmp_path / "a.csv", ["x"], [[1.0, 2.0, 3.0]])
        main(["qq", "--x", str(tmp_path / "a.csv"), "--y", "normal", "--points", "9",
              "--out", str(tmp_path / "qq.csv")])
        _, t = read_csv_table(tmp_path / "qq.csv")
        np.testing.assert_array_equal(t[:, 2], normal_quantile(t[:, 0]))

    def test_exponential_and_svg(self, tmp_path):
        write_csv_table(tmp_path / "a.csv", ["x"], [[0.1, 0.5, 0.2, 0.9]])
        assert main(["qq", "--x", str(tmp_path / "a.csv"), "--y", "exp:2",
                     "--out", str(tmp_path / "qq.svg")]) == 0
        svg = (tmp_path / "qq.svg").read_text()
        assert svg.startswith("<svg") and "<polyline" in svg

    def test_bad_rate(self, tmp_path):
        write_csv_table(tmp_path / "a.csv", ["x"], [[0.1, 0.5]])
        assert main(["qq", "--x", str(tmp_path / "a.csv"), "--y", "exp:-1",
                     "--out", str(tmp_path / "qq.csv")]) == 2


def test_kde_command(tmp_path):
    write_csv_table(tmp_path / "p.csv", ["x"], [[0.0]])
    assert main(["kde", "--points", str(tmp_path / "p.csv"), "--sigma", "1",
                 "--grid=-8:0.01:8", "--out", str(tmp_path / "k.csv")]) == 0
    header, t = read_csv_table(tmp_path / "k.csv")
    assert header == ["x0", "density"]
    assert t[800, 1] == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-9)
    assert np.trapezoid(t[:, 1], t[:, 0]) == pytest.approx(1.0, abs=1e-3)


def test_kde_command_2d(tmp_path):
    write_csv_table(tmp_path / "p.csv", ["x", "y"], [[0.0, 1.0], [0.0, -1.0]])
    assert main(["kde", "--points", str(tmp_path / "p.csv"), "--sigma", "0.5",
                 "--grid=-4:0.5:4,-5:0.5:5", "--out", str(tmp_path / "k.csv")]) == 0
    header, t = read_csv_table(tmp_path / "k.csv")
    assert header == ["x0", "x1", "density"]
    assert len(t) == 17 * 21


def test_binarize_command(tmp_path):
    pix = np.zeros((4, 5, 3), dtype=int)
    pix[1:3, 1:4, 0] = 255
    pix[:, :, 1] = 77
    p = tmp_path / "seg.ppm"
    p.write_bytes(b"P6\n5 4\n255\n" + pix.astype(np.uint8).tobytes())
    assert main(["binarize", "--in", str(p), "--out", str(tmp_path / "b.gks")]) == 0
    b = read_grid(tmp_path / "b.gks").values
    assert b.sum() == 6 and set(np.unique(b)) == {0.0, 1.0}


def test_efwhm_command(tmp_path, capsys):
    rng = Rng(5)
    paths = []
    for i in range(6):
        p = tmp_path / f"r{i}.gks"
        write_grid(p, Field(rng.normal(0, 1, (8, 9))))
        paths.append(str(p))
    assert main(["efwhm", "--residuals", *paths, "--demean", "--out", str(tmp_path / "e.csv")]) == 0
    text = (tmp_path / "e.csv").read_text().splitlines()
    assert text[0] == "axis,voxel_a,voxel_b,delta_u,roughness,efwhm,interior"
    assert len(text) - 1 == 7 * 9 + 8 * 8
    summary = (tmp_path / "e_summary.csv").read_text()
    assert "median_efwhm" in summary
    assert "median_efwhm=" in capsys.readouterr().out


def test_efwhm_stack(tmp_path):
    stack = Rng(6).normal(0, 1, (5, 7, 7))
    write_grid(tmp_path / "s.gks", Field(stack))
    assert main(["efwhm", "--residuals", str(tmp_path / "s.gks"), "--spacing", "2,2",
                 "--out", str(tmp_path / "e.csv")]) == 0


class TestSimulate:
    def test_deterministic_output(self, tmp_path):
        for d in ("a", "b"):
            assert main(["simulate", "--experiment", "1d", "--seed", "7",
                         "--out-dir", str(tmp_path / d)]) == 0
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files == ["report.txt", "series.csv"]
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GKS_SEED", "7")
        assert main(["simulate", "--experiment", "1d", "--out-dir", str(tmp_path / "e")]) == 0
        main(["simulate", "--experiment", "1d", "--seed", "7", "--out-dir", str(tmp_path / "s")])
        assert (tmp_path / "e" / "report.txt").read_bytes() == (tmp_path / "s" / "report.txt").read_bytes()

    def test_missing_seed(self, tmp_path, monkeypatch):
        monkeypatch.delenv("GKS_SEED", raising=False)
        assert main(["simulate", "--experiment", "1d", "--out-dir", str(tmp_path)]) == 2

    def test_params_and_one_based_pixel(self, tmp_path):
        assert main(["simulate", "--experiment", "gaussianness", "--seed", "3",
                     "--params", "n_reps=3", "pixel=315,165", "--out-dir", str(tmp_path)]) == 0
        report = (tmp_path / "report.txt").read_text()
        assert "param.pixel=314,164" in report
        assert "file=qq_raw.csv" in report

    def test_bad_param(self, tmp_path):
        assert main(["simulate", "--experiment", "1d", "--seed", "1",
                     "--params", "nope=3", "--out-dir", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gksmooth", "simulate", "--experiment", "2d", "--seed", "1",
         "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "metric.rmse_smoothed=" in proc.stdout

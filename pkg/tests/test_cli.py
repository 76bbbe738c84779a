import numpy as np
import pytest

from certseg.cli import load_image, main, parse_manifest
from certseg.errors import InputError
from certseg.pgmio import write_pgm


def disk_image(n, r=0.3):
    xs = np.arange(n) / (n - 1)
    x, y = np.meshgrid(xs, xs, indexing="xy")
    return np.where((x - 0.5) ** 2 + (y - 0.5) ** 2 < r * r, 0.95, 0.05)


@pytest.fixture
def disk_pgm(tmp_path):
    path = tmp_path / "disk.pgm"
    write_pgm(path, disk_image(17), maxval=255)
    return path


class TestLoadImage:
    def test_valid_sizes_and_level(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.zeros((5, 5)), maxval=255)
        img = load_image(path)
        assert img.level == 2
        assert np.all(img.values == 0.0)

    def test_normalization_16bit(self, tmp_path):
        path = tmp_path / "img16.pgm"
        write_pgm(path, np.full((5, 5), 0.5), maxval=65535)
        img = load_image(path)
        assert np.allclose(img.values, np.round(0.5 * 65535) / 65535)

    def test_wrong_side_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        write_pgm(path, np.zeros((16, 16)), maxval=255)
        with pytest.raises(InputError, match="2\\^L"):
            load_image(path)

    def test_color_rejected(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        with pytest.raises(InputError):
            load_image(path)


class TestRunCommand:
    def test_fd_run_produces_outputs(self, disk_pgm, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([
            "run", "--input", str(disk_pgm), "--scheme", "fd",
            "--nu", "0.05", "--c1", "0.95", "--c2", "0.05",
            "--threshold", "1e-6", "--out", str(out),
        ])
        assert code == 0
        for name in ("segmentation.pgm", "relaxed.pgm", "dual_x.pgm",
                     "dual_y.pgm", "certificate.csv", "manifest.txt"):
            assert (out / name).exists(), name
        csv = (out / "certificate.csv").read_text().splitlines()
        assert csv[0].startswith("cycle,scheme,dofs,")
        assert len(csv) == 2

    def test_rerun_byte_identical(self, disk_pgm, tmp_path):
        args = [
            "run", "--input", str(disk_pgm), "--scheme", "fe-prime",
            "--nu", "0.05", "--c1", "0.95", "--c2", "0.05",
            "--cycles", "2", "--init-level", "2", "--threshold", "1e-6",
        ]
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        for name in ("certificate.csv", "segmentation.pgm", "relaxed.pgm",
                     "dual_x.pgm", "dual_y.pgm"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_manifest_round_trip(self, disk_pgm, tmp_path):
        out = tmp_path / "out"
        main([
            "run", "--input", str(disk_pgm), "--scheme", "fd",
            "--nu", "0.05", "--c1", "0.95", "--c2", "0.05",
            "--threshold", "1e-6", "--out", str(out),
        ])
        mf = parse_manifest(out / "manifest.txt")
        assert mf["scheme"] == "fd"
        assert float(mf["nu"]) == 0.05
        assert float(mf["c1"]) == 0.95
        assert int(mf["max_level"]) == 4
        assert mf["stalled"] in ("true", "false")

    def test_config_file_with_flag_override(self, disk_pgm, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(
            f"input = {disk_pgm}\nscheme = fd\nnu = 0.05\nc1 = 0.95\nc2 = 0.05\n"
            f"threshold = 1e-6\nout = {tmp_path/'cfg_out'}\n"
        )
        code = main(["run", "--config", str(cfgfile), "--nu", "0.04"])
        assert code == 0
        mf = parse_manifest(tmp_path / "cfg_out" / "manifest.txt")
        assert float(mf["nu"]) == 0.04  # flag overrides config

    def test_exit_code_bad_input(self, tmp_path):
        assert main(["run", "--scheme", "fd"]) == 2  # neither input nor builtin
        bad = tmp_path / "bad.pgm"
        write_pgm(bad, np.zeros((12, 12)), maxval=255)
        assert main(["run", "--input", str(bad)]) == 2

    def test_exit_code_step_size(self, disk_pgm, tmp_path):
        code = main([
            "run", "--input", str(disk_pgm), "--scheme", "fd",
            "--c1", "0.95", "--c2", "0.05",
            "--tau", "1.0", "--sigma", "1.0", "--out", str(tmp_path / "x"),
        ])
        assert code == 3

    def test_exit_code_non_convergence(self, tmp_path):
        # steps tiny enough that the increment never reaches the threshold
        small = tmp_path / "small.pgm"
        write_pgm(small, disk_image(9), maxval=255)
        code = main([
            "run", "--input", str(small), "--scheme", "fd",
            "--c1", "0.95", "--c2", "0.05", "--threshold", "1e-20",
            "--tau", "1e-9", "--sigma", "1e-9", "--out", str(tmp_path / "x"),
        ])
        assert code == 4

    def test_builtin_two_gaussian_fd(self, tmp_path):
        out = tmp_path / "tg"
        code = main([
            "run", "--builtin", "two-gaussian", "--scheme", "fd",
            "--max-level", "4", "--threshold", "1e-6", "--out", str(out),
        ])
        assert code == 0
        assert (out / "certificate.csv").exists()


class TestVerifyCommand:
    def test_oracle_suite_passes(self, capsys):
        assert main(["verify", "--suite", "oracle"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_verify_flag_alias(self, capsys):
        assert main(["--verify"]) == 0

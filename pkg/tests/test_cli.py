import logging

import numpy as np
import pytest

from main import EXIT_FAILED, EXIT_IO, EXIT_OK, EXIT_SHAPE, EXIT_USAGE, main
from ssfuse.tensor import Tensor
from utils.fileio import read_manifest, read_sst1, write_sst1


@pytest.fixture(autouse=True)
def detached_logging():
    yield
    root = logging.getLogger("ssfuse")
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def small(write_config):
    return write_config(d=2, d_state=2, H=4, W=4, seed=3, trials=1)


def run(*argv):
    return main([str(arg) for arg in argv])


class TestGen:
    def test_writes_both_modalities(self, small, tmp_path):
        assert run("gen", "--config", small) == EXIT_OK
        f_v = read_sst1(tmp_path / "f_v.sst")
        assert f_v.shape == (2, 4, 4)
        assert (tmp_path / "f_v.sst").stat().st_size == 8 + 4 * 3 + 8 * 32

    def test_single_channel_file_size(self, write_config, tmp_path):
        config = write_config(d=1, H=4, W=4)
        assert run("gen", "--config", config) == EXIT_OK
        assert (tmp_path / "f_t.sst").stat().st_size == 8 + 4 * 3 + 8 * 16

    def test_byte_identical_reruns(self, small, tmp_path):
        run("gen", "--config", small)
        first = (tmp_path / "f_v.sst").read_bytes()
        run("gen", "--config", small)
        assert (tmp_path / "f_v.sst").read_bytes() == first
        run("gen", "--config", small, "--seed", 4)
        assert (tmp_path / "f_v.sst").read_bytes() != first

    def test_out_directory(self, small, tmp_path):
        target = tmp_path / "maps"
        target.mkdir()
        assert run("gen", "--config", small, "--out", target) == EXIT_OK
        assert (target / "f_t.sst").exists()

    def test_unwritable_directory(self, small, tmp_path, capsys):
        assert run("gen", "--config", small, "--out", tmp_path / "missing" / "dir") == EXIT_IO
        assert "I/O error" in capsys.readouterr().err


class TestFuse:
    def test_round_trip(self, small, tmp_path):
        run("gen", "--config", small)
        assert run("fuse", "--config", small) == EXIT_OK
        fused = read_sst1(tmp_path / "fused.sst")
        assert fused.shape == (2, 4, 4)
        first = (tmp_path / "fused.sst").read_bytes()
        assert run("fuse", "--config", small) == EXIT_OK
        assert (tmp_path / "fused.sst").read_bytes() == first

    def test_intermediates_and_weights(self, small, write_config, tmp_path):
        run("gen", "--config", small)
        out = tmp_path / "run" / "fused.sst"
        out.parent.mkdir()
        code = run(
            "fuse", "--config", small, "--out", out, "--dump-intermediates",
            "--save-weights", tmp_path / "weights",
        )
        assert code == EXIT_OK
        for name in ("cp_v", "cp_t", "sp_v", "sp_t", "enh_v", "enh_t"):
            assert read_sst1(out.parent / f"fused_{name}.sst").shape == (2, 4, 4)
        assert len(read_manifest(tmp_path / "weights")) == 72

        reloaded = write_config(
            name="reload.cfg", d=2, d_state=2, H=4, W=4, seed=99, weights=tmp_path / "weights"
        )
        assert run("fuse", "--config", reloaded) == EXIT_OK
        assert (tmp_path / "fused.sst").read_bytes() == out.read_bytes()

    def test_zero_inputs(self, small, tmp_path):
        write_sst1(tmp_path / "f_v.sst", Tensor.zeros((2, 4, 4)))
        write_sst1(tmp_path / "f_t.sst", Tensor.zeros((2, 4, 4)))
        assert run("fuse", "--config", small) == EXIT_OK
        assert not read_sst1(tmp_path / "fused.sst").array.any()

    @pytest.mark.parametrize("delta_bias", ["false", "true"])
    @pytest.mark.parametrize("seed", range(10))
    def test_default_sizes_across_seeds(self, write_config, tmp_path, seed, delta_bias):
        config = write_config(delta_bias=delta_bias)
        assert run("gen", "--config", config, "--seed", seed) == EXIT_OK
        assert run("fuse", "--config", config, "--seed", seed) == EXIT_OK
        fused = read_sst1(tmp_path / "fused.sst")
        assert fused.shape == (2, 8, 8)
        assert np.all(np.isfinite(fused.array))

    def test_single_modality_pairing(self, write_config, tmp_path):
        config = write_config(d=2, H=4, W=4, input_pairing="vv")
        run("gen", "--config", config)
        assert run("fuse", "--config", config) == EXIT_OK

    def test_shape_mismatch(self, small, write_config):
        run("gen", "--config", small)
        wrong = write_config(name="wrong.cfg", d=2, d_state=2, H=8, W=8)
        assert run("fuse", "--config", wrong) == EXIT_SHAPE

    def test_missing_input(self, small):
        assert run("fuse", "--config", small) == EXIT_IO

    def test_corrupt_input(self, small, tmp_path):
        run("gen", "--config", small)
        (tmp_path / "f_t.sst").write_bytes(b"not a tensor")
        assert run("fuse", "--config", small) == EXIT_IO


class TestErf:
    def test_conv_reference(self, write_config, tmp_path, capsys):
        config = write_config(d=2, H=8, W=8, trials=1)
        stem = tmp_path / "erf"
        assert run("erf", "--config", config, "--block", "conv3_ref", "--out", stem) == EXIT_OK
        assert "support 9/64" in capsys.readouterr().out
        pgm = (tmp_path / "erf.pgm").read_text().splitlines()
        assert pgm[0] == "P2"
        values = np.loadtxt(tmp_path / "erf.csv", delimiter=",")
        assert np.count_nonzero(values) == 9

    def test_bidirectional_support(self, write_config, tmp_path, capsys):
        config = write_config(d=2, d_state=2, H=4, W=4, seed=3, trials=1, delta_bias="true")
        for block in ("ff_bidir", "ff_uni_12"):
            assert run("erf", "--config", config, "--block", block, "--out", tmp_path / block) == EXIT_OK
        bidir = np.loadtxt(tmp_path / "ff_bidir.csv", delimiter=",")
        uni = np.loadtxt(tmp_path / "ff_uni_12.csv", delimiter=",")
        assert np.count_nonzero(bidir) > np.count_nonzero(uni)

    def test_unknown_block(self, small, capsys):
        assert run("erf", "--config", small, "--block", "vit") == EXIT_USAGE
        assert "conv3_ref" in capsys.readouterr().err


class TestVerify:
    def test_default_config_passes(self, write_config, capsys):
        config = write_config()
        assert run("verify", "--config", config) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PASS ") >= 6
        assert "FAIL" not in out
        assert run("history", "--config", config) == EXIT_OK
        assert "PASS" in capsys.readouterr().out.splitlines()[0]

    @pytest.mark.parametrize("seed", range(10))
    def test_passes_across_seeds(self, write_config, capsys, seed):
        config = write_config()
        assert run("verify", "--config", config, "--seed", seed) == EXIT_OK
        assert "FAIL" not in capsys.readouterr().out

    def test_zero_tolerance_fails(self, write_config, capsys):
        config = write_config(H=4, W=4, tol=0)
        assert run("verify", "--config", config) == EXIT_FAILED
        assert "scan_equivalence" in capsys.readouterr().err
        assert run("history", "--config", config) == EXIT_OK
        assert "FAIL" in capsys.readouterr().out


class TestComplexity:
    def test_table(self, write_config, capsys):
        config = write_config(d=64, H=32, W=32)
        assert run("complexity", "--config", config) == EXIT_OK
        out = capsys.readouterr().out
        ratio = float(out.strip().splitlines()[-1].split(":")[1])
        assert ratio > 1.0
        assert "195035136" in out


class TestUsage:
    def test_no_command(self):
        assert run() == EXIT_USAGE

    def test_unknown_option(self):
        assert run("gen", "--colour", "red") == EXIT_USAGE

    def test_bad_config(self, write_config):
        assert run("gen", "--config", write_config(d=0)) == EXIT_USAGE

    def test_missing_config(self, tmp_path):
        assert run("gen", "--config", tmp_path / "absent.cfg") == EXIT_IO

    def test_help(self, capsys):
        assert run("--help") == EXIT_OK
        assert "verify" in capsys.readouterr().out

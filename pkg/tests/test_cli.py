import numpy as np
import pytest

from blindsr.cli import main
from blindsr.compare import emit_comparison
from blindsr.degradation import load_kernel, gaussian_isotropic, dirac, DegradationConfig, degrade
from blindsr.image import load_image, save_image
from blindsr.kernel_space import load_basis, fit_default_basis, save_basis
from blindsr.toydata import write_toy_dataset


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, basis_s2):
    d = tmp_path_factory.mktemp("cli")
    write_toy_dataset(str(d / "hr"), 2, 48, seed=3)
    save_basis(basis_s2, str(d / "basis.pcab"))
    return d


class TestGenKernel:
    def test_setting1_happy_path(self, tmp_path):
        out = tmp_path / "k.txt"
        assert main(["gen-kernel", "--setting", "1", "--width", "1.8", "--side", "21", "--out", str(out)]) == 0
        np.testing.assert_allclose(load_kernel(str(out)), gaussian_isotropic(21, 1.8))

    def test_setting2(self, tmp_path):
        out = tmp_path / "k.txt"
        rc = main([
            "gen-kernel", "--setting", "2", "--sig1", "1.2", "--sig2", "3.0",
            "--theta", "0.5", "--noise-frac", "0.25", "--seed", "4", "--out", str(out),
        ])
        assert rc == 0
        assert load_kernel(str(out)).shape == (11, 11)

    def test_missing_required_flag_exits_1(self, capsys):
        assert main(["gen-kernel", "--setting", "1", "--width", "1.8"]) == 1
        assert "--out" in capsys.readouterr().err

    def test_missing_width_is_runtime_error(self, tmp_path, capsys):
        assert main(["gen-kernel", "--setting", "1", "--out", str(tmp_path / "k.txt")]) == 2
        assert "--width" in capsys.readouterr().err


class TestDegradeSolve:
    def test_degrade_solve_roundtrip(self, workdir, tmp_path):
        k = tmp_path / "k.txt"
        y = tmp_path / "y.png"
        sr = tmp_path / "sr.png"
        kout = tmp_path / "k_est.txt"
        trace = tmp_path / "trace.csv"
        hr = sorted((workdir / "hr").iterdir())[0]
        assert main(["gen-kernel", "--setting", "1", "--width", "1.2", "--out", str(k)]) == 0
        assert main([
            "degrade", "--in", str(hr), "--kernel", str(k), "--scale", "2",
            "--sigma", "0", "--seed", "7", "--out", str(y),
        ]) == 0
        assert load_image(str(y)).shape == (1, 24, 24)
        rc = main([
            "solve", "--in", str(y), "--scale", "2", "--basis", str(workdir / "basis.pcab"),
            "--solver", "classical", "--iters", "2", "--out", str(sr),
            "--out-kernel", str(kout), "--trace", str(trace),
        ])
        assert rc == 0
        assert load_image(str(sr)).shape == (1, 48, 48)
        load_kernel(str(kout))
        assert trace.read_text().count("\n") == 3

    def test_degrade_missing_input_exits_2(self, tmp_path, capsys):
        k = tmp_path / "k.txt"
        main(["gen-kernel", "--setting", "1", "--width", "1.0", "--out", str(k)])
        rc = main(["degrade", "--in", "missing_file.png", "--kernel", str(k), "--scale", "2", "--out", str(tmp_path / "y.png")])
        assert rc == 2
        assert "missing_file.png" in capsys.readouterr().err

    def test_unknown_flag_exits_1(self):
        assert main(["degrade", "--frobnicate"]) == 1

    def test_help_exits_0(self):
        assert main(["--help"]) == 0


class TestPcaFit:
    def test_writes_loadable_basis(self, tmp_path):
        out = tmp_path / "b.pcab"
        rc = main(["pca-fit", "--setting", "1", "--scale", "2", "--m", "6", "--n", "300", "--seed", "0", "--out", str(out)])
        assert rc == 0
        basis = load_basis(str(out))
        assert basis.m == 6 and basis.side == 21


class TestBenchCli:
    def test_bench_csv(self, workdir, tmp_path):
        out = tmp_path / "report.csv"
        js = tmp_path / "report.json"
        rc = main([
            "bench", "--hr", str(workdir / "hr"), "--scale", "2", "--kernels", "gaussian8",
            "--solver", "bicubic", "--basis", str(workdir / "basis.pcab"),
            "--iters", "1", "--out", str(out), "--json", str(js),
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 2 * 8
        assert js.exists()


class TestTrainCli:
    def test_train_toy_writes_checkpoint(self, workdir, tmp_path):
        ckpt = tmp_path / "toy.danw"
        curve = tmp_path / "loss.csv"
        rc = main([
            "train-toy", "--data", str(workdir / "hr"), "--scale", "2", "--setting", "1",
            "--steps", "3", "--batch", "2", "--crop", "16", "--seed", "0",
            "--basis", str(workdir / "basis.pcab"), "--out", str(ckpt), "--loss-curve", str(curve),
        ])
        assert rc == 0
        from blindsr.nn import load_checkpoint

        dan = load_checkpoint(str(ckpt))
        assert dan.cfg.scale == 2
        assert curve.read_text().startswith("step,loss")

    def test_neural_solve_from_checkpoint(self, workdir, tmp_path):
        ckpt = tmp_path / "toy.danw"
        main([
            "train-toy", "--data", str(workdir / "hr"), "--scale", "2", "--steps", "2",
            "--batch", "1", "--crop", "16", "--basis", str(workdir / "basis.pcab"), "--out", str(ckpt),
        ])
        y = tmp_path / "y.png"
        hr = sorted((workdir / "hr").iterdir())[0]
        img = load_image(str(hr))
        save_image(degrade(img, gaussian_isotropic(21, 1.0), DegradationConfig(scale=2)), str(y))
        sr = tmp_path / "sr.png"
        rc = main([
            "solve", "--in", str(y), "--scale", "2", "--basis", str(workdir / "basis.pcab"),
            "--solver", "neural", "--ckpt", str(ckpt), "--iters", "2", "--out", str(sr),
        ])
        assert rc == 0
        assert load_image(str(sr)).shape == img.shape


class TestCompare:
    def test_grid_pixel_copy_oracle(self, tmp_path):
        gen = np.random.default_rng(0)
        a, b = gen.random((1, 10, 12)), gen.random((1, 10, 12))
        pa, pb = tmp_path / "a.png", tmp_path / "b.png"
        save_image(a, str(pa))
        save_image(b, str(pb))
        out = tmp_path / "grid.png"
        rc = main(["compare", f"left={pa}", f"right={pb}", "--out", str(out)])
        assert rc == 0
        grid = load_image(str(out))
        from blindsr.cli import build_parser  # gutter/label constants live in compare
        from blindsr.compare import GUTTER, LABEL_BAND

        np.testing.assert_array_equal(
            grid[:, LABEL_BAND : LABEL_BAND + 10, :12], load_image(str(pa))
        )
        np.testing.assert_array_equal(
            grid[:, LABEL_BAND : LABEL_BAND + 10, 12 + GUTTER :], load_image(str(pb))
        )

    def test_inset_out_of_bounds_errors(self, tmp_path):
        gen = np.random.default_rng(1)
        imgs = [("a", gen.random((1, 8, 8))), ("b", gen.random((1, 8, 8)))]
        with pytest.raises(ValueError, match="bounds"):
            emit_comparison(imgs, str(tmp_path / "g.png"), inset=(5, 5, 6, 2))

    def test_dim_mismatch_needs_align(self, tmp_path):
        gen = np.random.default_rng(2)
        imgs = [("a", gen.random((1, 8, 8))), ("b", gen.random((1, 4, 4)))]
        with pytest.raises(ValueError, match="align"):
            emit_comparison(imgs, str(tmp_path / "g.png"))
        emit_comparison(imgs, str(tmp_path / "g.png"), align=True)  # no error

    def test_single_image_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="at least 2"):
            emit_comparison([("only", np.zeros((1, 4, 4)))], str(tmp_path / "g.png"))


class TestConfigFile:
    def test_config_provides_defaults_flags_win(self, tmp_path):
        cfgfile = tmp_path / "conf.txt"
        cfgfile.write_text("width=9.9\nside=11\n")
        out = tmp_path / "k.txt"
        rc = main([
            "gen-kernel", "--config", str(cfgfile), "--setting", "1",
            "--width", "1.5", "--out", str(out),
        ])
        assert rc == 0
        k = load_kernel(str(out))
        assert k.shape == (11, 11)  # side came from the config file
        np.testing.assert_allclose(k, gaussian_isotropic(11, 1.5))  # flag beat config

    def test_make_toy_data(self, tmp_path):
        rc = main(["make-toy-data", "--out", str(tmp_path / "d"), "--n", "2", "--size", "32"])
        assert rc == 0
        assert len(list((tmp_path / "d").iterdir())) == 2

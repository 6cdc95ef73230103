import numpy as np
import pytest

from freqsal import checkpoint, config, infer, io
from freqsal.cli import main
from freqsal.model import ModelConfig

from conftest import TOY


@pytest.fixture(scope="module")
def toy_ini(tmp_path_factory):
    cfg = config.Config()
    cfg.model = ModelConfig(**TOY)
    cfg.train = config.TrainConfig(epochs=1, batch_size=2)
    path = tmp_path_factory.mktemp("cfg") / "toy.ini"
    config.dump(cfg, path)
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, toy_ini):
    base = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(base / "data"), "--count", "3", "--size", "32", "--seed", "1"]) == 0
    assert main(["train", "--config", str(toy_ini), "--data", str(base / "data"), "--out", str(base / "run")]) == 0
    return base


def test_train_outputs(trained):
    run = trained / "run"
    for name in ("loss.csv", "epochs.csv", "model.fqsl", "config.ini"):
        assert (run / name).exists()


def test_infer_is_repeatable_and_matches_library(trained):
    ck, data = str(trained / "run" / "model.fqsl"), str(trained / "data")
    assert main(["infer", ck, data, "--out", str(trained / "p1")]) == 0
    assert main(["infer", ck, data, "--out", str(trained / "p2")]) == 0
    for sub in ("saliency", "edge"):
        for f in sorted((trained / "p1" / sub).glob("*.pgm")):
            assert f.read_bytes() == (trained / "p2" / sub / f.name).read_bytes()
    _, model = checkpoint.load(ck)
    rgb, th = io.load_rgb(trained / "data" / "rgb" / "0000.ppm"), io.load_gray(trained / "data" / "thermal" / "0000.pgm")
    S, _ = infer.predict(model, rgb, th[None])
    assert np.array_equal(io.read_pnm(trained / "p1" / "saliency" / "0000.pgm"), io.to_uint8(S))


def test_infer_resizes_or_refuses(trained, tmp_path):
    src = tmp_path / "odd"
    for sub in ("rgb", "thermal"):
        (src / sub).mkdir(parents=True)
    io.save_rgb(src / "rgb" / "a.ppm", np.full((3, 20, 24), 0.5))
    io.save_gray(src / "thermal" / "a.pgm", np.full((20, 24), 0.5))
    ck = str(trained / "run" / "model.fqsl")
    assert main(["infer", ck, str(src), "--out", str(tmp_path / "o")]) == 0
    assert io.read_pnm(tmp_path / "o" / "saliency" / "a.pgm").shape == (20, 24)
    assert main(["infer", ck, str(src), "--out", str(tmp_path / "s"), "--strict"]) == 2


def test_eval(trained, capsys):
    main(["infer", str(trained / "run" / "model.fqsl"), str(trained / "data"), "--out", str(trained / "pe")])
    capsys.readouterr()
    assert main(["eval", str(trained / "pe" / "saliency"), str(trained / "data" / "gt"), "--out", str(trained / "ev")]) == 0
    assert "MAE" in capsys.readouterr().out
    assert (trained / "ev" / "metrics.csv").exists() and (trained / "ev" / "pr_curve.csv").exists()


def test_spectrum_and_bench(trained, tmp_path):
    img = str(trained / "data" / "rgb" / "0001.ppm")
    assert main(["spectrum", "--image", img, "--out", str(tmp_path / "sp")]) == 0
    assert (tmp_path / "sp" / "0001_amplitude.pgm").exists()
    assert main(["spectrum", "--checkpoint", str(trained / "run" / "model.fqsl"), "--rgb", img,
                 "--thermal", str(trained / "data" / "thermal" / "0001.pgm"), "--feature", "f2",
                 "--out", str(tmp_path / "sp")]) == 0
    assert (tmp_path / "sp" / "f2_c0.csv").exists()
    assert main(["spectrum", "--checkpoint", str(trained / "run" / "model.fqsl"), "--rgb", img,
                 "--thermal", str(trained / "data" / "thermal" / "0001.pgm"), "--feature", "q7"]) == 2
    assert main(["bench", "--sizes", "8,16", "--channels", "4", "--repeats", "1",
                 "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "b.csv").exists()


def test_errors_exit_with_two(tmp_path, toy_ini, capsys):
    assert main(["train", "--config", str(toy_ini), "--data", str(tmp_path / "none")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nlearning_rate = 1\n")
    assert main(["train", "--config", str(bad), "--data", str(tmp_path)]) == 2
    assert main(["infer", str(tmp_path / "missing.fqsl"), str(tmp_path)]) == 2
    assert main(["eval", str(tmp_path), str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err

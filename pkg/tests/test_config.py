import pytest

from freqsal import config


def test_defaults():
    cfg = config.Config()
    assert cfg.loss.alpha == 1.0 and cfg.model.filters == 8
    assert cfg.train.batch_size == 3 and cfg.train.lr == 2e-5


def test_text_round_trip(tmp_path):
    cfg = config.from_text("[model]\ninput_size = 32\nstage_channels = 4, 4, 8, 8\n"
                           "[train]\nlr = 1e-4\nhflip = no\n[loss]\nlambda_cfl = 0.5\n")
    assert cfg.model.stage_channels == (4, 4, 8, 8) and cfg.train.hflip is False
    assert config.from_text(config.to_text(cfg)) == cfg
    config.dump(cfg, tmp_path / "c.ini")
    assert config.load(tmp_path / "c.ini") == cfg


def test_unknown_names_are_rejected():
    with pytest.raises(ValueError, match="valid keys"):
        config.from_text("[train]\nlearning_rate = 1\n")
    with pytest.raises(ValueError, match="unknown config sections"):
        config.from_text("[optim]\nlr = 1\n")
    with pytest.raises(ValueError):
        config.from_text("[train]\nrotate = maybe\n")
    with pytest.raises(ValueError):
        config.from_text("[train]\nlr = -1\n")

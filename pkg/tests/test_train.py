import csv

import numpy as np

from freqsal import checkpoint, config, data, train
from freqsal.model import ModelConfig

from conftest import TOY


def _cfg(root, **train_kw):
    cfg = config.Config()
    cfg.model = ModelConfig(**TOY)
    cfg.data.root = str(root)
    cfg.train = config.TrainConfig(epochs=1, batch_size=2, **train_kw)
    return cfg


def test_one_epoch_writes_logs_and_checkpoint(synth_root, tmp_path):
    res = train.train(_cfg(synth_root), tmp_path)
    assert res.steps == 2
    with open(tmp_path / "loss.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == train.LOG_FIELDS and len(rows) == 2
    assert float(rows[1]["total"]) == res.history[1]["total"]
    with open(tmp_path / "epochs.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1
    cfg, model = checkpoint.load(res.checkpoint)
    assert cfg == _cfg(synth_root)
    for name, t in res.model.store.items():
        assert np.array_equal(model.store[name].data, t.data)


def test_rerun_is_bitwise_identical(synth_root, tmp_path):
    a = train.train(_cfg(synth_root, seed=2), tmp_path / "a", threads=1)
    b = train.train(_cfg(synth_root, seed=2), tmp_path / "b", threads=4)
    assert a.checkpoint.read_bytes() == b.checkpoint.read_bytes()
    assert (tmp_path / "a" / "loss.csv").read_bytes() == (tmp_path / "b" / "loss.csv").read_bytes()


def test_max_steps_and_decay(synth_root):
    cfg = _cfg(synth_root)
    cfg.train = config.TrainConfig(epochs=3, batch_size=4, lr=1e-3, lr_segments=3)
    res = train.train(cfg, index=data.DatasetIndex.scan(synth_root))
    assert np.allclose([r["lr"] for r in res.history], [1e-3, 1e-4, 1e-5], rtol=1e-12, atol=0)
    assert train.train(cfg, max_steps=2).steps == 2

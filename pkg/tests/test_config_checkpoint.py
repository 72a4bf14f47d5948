import pytest

from contextproto.checkpoint import load_checkpoint, save_checkpoint
from contextproto.config import RunConfig, load_run_config
from contextproto.corpus import CorpusSpec, generate_corpus
from contextproto.episodes import EpisodeSpec
from contextproto.errors import CheckpointError, ConfigError
from contextproto.model import ModelConfig, ModelVariant
from contextproto.training import TrainSettings, train


def test_run_config_round_trips():
    cfg = RunConfig(variant="ccam", seed=9)
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert again.episode.context_source.value == "union"


def test_unknown_keys_rejected_everywhere():
    with pytest.raises(ConfigError, match="typo_key"):
        RunConfig.from_dict({"typo_key": 1})
    with pytest.raises(ConfigError, match="corpus"):
        RunConfig.from_dict({"corpus": {"n_clases": 10}})
    with pytest.raises(ConfigError, match="episode"):
        RunConfig.from_dict({"episode": {"way": 5}})
    with pytest.raises(ConfigError, match="train"):
        RunConfig.from_dict({"train": {"lr": 0.1}})


def test_partial_config_uses_defaults():
    cfg = RunConfig.from_dict({"variant": "protonet", "train": {"episodes": 7}})
    assert cfg.variant == "protonet"
    assert cfg.train.episodes == 7
    assert cfg.eval.episodes == 600


def test_bad_json_is_a_config_error(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_run_config(path)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    corpus = generate_corpus(CorpusSpec(n_classes=10, instances_per_class=8, d_f=4, d_w=8,
                                        context_size=(2, 3), test_fraction=0.4, seed=2))
    result = train(ModelVariant.FULL, corpus, EpisodeSpec(ways=3, shots=1, queries=3),
                   TrainSettings(episodes=25, seed=4), config=ModelConfig(d_f=4, d_x=6, d_w=8))
    return corpus, result.model


def test_checkpoint_round_trip_is_lossless(trained, tmp_path):
    corpus, model = trained
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, run_config={"note": 1})
    loaded, run_cfg = load_checkpoint(path)
    assert run_cfg == {"note": 1}
    assert loaded.variant is model.variant
    assert loaded.train_classes == model.train_classes
    assert loaded.test_classes == model.test_classes
    assert loaded.word_table.names == model.word_table.names
    assert loaded.word_table.vectors.tobytes() == model.word_table.vectors.tobytes()
    for name, tensor in model.params.named().items():
        assert loaded.params.named()[name].data.tobytes() == tensor.data.tobytes()
    assert loaded.params.config == model.params.config


def test_checkpoint_bytes_are_deterministic(trained, tmp_path):
    _, model = trained
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, model, run_config={"x": [1, 2]})
    save_checkpoint(b, model, run_config={"x": [1, 2]})
    assert a.read_bytes() == b.read_bytes()


def test_manifest_lists_arrays(trained, tmp_path):
    _, model = trained
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model)
    manifest = (tmp_path / "m.ckpt.manifest.txt").read_text()
    assert "encoder.w1" in manifest
    assert "variant: full" in manifest


def test_checkpoint_errors(tmp_path, trained):
    _, model = trained
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(bad)

    good = tmp_path / "good.ckpt"
    save_checkpoint(good, model)
    data = good.read_bytes()
    (tmp_path / "trunc.ckpt").write_bytes(data[: len(data) - 16])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(tmp_path / "trunc.ckpt")

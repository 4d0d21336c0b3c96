"""Shared fixtures: a small synthetic corpus and a short training run."""

import pytest

from lookahead_rnnt.config import Config
from lookahead_rnnt.taskgen import SynthSpec, generate_corpus
from lookahead_rnnt.train import train_run


def tiny_config(**overrides) -> Config:
    """A configuration small enough for second-scale training in tests."""
    values = {
        "model.feat_dim": 11,  # phone_inventory + silence
        "model.dim": 16,
        "model.joint_dim": 16,
        "model.token_embed_dim": 8,
        "lookahead.window_embed_dim": 6,
        "lookahead.hidden_dim": 16,
        "train.epochs": 2,
        "train.warmup_steps": 20,
        "data.phone_inventory": 10,
        "data.n_words": 16,
        "data.n_rare_words": 4,
        "data.n_train": 40,
        "data.n_test_in": 8,
        "data.n_test_rare": 8,
        "decode.beam_size": 2,
    }
    values.update(overrides)
    return Config(values)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Generate one small corpus shared by the slower integration tests."""
    cfg = tiny_config()
    data_dir = tmp_path_factory.mktemp("tiny_corpus")
    summary = generate_corpus(SynthSpec.from_config(cfg), seed=0, out_dir=data_dir)
    return cfg, data_dir, summary


@pytest.fixture(scope="session")
def tiny_run(tiny_corpus, tmp_path_factory):
    """One short training run (lookahead enabled) on the shared corpus."""
    cfg, data_dir, _ = tiny_corpus
    out_dir = tmp_path_factory.mktemp("tiny_run")
    record = train_run(cfg, data_dir, out_dir)
    return cfg, data_dir, out_dir, record

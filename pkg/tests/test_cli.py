"""End-user command surface: exit codes, artifacts, and the w-ablation."""

import json

import pytest

from lookahead_rnnt.cli import main
from lookahead_rnnt.corpus import SPLITS

from conftest import tiny_config


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """Config file, generated corpus, and a one-epoch checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    cfg = tiny_config()
    cfg.set("train.epochs", 1)
    cfg_path = root / "tiny.cfg"
    cfg.save(cfg_path)
    data_dir = root / "data"
    run_dir = root / "run"
    assert main(["gen-data", "--config", str(cfg_path), "--out-dir", str(data_dir)]) == 0
    assert main(["train", "--config", str(cfg_path), "--data-dir", str(data_dir),
                 "--out-dir", str(run_dir)]) == 0
    return cfg_path, data_dir, run_dir


def test_gen_data_writes_all_splits(cli_env):
    _, data_dir, _ = cli_env
    for split in SPLITS:
        for name in ("feats.bin", "text.tsv", "phones.tsv"):
            assert (data_dir / split / name).is_file()
    for name in ("vocab.txt", "lexicon.tsv", "train_counts.tsv"):
        assert (data_dir / name).is_file()


def test_train_writes_checkpoint_and_record(cli_env):
    _, _, run_dir = cli_env
    assert (run_dir / "checkpoint.ckpt").is_file()
    record = json.loads((run_dir / "run_record.json").read_text())
    assert record["epochs_run"] == 1
    assert (run_dir / "train_log.jsonl").is_file()


def test_decode_then_score(cli_env, tmp_path):
    cfg_path, data_dir, run_dir = cli_env
    hyp_path = tmp_path / "hyps.jsonl"
    assert main(["decode", "--config", str(cfg_path),
                 "--checkpoint", str(run_dir / "checkpoint.ckpt"),
                 "--data-dir", str(data_dir), "--split", "test_in",
                 "--out", str(hyp_path)]) == 0
    lines = [json.loads(l) for l in hyp_path.read_text().splitlines()]
    assert len(lines) == 8
    for rec in lines:
        assert set(rec) == {"utt_id", "tokens", "words", "log_prob", "horizon_stats"}
        assert isinstance(rec["log_prob"], float)

    csv_path = tmp_path / "scores.csv"
    assert main(["score", "--config", str(cfg_path), "--data-dir", str(data_dir),
                 "--split", "test_in", "--hyps", str(hyp_path),
                 "--out", str(csv_path)]) == 0
    rows = csv_path.read_text().strip().splitlines()
    assert rows[0] == "metric,split,value,count"
    metrics = [r.split(",")[0] for r in rows[1:]]
    assert metrics == ["wer", "rare_wer", "per", "wfed", "der", "hallucination"]
    assert all(r.split(",")[1] == "test_in" for r in rows[1:])


def test_score_rejects_incomplete_hypotheses(cli_env, tmp_path, capsys):
    cfg_path, data_dir, _ = cli_env
    partial = tmp_path / "partial.jsonl"
    partial.write_text(json.dumps(
        {"utt_id": "test_in_00000", "words": ["a"]}) + "\n")
    code = main(["score", "--config", str(cfg_path), "--data-dir", str(data_dir),
                 "--split", "test_in", "--hyps", str(partial),
                 "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_missing_corpus_is_a_clean_error(tmp_path, capsys):
    code = main(["train", "--data-dir", str(tmp_path / "nowhere"),
                 "--out-dir", str(tmp_path / "out")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("data.n_trian = 100\n")
    code = main(["gen-data", "--config", str(bad), "--out-dir", str(tmp_path / "d")])
    assert code == 1
    assert "n_trian" in capsys.readouterr().err


def test_seed_flag_overrides_config(cli_env, tmp_path):
    cfg_path, _, _ = cli_env
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen-data", "--config", str(cfg_path), "--seed", "5",
                 "--out-dir", str(a)]) == 0
    assert main(["gen-data", "--config", str(cfg_path), "--seed", "5",
                 "--out-dir", str(b)]) == 0
    assert (a / "vocab.txt").read_bytes() == (b / "vocab.txt").read_bytes()
    assert (a / "train" / "feats.bin").read_bytes() == \
           (b / "train" / "feats.bin").read_bytes()


def test_ablate_w_trains_one_model_per_w(cli_env, tmp_path):
    cfg_path, data_dir, _ = cli_env
    out_dir = tmp_path / "ablation"
    assert main(["ablate-w", "--config", str(cfg_path), "--data-dir", str(data_dir),
                 "--out-dir", str(out_dir), "--w-list", "2,3",
                 "--splits", "test_in"]) == 0
    rows = (out_dir / "ablation.csv").read_text().strip().splitlines()[1:]
    names = [r.split(",")[0] for r in rows]
    assert len([n for n in names if n.startswith("w=2:")]) == 6
    assert len([n for n in names if n.startswith("w=3:")]) == 6
    for w in (2, 3):
        assert (out_dir / f"w{w}" / "checkpoint.ckpt").is_file()
        record = json.loads((out_dir / f"w{w}" / "run_record.json").read_text())
        assert record["config"]["lookahead.w"] == w
        assert record["config"]["data.seed"] == tiny_config()["data.seed"]

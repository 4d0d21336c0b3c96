"""Command-line harness: gen-data, train, decode, score, ablate-w."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import Config
from .corpus import SPLITS, read_split
from .decode import DecodeConfig, decode_utterance
from .metrics import (MetricsConfig, load_lexicon, load_train_counts,
                      score_corpus, write_score_csv)
from .model import ModelConfig, TransducerModel
from .taskgen import SynthSpec, generate_corpus, hallucination_score
from .train import load_checkpoint, train_run, _rng
from .vocab import Vocabulary, tokens_to_words


def _load_config(path: str | None) -> Config:
    return Config.load(path) if path else Config()


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.set("data.seed", args.seed)
    spec = SynthSpec.from_config(cfg)
    summary = generate_corpus(spec, cfg["data.seed"], args.out_dir)
    print(f"wrote corpus to {args.out_dir}: "
          + ", ".join(f"{s}={summary.n_utts[s]}" for s in SPLITS)
          + f"; {len(summary.words)} words ({len(summary.rare_words)} rare)")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.set("train.seed", args.seed)
    record = train_run(cfg, args.data_dir, args.out_dir, resume=args.resume)
    final = record.epoch_loss[-1]["mean_total"] if record.epoch_loss else float("nan")
    print(f"trained {record.steps} steps; final epoch mean loss {final:.4f}; "
          f"checkpoint at {record.checkpoint}")
    return 0


def _build_model(cfg: Config, data_dir) -> tuple[TransducerModel, Vocabulary]:
    vocab = Vocabulary.load(Path(data_dir) / "vocab.txt")
    model = TransducerModel(ModelConfig.from_config(cfg, len(vocab)),
                            _rng(cfg["train.seed"], "init"))
    return model, vocab


def decode_split(cfg: Config, model: TransducerModel, vocab: Vocabulary,
                 data_dir, split: str, out_path) -> None:
    dcfg = DecodeConfig(beam_size=cfg["decode.beam_size"],
                        max_symbols_per_frame=cfg["decode.max_symbols_per_frame"],
                        mode=cfg["decode.mode"])
    cap = cfg["lookahead.max_horizon_frames"]
    utts = read_split(Path(data_dir) / split)
    with open(out_path, "w", encoding="utf-8") as f:
        for utt in utts:
            res = decode_utterance(model, utt.frames, dcfg,
                                   lookahead_enabled=cfg["lookahead.enabled"],
                                   w=cfg["lookahead.w"],
                                   max_horizon=cap if cap > 0 else None)
            token_strs = vocab.decode(res.tokens)
            f.write(json.dumps({
                "utt_id": utt.utt_id,
                "tokens": token_strs,
                "words": tokens_to_words(token_strs),
                "log_prob": res.log_prob,
                "horizon_stats": res.horizon_stats,
            }) + "\n")


def cmd_decode(args) -> int:
    cfg = _load_config(args.config)
    model, vocab = _build_model(cfg, args.data_dir)
    load_checkpoint(args.checkpoint, model)
    decode_split(cfg, model, vocab, args.data_dir, args.split, args.out)
    print(f"decoded {args.split} -> {args.out}")
    return 0


def read_decode_output(path) -> dict[str, list[str]]:
    """utt_id -> hypothesis word sequence from a decode JSONL file."""
    hyps = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            hyps[rec["utt_id"]] = rec["words"]
    return hyps


def score_split(cfg: Config, data_dir, split: str, hyp_path) -> list[tuple]:
    """(metric, split, value, count) rows for one decoded split."""
    data_dir = Path(data_dir)
    utts = read_split(data_dir / split)
    hyps_by_id = read_decode_output(hyp_path)
    missing = [u.utt_id for u in utts if u.utt_id not in hyps_by_id]
    if missing:
        raise ValueError(f"hypotheses missing for {len(missing)} utterances "
                         f"(first: {missing[0]})")
    refs = [u.words for u in utts]
    hyps = [hyps_by_id[u.utt_id] for u in utts]
    lexicon = load_lexicon(data_dir / "lexicon.tsv")
    counts = load_train_counts(data_dir / "train_counts.tsv")
    mcfg = MetricsConfig(rare_threshold=cfg["metrics.rare_threshold"])
    rows = [(metric, split, value, count)
            for metric, value, count in score_corpus(refs, hyps, lexicon, counts, mcfg)]
    hal = hallucination_score(refs, hyps, lexicon)
    rows.append(("hallucination", split, hal.rate, hal.ref_words))
    return rows


def cmd_score(args) -> int:
    cfg = _load_config(args.config)
    rows = score_split(cfg, args.data_dir, args.split, args.hyps)
    write_score_csv(args.out, rows)
    for metric, split, value, count in rows:
        print(f"{metric:>14}  {split}  {value:.4f}  (n={count})")
    return 0


def cmd_ablate_w(args) -> int:
    cfg = _load_config(args.config)
    w_list = [int(tok) for tok in args.w_list.split(",") if tok.strip()]
    if not w_list:
        raise ValueError("--w-list must name at least one window size")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = [s.strip() for s in args.splits.split(",") if s.strip()]
    rows = []
    for w in w_list:
        cfg_w = Config(cfg.to_dict())
        cfg_w.set("lookahead.w", w)
        run_dir = out_dir / f"w{w}"
        train_run(cfg_w, args.data_dir, run_dir)
        model, vocab = _build_model(cfg_w, args.data_dir)
        load_checkpoint(run_dir / "checkpoint.ckpt", model)
        for split in splits:
            hyp_path = run_dir / f"decode_{split}.jsonl"
            decode_split(cfg_w, model, vocab, args.data_dir, split, hyp_path)
            for metric, sp, value, count in score_split(cfg_w, args.data_dir, split, hyp_path):
                rows.append((f"w={w}:{metric}", sp, value, count))
        print(f"w={w} done")
    write_score_csv(out_dir / "ablation.csv", rows)
    print(f"ablation table -> {out_dir / 'ablation.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lookahead-rnnt",
        description="Toy transducer ASR with acoustic lookahead conditioning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override data.seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("decode", help="decode a split with a trained model")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--split", default="test_in", choices=SPLITS)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("score", help="score decode output against references")
    p.add_argument("--config", default=None)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--split", default="test_in", choices=SPLITS)
    p.add_argument("--hyps", required=True, help="decode output JSONL")
    p.add_argument("--out", required=True, help="score CSV path")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("ablate-w", help="train/decode/score across window sizes")
    p.add_argument("--config", default=None)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--w-list", default="2,3,5")
    p.add_argument("--splits", default="test_in,test_rare")
    p.set_defaults(fn=cmd_ablate_w)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

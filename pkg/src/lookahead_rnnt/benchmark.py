"""Paired baseline-vs-lookahead benchmark on the synthetic hallucination task.

For each seed: one corpus, two models trained from the same initialization and
visiting utterances in the same order — the only difference is whether the
lookahead conditioning is enabled. Both are decoded on the held-out splits and
scored for WER and hallucination rate. Reported relative reduction is the mean
over seeds of (baseline - lookahead) / baseline per-seed WER on test_rare.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cli import decode_split, score_split
from .config import Config
from .model import ModelConfig, TransducerModel
from .taskgen import SynthSpec, generate_corpus
from .train import load_checkpoint, train_run, _rng
from .vocab import Vocabulary


@dataclass
class ArmResult:
    wer: dict[str, float] = field(default_factory=dict)
    rare_wer: dict[str, float] = field(default_factory=dict)
    hallucination: dict[str, float] = field(default_factory=dict)


@dataclass
class BenchmarkResult:
    seeds: list[int]
    per_seed: list[dict]                  # {"baseline": ArmResult, "lookahead": ArmResult}
    mean_wer: dict[str, dict[str, float]]
    mean_hallucination: dict[str, dict[str, float]]
    relative_wer_reduction: float         # on test_rare

    def save(self, path) -> None:
        payload = {
            "seeds": self.seeds,
            "per_seed": [
                {arm: vars(res) for arm, res in seed_row.items()}
                for seed_row in self.per_seed
            ],
            "mean_wer": self.mean_wer,
            "mean_hallucination": self.mean_hallucination,
            "relative_wer_reduction": self.relative_wer_reduction,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")


def _run_arm(cfg: Config, enabled: bool, data_dir: Path, out_dir: Path,
             splits) -> ArmResult:
    cfg_arm = Config(cfg.to_dict())
    cfg_arm.set("lookahead.enabled", enabled)
    train_run(cfg_arm, data_dir, out_dir)
    vocab = Vocabulary.load(data_dir / "vocab.txt")
    model = TransducerModel(ModelConfig.from_config(cfg_arm, len(vocab)),
                            _rng(cfg_arm["train.seed"], "init"))
    load_checkpoint(out_dir / "checkpoint.ckpt", model)
    result = ArmResult()
    for split in splits:
        hyp_path = out_dir / f"decode_{split}.jsonl"
        decode_split(cfg_arm, model, vocab, data_dir, split, hyp_path)
        for metric, _, value, _ in score_split(cfg_arm, data_dir, split, hyp_path):
            if metric == "wer":
                result.wer[split] = value
            elif metric == "rare_wer":
                result.rare_wer[split] = value
            elif metric == "hallucination":
                result.hallucination[split] = value
    return result


def run_benchmark(cfg: Config, seeds, work_dir,
                  splits=("test_in", "test_rare")) -> BenchmarkResult:
    work_dir = Path(work_dir)
    per_seed = []
    for seed in seeds:
        cfg_seed = Config(cfg.to_dict())
        cfg_seed.set("data.seed", int(seed))
        cfg_seed.set("train.seed", int(seed))
        seed_dir = work_dir / f"seed{seed}"
        data_dir = seed_dir / "data"
        generate_corpus(SynthSpec.from_config(cfg_seed), int(seed), data_dir)
        row = {
            "baseline": _run_arm(cfg_seed, False, data_dir, seed_dir / "baseline", splits),
            "lookahead": _run_arm(cfg_seed, True, data_dir, seed_dir / "lookahead", splits),
        }
        per_seed.append(row)

    def mean_over_seeds(metric: str) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for arm in ("baseline", "lookahead"):
            out[arm] = {}
            for split in splits:
                vals = [getattr(row[arm], metric)[split] for row in per_seed]
                out[arm][split] = sum(vals) / len(vals)
        return out

    mean_wer = mean_over_seeds("wer")
    reductions = []
    for row in per_seed:
        base = row["baseline"].wer["test_rare"]
        look = row["lookahead"].wer["test_rare"]
        reductions.append((base - look) / base if base > 0 else 0.0)
    return BenchmarkResult(
        seeds=[int(s) for s in seeds],
        per_seed=per_seed,
        mean_wer=mean_wer,
        mean_hallucination=mean_over_seeds("hallucination"),
        relative_wer_reduction=sum(reductions) / len(reductions),
    )

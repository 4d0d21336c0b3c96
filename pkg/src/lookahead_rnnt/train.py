"""Training loop: Adam, warmup/inverse-sqrt schedule, bit-reproducible runs.

Reproducibility contract: everything derives from ``train.seed`` through
named substreams (init, and a per-epoch shuffle stream derived statelessly
from (seed, epoch)), utterances are visited one at a time, and the optimizer
state is checkpointed alongside the parameters — so training for N epochs and
training for k epochs, checkpointing, and resuming to N produce bit-identical
parameters.

Per-step JSONL logs record each loss part; ``total = main + lambda * iam``
holds to float64 round-off by construction and is asserted by tests.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autograd import Tape
from .checkpoint import load_tensors, save_tensors
from .config import Config
from .corpus import read_split
from .lookahead import combined_loss
from .model import ModelConfig, TransducerModel
from .vocab import Vocabulary, words_to_tokens

_STREAMS = {"init": 0, "shuffle": 1}


def _rng(seed: int, stream: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _STREAMS[stream], *extra]))


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    base_lr: float = 0.003
    warmup_steps: int = 200
    seed: int = 0
    checkpoint_every_epochs: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lookahead_enabled: bool = True
    lookahead_w: int = 3
    lambda_iam: float = 1.0
    max_horizon: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.checkpoint_every_epochs < 1:
            raise ValueError("checkpoint_every_epochs must be >= 1")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ValueError("Adam betas must be in [0, 1)")
        if self.lambda_iam < 0:
            raise ValueError("lambda_iam must be >= 0")

    @classmethod
    def from_config(cls, cfg: Config) -> "TrainConfig":
        cap = cfg["lookahead.max_horizon_frames"]
        return cls(
            epochs=cfg["train.epochs"],
            base_lr=cfg["train.base_lr"],
            warmup_steps=cfg["train.warmup_steps"],
            seed=cfg["train.seed"],
            checkpoint_every_epochs=cfg["train.checkpoint_every_epochs"],
            adam_beta1=cfg["train.adam_beta1"],
            adam_beta2=cfg["train.adam_beta2"],
            adam_eps=cfg["train.adam_eps"],
            lookahead_enabled=cfg["lookahead.enabled"],
            lookahead_w=cfg["lookahead.w"],
            lambda_iam=cfg["lookahead.lambda_iam"],
            max_horizon=cap if cap > 0 else None,
        )


def lr_at(step: int, base_lr: float, warmup_steps: int) -> float:
    """Linear warmup to ``base_lr`` then inverse-sqrt decay; step counts from 1."""
    if step < 1:
        raise ValueError("step counts from 1")
    return base_lr * min(step / warmup_steps, np.sqrt(warmup_steps / step))


class Adam:
    """Adam with per-parameter moments; parameters without a gradient this
    step are skipped (their moments stay put)."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name in sorted(self.params):
            p = self.params[name]
            if p.grad is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * (p.grad * p.grad)
            p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {f"opt.m.{n}": a.copy() for n, a in self.m.items()}
        state.update({f"opt.v.{n}": a.copy() for n, a in self.v.items()})
        state["opt.t"] = np.array(float(self.t))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["opt.t"])
        for name in self.m:
            self.m[name] = np.array(state[f"opt.m.{name}"], dtype=np.float64)
            self.v[name] = np.array(state[f"opt.v.{name}"], dtype=np.float64)


@dataclass
class RunRecord:
    config: dict
    seed: int
    steps: int
    epochs_run: int
    epoch_loss: list[dict]
    wall_time_sec: float
    checkpoint: str

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.__dict__, f, indent=2, sort_keys=True)
            f.write("\n")


def save_checkpoint(path, model: TransducerModel, adam: Adam,
                    epoch: int, step: int) -> None:
    state = model.state_dict()
    state.update(adam.state_dict())
    state["meta.epoch"] = np.array(float(epoch))
    state["meta.step"] = np.array(float(step))
    save_tensors(path, state)


def load_checkpoint(path, model: TransducerModel, adam: Adam | None = None):
    state = load_tensors(path)
    model.load_state_dict({n: a for n, a in state.items()
                           if not n.startswith(("opt.", "meta."))})
    if adam is not None:
        adam.load_state_dict(state)
    return int(state.get("meta.epoch", np.array(0.0))), int(state.get("meta.step", np.array(0.0)))


def train_run(cfg: Config, data_dir, out_dir, resume=None) -> RunRecord:
    """Train on ``data_dir``/train, writing checkpoints, logs, and a run record."""
    t_start = time.monotonic()
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tcfg = TrainConfig.from_config(cfg)

    vocab = Vocabulary.load(data_dir / "vocab.txt")
    model = TransducerModel(ModelConfig.from_config(cfg, len(vocab)),
                            _rng(tcfg.seed, "init"))
    adam = Adam(model.params, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
    utts = read_split(data_dir / "train")
    token_seqs = [vocab.encode(words_to_tokens(u.words)) for u in utts]

    start_epoch, step = 0, 0
    if resume is not None:
        epoch_done, step = load_checkpoint(resume, model, adam)
        start_epoch = epoch_done + 1

    log_path = out_dir / "train_log.jsonl"
    epoch_loss: list[dict] = []
    ckpt_path = out_dir / "checkpoint.ckpt"
    with open(log_path, "a" if resume is not None else "w", encoding="utf-8") as log:
        for epoch in range(start_epoch, tcfg.epochs):
            order = _rng(tcfg.seed, "shuffle", epoch).permutation(len(utts))
            sums = {"total": 0.0, "main": 0.0, "iam": 0.0}
            for idx in order:
                idx = int(idx)
                model.zero_grad()
                try:
                    with Tape() as tape:
                        total, parts = combined_loss(
                            model, utts[idx].frames, token_seqs[idx],
                            lookahead_enabled=tcfg.lookahead_enabled,
                            w=tcfg.lookahead_w, lambda_iam=tcfg.lambda_iam,
                            max_horizon=tcfg.max_horizon)
                        tape.backward(total)
                except ArithmeticError as e:
                    raise TrainingDiverged(
                        f"non-finite value at step {step + 1} "
                        f"(epoch {epoch}, utt {utts[idx].utt_id}): {e}") from e
                step += 1
                adam.step(lr_at(step, tcfg.base_lr, tcfg.warmup_steps))
                for key in sums:
                    sums[key] += parts[key]
                log.write(json.dumps({
                    "step": step, "epoch": epoch, "utt": utts[idx].utt_id,
                    "loss_total": parts["total"], "loss_main": parts["main"],
                    "loss_iam": parts["iam"],
                    "lr": lr_at(step, tcfg.base_lr, tcfg.warmup_steps),
                }) + "\n")
            epoch_loss.append({"epoch": epoch,
                               **{f"mean_{k}": v / len(utts) for k, v in sums.items()}})
            if ((epoch + 1) % tcfg.checkpoint_every_epochs == 0
                    or epoch == tcfg.epochs - 1):
                save_checkpoint(ckpt_path, model, adam, epoch, step)

    record = RunRecord(
        config=cfg.to_dict(), seed=tcfg.seed, steps=step,
        epochs_run=tcfg.epochs - start_epoch, epoch_loss=epoch_loss,
        wall_time_sec=time.monotonic() - t_start, checkpoint=str(ckpt_path),
    )
    record.save(out_dir / "run_record.json")
    return record

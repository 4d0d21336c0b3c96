"""Frame-synchronous greedy and beam decoding.

Both decoders walk frames left to right; within a frame a hypothesis may emit
up to ``max_symbols_per_frame`` labels before a blank is forced (its log-prob
is still accumulated, keeping scores honest). The beam search prunes, at every
inner emission step, the union of blank-terminated and label-extended
candidates down to ``beam_size`` — with a beam of one this chain of argmaxes
is the greedy decoder, by construction, tie-for-tie. Hypotheses with identical
label sequences are merged by adding their path probabilities, so a wide beam
approaches the true marginal argmax labeling rather than the best single
alignment.

Ordering ties break by (score desc, token sequence asc), where shorter
sequences sort before their extensions; as blank is token id 0, this matches
argmax's lowest-id preference exactly.

With lookahead enabled, windows come from the IAM greedy path computed once
per utterance, and every score query conditions the hypothesis's text row on
the current frame's window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import lookahead as la
from .autograd import Tensor
from .model import TransducerModel
from .vocab import BLANK_ID


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 8
    max_symbols_per_frame: int = 4
    mode: str = "beam"

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_symbols_per_frame < 1:
            raise ValueError(f"max_symbols_per_frame must be >= 1, got {self.max_symbols_per_frame}")
        if self.mode not in ("greedy", "beam"):
            raise ValueError(f"mode must be 'greedy' or 'beam', got {self.mode!r}")


@dataclass
class Hypothesis:
    """A partial labeling: tokens, merged log-probability, decoder state."""
    tokens: tuple[int, ...]
    log_prob: float
    state: tuple[Tensor, Tensor]   # (h, c) of the text encoder LSTM
    g_row: Tensor                  # text encoding for the current prefix
    pt_row: Tensor                 # its joint-space projection
    sort_key: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.sort_key = (-self.log_prob, self.tokens)


@dataclass
class DecodeResult:
    tokens: list[int]
    log_prob: float
    horizon_stats: dict | None = None
    nbest: list[tuple[list[int], float]] | None = None


def _le_start(model: TransducerModel):
    D = model.cfg.dim
    emb = ag.embedding(model.params["le.embed"], np.array([BLANK_ID], dtype=np.int64))
    return model._lstm_step("le", ag.slice_(emb, 0), Tensor(np.zeros(D)), Tensor(np.zeros(D)))


def _le_advance(model: TransducerModel, state, token: int):
    emb = ag.embedding(model.params["le.embed"], np.array([token], dtype=np.int64))
    return model._lstm_step("le", ag.slice_(emb, 0), state[0], state[1])


def _start_hyp(model: TransducerModel) -> Hypothesis:
    g_row, c = _le_start(model)
    return Hypothesis(tokens=(), log_prob=0.0, state=(g_row, c), g_row=g_row,
                      pt_row=model.project_text(g_row))


def _extend_hyp(model: TransducerModel, parent: Hypothesis, token: int,
                log_prob: float) -> Hypothesis:
    g_row, c = _le_advance(model, parent.state, token)
    return Hypothesis(tokens=parent.tokens + (token,), log_prob=log_prob,
                      state=(g_row, c), g_row=g_row,
                      pt_row=model.project_text(g_row))


def _log_probs(model: TransducerModel, pa_row: Tensor, pt_row: Tensor) -> np.ndarray:
    return ag.log_softmax(model.joint_from_parts(pa_row, pt_row)).data


def _prepare(model: TransducerModel, frames: np.ndarray, lookahead_enabled: bool,
             w: int, max_horizon: int | None):
    """Shared front half: encode, and derive windows + latency stats if needed."""
    h = model.acoustic_encode(frames)
    pa_rows = la.acoustic_projections(model, h)
    windows = None
    stats = None
    if lookahead_enabled:
        path = la.iam_greedy_path(la.iam_frame_logits(model, h, pa_rows))
        windows = la.extract_windows(path, w, max_horizon=max_horizon)
        lags = la.window_lags(path, w)
        stats = {"max_lag": int(lags.max()), "mean_lag": float(lags.mean())}
    return pa_rows, windows, stats


def _conditioned_pt(model: TransducerModel, hyp: Hypothesis, windows, t: int,
                    cache: dict) -> Tensor:
    """Joint-space text projection for hyp at frame t (window-conditioned)."""
    if windows is None:
        return hyp.pt_row
    pt = cache.get(hyp.tokens)
    if pt is None:
        pt = model.project_text(la.condition_row(model, hyp.g_row, windows[t]))
        cache[hyp.tokens] = pt
    return pt


def greedy_decode(model: TransducerModel, frames: np.ndarray, cfg: DecodeConfig,
                  *, lookahead_enabled: bool = False, w: int = 3,
                  max_horizon: int | None = None) -> DecodeResult:
    pa_rows, windows, stats = _prepare(model, frames, lookahead_enabled, w, max_horizon)
    hyp = _start_hyp(model)
    tokens: list[int] = []
    score = 0.0
    for t, pa in enumerate(pa_rows):
        cache: dict = {}
        emitted = 0
        while True:
            lp = _log_probs(model, pa, _conditioned_pt(model, hyp, windows, t, cache))
            if emitted >= cfg.max_symbols_per_frame:
                score += lp[BLANK_ID]  # forced blank at the per-frame cap
                break
            k = int(np.argmax(lp))
            score += lp[k]
            if k == BLANK_ID:
                break
            tokens.append(k)
            hyp = _extend_hyp(model, hyp, k, score)
            emitted += 1
    return DecodeResult(tokens=tokens, log_prob=score, horizon_stats=stats)


def beam_decode(model: TransducerModel, frames: np.ndarray, cfg: DecodeConfig,
                *, lookahead_enabled: bool = False, w: int = 3,
                max_horizon: int | None = None) -> DecodeResult:
    pa_rows, windows, stats = _prepare(model, frames, lookahead_enabled, w, max_horizon)
    W = cfg.beam_size
    beam = [_start_hyp(model)]
    for t, pa in enumerate(pa_rows):
        cache: dict = {}
        alive = beam
        done: dict[tuple[int, ...], Hypothesis] = {}
        for step in range(cfg.max_symbols_per_frame + 1):
            if not alive:
                break
            extensions = []  # (score, parent, token)
            for hyp in alive:
                lp = _log_probs(model, pa, _conditioned_pt(model, hyp, windows, t, cache))
                blank_score = hyp.log_prob + lp[BLANK_ID]
                prev = done.get(hyp.tokens)
                if prev is None:
                    done[hyp.tokens] = Hypothesis(hyp.tokens, blank_score,
                                                  hyp.state, hyp.g_row, hyp.pt_row)
                else:
                    # same labeling reached via a different alignment: merge
                    prev.log_prob = float(np.logaddexp(prev.log_prob, blank_score))
                    prev.sort_key = (-prev.log_prob, prev.tokens)
                if step < cfg.max_symbols_per_frame:
                    for k in range(1, lp.shape[0]):
                        extensions.append((hyp.log_prob + lp[k], hyp, k))
            pool = [(hyp.sort_key, hyp, None, None) for hyp in done.values()]
            pool += [((-score, parent.tokens + (k,)), None, parent, k)
                     for score, parent, k in extensions]
            pool.sort(key=lambda item: item[0])
            kept = pool[:W]
            done = {hyp.tokens: hyp for _, hyp, _, _ in kept if hyp is not None}
            # LE states are only computed for extensions that survived pruning
            alive = [_extend_hyp(model, parent, k, -key[0])
                     for key, hyp, parent, k in kept if hyp is None]
        beam = sorted(done.values(), key=lambda hyp: hyp.sort_key)
    best = beam[0]
    return DecodeResult(
        tokens=list(best.tokens), log_prob=best.log_prob, horizon_stats=stats,
        nbest=[(list(hyp.tokens), hyp.log_prob) for hyp in beam])


def decode_utterance(model: TransducerModel, frames: np.ndarray, cfg: DecodeConfig,
                     **kwargs) -> DecodeResult:
    fn = greedy_decode if cfg.mode == "greedy" else beam_decode
    return fn(model, frames, cfg, **kwargs)

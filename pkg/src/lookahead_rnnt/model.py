"""Transducer model: acoustic encoder, text encoder, joint network.

All parameters live in one flat name->Tensor dict so checkpointing and the
optimizer stay trivial. Everything that depends on the number of acoustic
frames is computed frame-by-frame (matvec per frame, never one big matmul
over time): appending frames must leave earlier rows bit-identical, and
batched GEMM does not guarantee that across row counts.

Joint network: ``logits = Wout @ tanh(Wa h + Wt g) + b`` with bias-free input
projections, so a zeroed text encoding contributes exactly nothing and
``joint(h, 0)`` *is* the acoustic-only (implicit acoustic model) distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import DimensionError, Tensor
from .config import Config
from .vocab import BLANK_ID


@dataclass(frozen=True)
class ModelConfig:
    feat_dim: int
    dim: int
    joint_dim: int
    ae_layers: int
    causal: bool
    downsample: int
    token_embed_dim: int
    vocab_size: int
    lookahead_w: int
    window_embed_dim: int
    lookahead_hidden: int

    def __post_init__(self):
        if self.ae_layers not in (1, 2):
            raise ValueError(f"ae_layers must be 1 or 2, got {self.ae_layers}")
        if self.downsample not in (1, 2):
            raise ValueError(f"downsample must be 1 (off) or 2, got {self.downsample}")
        if self.vocab_size < 2:
            raise ValueError("vocabulary needs at least blank plus one token")
        if self.lookahead_w < 1:
            raise ValueError(f"lookahead window must be >= 1, got {self.lookahead_w}")
        for field in ("feat_dim", "dim", "joint_dim", "token_embed_dim",
                      "window_embed_dim", "lookahead_hidden"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be positive")

    @classmethod
    def from_config(cls, cfg: Config, vocab_size: int) -> "ModelConfig":
        return cls(
            feat_dim=cfg["model.feat_dim"],
            dim=cfg["model.dim"],
            joint_dim=cfg["model.joint_dim"],
            ae_layers=cfg["model.ae_layers"],
            causal=cfg["model.causal"],
            downsample=cfg["model.downsample"],
            token_embed_dim=cfg["model.token_embed_dim"],
            vocab_size=vocab_size,
            lookahead_w=cfg["lookahead.w"],
            window_embed_dim=cfg["lookahead.window_embed_dim"],
            lookahead_hidden=cfg["lookahead.hidden_dim"],
        )


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _lstm_params(rng, in_dim: int, hidden: int):
    """Weight for [x;h] -> 3 gates (f,g,o) plus bias with forget bias 1."""
    W = _uniform(rng, (in_dim + hidden, 3 * hidden), in_dim + hidden)
    b = np.zeros(3 * hidden)
    b[:hidden] = 1.0  # forget gate open at init: gradients flow early
    return W, b


def lstm_gates(pre: Tensor, c: Tensor) -> Tensor:
    """Fused LSTM cell tail with coupled input/forget gates.

    ``pre`` holds 3H pre-activations (forget, candidate, output) and ``c``
    the previous cell (H).  The update is the convex combination
    ``c_new = f*c + (1-f)*g``, which keeps the cell inside [-1, 1] forever:
    an uncoupled cell on long frame sequences drifts until tanh(c) saturates
    and the encoder stops seeing its input.  Returns a (2, H) tensor stacking
    [new hidden; new cell]; fusing the elementwise ops into one tape record
    roughly halves the recurrence's op count.
    """
    if pre.ndim != 1 or c.ndim != 1 or pre.shape[0] != 3 * c.shape[0]:
        raise DimensionError(f"lstm_gates expects (3H,) and (H,), got {pre.shape}, {c.shape}")
    H = c.shape[0]
    a = pre.data
    f = 0.5 * (1.0 + np.tanh(0.5 * a[:H]))
    g = np.tanh(a[H:2 * H])
    o = 0.5 * (1.0 + np.tanh(0.5 * a[2 * H:]))
    c_new = f * c.data + (1.0 - f) * g
    th = np.tanh(c_new)
    out = np.stack([o * th, c_new])

    def bwd(grad):
        gc = grad[1] + grad[0] * o * (1.0 - th * th)
        gpre = np.concatenate([
            gc * (c.data - g) * f * (1.0 - f),
            gc * (1.0 - f) * (1.0 - g * g),
            grad[0] * th * o * (1.0 - o),
        ])
        return gpre, gc * f

    return ag.apply_op((pre, c), out, bwd)


class TransducerModel:
    """Holds parameters and the forward ops; no training logic here."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        p: dict[str, Tensor] = {}

        def param(name: str, arr: np.ndarray) -> None:
            p[name] = Tensor(arr, requires_grad=True, name=name)

        D, J, V = cfg.dim, cfg.joint_dim, cfg.vocab_size
        # acoustic encoder (+ an always-allocated reverse cell for the
        # non-causal variant, so checkpoints are layout-stable across modes)
        W, b = _lstm_params(rng, cfg.feat_dim, D)
        param("ae.l0.W", W)
        param("ae.l0.b", b)
        W, b = _lstm_params(rng, cfg.feat_dim, D)
        param("ae.bw.W", W)
        param("ae.bw.b", b)
        if cfg.ae_layers == 2:
            W, b = _lstm_params(rng, D, D)
            param("ae.l1.W", W)
            param("ae.l1.b", b)
        # text encoder
        param("le.embed", _uniform(rng, (V, cfg.token_embed_dim), cfg.token_embed_dim))
        W, b = _lstm_params(rng, cfg.token_embed_dim, D)
        param("le.W", W)
        param("le.b", b)
        # joint
        param("joint.Wa", _uniform(rng, (D, J), D))
        param("joint.Wt", _uniform(rng, (D, J), D))
        param("joint.Wout", _uniform(rng, (J, V), J))
        param("joint.b", np.zeros(V))
        # lookahead conditioning MLP; output projection starts at zero so the
        # conditioned model is exactly the baseline until training moves it
        w_in = D + cfg.lookahead_w * cfg.window_embed_dim
        param("cond.win_embed", _uniform(rng, (V, cfg.window_embed_dim), cfg.window_embed_dim))
        param("cond.W1", _uniform(rng, (w_in, cfg.lookahead_hidden), w_in))
        param("cond.b1", np.zeros(cfg.lookahead_hidden))
        param("cond.W2", np.zeros((cfg.lookahead_hidden, D)))
        self.params = p

    # -- parameter bookkeeping ------------------------------------------------

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ValueError(f"state dict mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, t in self.params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(f"{name}: shape {arr.shape} != expected {t.data.shape}")
            t.data = np.ascontiguousarray(arr)

    # -- recurrent cells ------------------------------------------------------

    def _lstm_step(self, prefix: str, x: Tensor, h: Tensor, c: Tensor):
        z = ag.concat([x, h])
        pre = ag.add(ag.matmul(z, self.params[prefix + ".W"]), self.params[prefix + ".b"])
        hc = lstm_gates(pre, c)
        return ag.slice_(hc, 0), ag.slice_(hc, 1)

    def _run_lstm(self, prefix: str, xs: list[Tensor]) -> list[Tensor]:
        D = self.cfg.dim
        h = Tensor(np.zeros(D))
        c = Tensor(np.zeros(D))
        rows = []
        for x in xs:
            h, c = self._lstm_step(prefix, x, h, c)
            rows.append(h)
        return rows

    # -- encoders -------------------------------------------------------------

    def acoustic_encode(self, frames: np.ndarray, causal: bool | None = None) -> Tensor:
        """Encode a T x feat_dim frame matrix into T' x dim (T' = T after stride).

        Causal mode consumes frames strictly left to right; appending frames
        can only append rows. Non-causal adds a reverse-direction pass over
        the first layer whose output is summed in.
        """
        if causal is None:
            causal = self.cfg.causal
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2:
            raise DimensionError(f"frames must be 2-D, got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise DimensionError("need at least one frame")
        if frames.shape[1] != self.cfg.feat_dim:
            raise DimensionError(
                f"feature dim {frames.shape[1]} does not match model.feat_dim {self.cfg.feat_dim}")
        if not np.all(np.isfinite(frames)):
            raise ag.NonFiniteError("non-finite acoustic features")
        x = Tensor(frames)
        xs = [ag.slice_(x, t) for t in range(frames.shape[0])]
        rows = self._run_lstm("ae.l0", xs)
        if not causal:
            back = self._run_lstm("ae.bw", xs[::-1])[::-1]
            rows = [ag.add(f, b) for f, b in zip(rows, back)]
        if self.cfg.downsample == 2:
            rows = rows[::2]
        if self.cfg.ae_layers == 2:
            rows = self._run_lstm("ae.l1", rows)
        return ag.stack(rows)

    def text_encode(self, tokens: list[int]) -> Tensor:
        """Encode a label prefix into (U+1) x dim; row u conditions on y_<u.

        Row 0 is the start state (the blank embedding doubles as SOS). Blank
        may not appear in the transcript itself.
        """
        V = self.cfg.vocab_size
        for tok in tokens:
            if not (0 < tok < V):
                raise ValueError(f"transcript token id {tok} invalid (blank={BLANK_ID}, V={V})")
        ids = np.array([BLANK_ID] + list(tokens), dtype=np.int64)
        emb = ag.embedding(self.params["le.embed"], ids)
        xs = [ag.slice_(emb, u) for u in range(len(ids))]
        return ag.stack(self._run_lstm("le", xs))

    # -- joint network ---------------------------------------------------------
    #
    # logits = Wout tanh(Wa h + Wt g) + b, split into reusable halves: the
    # acoustic projection is computed once per frame (a matvec, so per-frame
    # values are independent of T) and the text projection once per text row
    # or block (fixed shape across truncations of the same utterance).

    def project_acoustic(self, h_row: Tensor) -> Tensor:
        return ag.matmul(h_row, self.params["joint.Wa"])

    def project_text(self, g: Tensor) -> Tensor:
        """Accepts a single row (dim,) or a block (U+1, dim)."""
        return ag.matmul(g, self.params["joint.Wt"])

    def joint_from_parts(self, pa: Tensor, pt: Tensor) -> Tensor:
        z = ag.tanh(ag.add(pt, pa))
        return ag.add(ag.matmul(z, self.params["joint.Wout"]), self.params["joint.b"])

    def joint(self, h_row: Tensor, g_row: Tensor) -> Tensor:
        """Logits over the vocabulary for one (acoustic, text) row pair."""
        return self.joint_from_parts(self.project_acoustic(h_row),
                                     self.project_text(g_row))

    def zero_text_row(self) -> Tensor:
        return Tensor(np.zeros(self.cfg.dim))

    def zero_text_projection(self) -> Tensor:
        """What project_text yields for a zeroed text row (exactly zeros)."""
        return Tensor(np.zeros(self.cfg.joint_dim))

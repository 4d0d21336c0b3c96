"""Acoustic lookahead: ground text encodings in what is about to be said.

Pipeline per utterance:

1. The implicit acoustic model (IAM) is the transducer's own output
   distribution with the text encoding zeroed — pure acoustic evidence.
2. A greedy per-frame argmax over the IAM yields a frame-aligned token path
   (mostly blanks, with token spikes).
3. For each frame t, the lookahead window is the first ``w`` non-blank tokens
   on that path at positions >= t (inclusive), padded with blank when fewer
   remain. The window therefore only ever *shrinks from the front* as tokens
   pass by, which gives the suffix recurrence

       windows[t] == windows[t+1]                      if path[t] is blank
       windows[t] == [path[t]] + windows[t+1][:w-1]    otherwise

4. A residual MLP fuses each text row g_u with the window embedding:
   ghat[t,u] = g_u + F(g_u, window[t]). F's output projection starts at zero,
   so an untrained lookahead model is exactly the baseline transducer.

No gradient flows through the argmax path (it is plain integers); learning
reaches the mechanism through the window embeddings and F, and reaches the
IAM through its own auxiliary loss.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from . import transducer_loss as tl
from .autograd import Tensor
from .model import TransducerModel
from .vocab import BLANK_ID


# -- implicit acoustic model ---------------------------------------------------

def acoustic_projections(model: TransducerModel, h: Tensor) -> list[Tensor]:
    """Per-frame joint-space projections, shared by the IAM and the lattices."""
    return [model.project_acoustic(ag.slice_(h, t)) for t in range(h.shape[0])]


def iam_frame_logits(model: TransducerModel, h: Tensor,
                     pa_rows: list[Tensor] | None = None) -> list[Tensor]:
    """Per-frame vocabulary logits with the text encoding zeroed (one per t).

    Values are exactly ``model.joint(h_t, 0)``: a zero text row projects to
    exact zeros, so it is skipped rather than multiplied out.
    """
    if pa_rows is None:
        pa_rows = acoustic_projections(model, h)
    zero_pt = model.zero_text_projection()
    return [model.joint_from_parts(pa, zero_pt) for pa in pa_rows]


def iam_greedy_path(frame_logits: list[Tensor]) -> np.ndarray:
    """Frame-wise argmax token path; ties resolve to the lowest token id."""
    return np.array([int(np.argmax(row.data)) for row in frame_logits], dtype=np.int64)


# -- window extraction ----------------------------------------------------------

def extract_windows(path: np.ndarray, w: int, blank_id: int = BLANK_ID,
                    max_horizon: int | None = None) -> np.ndarray:
    """First ``w`` non-blank path tokens at positions >= t, per frame.

    Returns a (T, w) int array padded with ``blank_id``. ``max_horizon``
    restricts the scan to positions <= t + max_horizon (latency cap); the
    default looks arbitrarily far ahead.
    """
    path = np.asarray(path, dtype=np.int64)
    if path.ndim != 1:
        raise ValueError(f"path must be 1-D, got shape {path.shape}")
    if w < 1:
        raise ValueError(f"window size must be >= 1, got {w}")
    T = path.shape[0]
    windows = np.full((T, w), blank_id, dtype=np.int64)
    if max_horizon is None:
        # single right-to-left scan via the suffix recurrence
        buf: list[int] = []
        for t in range(T - 1, -1, -1):
            if path[t] != blank_id:
                buf = [int(path[t])] + buf[: w - 1]
            windows[t, : len(buf)] = buf
    else:
        if max_horizon < 0:
            raise ValueError(f"max_horizon must be >= 0, got {max_horizon}")
        for t in range(T):
            found = 0
            for p in range(t, min(t + max_horizon + 1, T)):
                if path[p] != blank_id:
                    windows[t, found] = path[p]
                    found += 1
                    if found == w:
                        break
    return windows


def window_lags(path: np.ndarray, w: int, blank_id: int = BLANK_ID) -> np.ndarray:
    """Frame lag until each window is complete: position of the w-th non-blank
    at/after t, minus t; frames whose window never fills lag to the last frame.
    """
    path = np.asarray(path, dtype=np.int64)
    T = path.shape[0]
    lags = np.zeros(T, dtype=np.int64)
    for t in range(T):
        found = 0
        lag = T - 1 - t
        for p in range(t, T):
            if path[p] != blank_id:
                found += 1
                if found == w:
                    lag = p - t
                    break
        lags[t] = lag
    return lags


# -- conditioning ----------------------------------------------------------------

def _window_flat_embedding(model: TransducerModel, window: np.ndarray) -> Tensor:
    window = np.asarray(window, dtype=np.int64)
    if window.shape[-1] != model.cfg.lookahead_w:
        raise ValueError(f"window has {window.shape[-1]} slots but the model was "
                         f"built for w={model.cfg.lookahead_w}")
    emb = ag.embedding(model.params["cond.win_embed"], window)
    return ag.reshape(emb, (emb.shape[0] * emb.shape[1],))


def condition_row(model: TransducerModel, g_row: Tensor, window: np.ndarray) -> Tensor:
    """ghat = g + F(g, window) for a single text row (decode-time path)."""
    win = _window_flat_embedding(model, window)
    cat = ag.concat([g_row, win])
    hid = ag.tanh(ag.add(ag.matmul(cat, model.params["cond.W1"]), model.params["cond.b1"]))
    return ag.add(g_row, ag.matmul(hid, model.params["cond.W2"]))


def condition(model: TransducerModel, g: Tensor, windows: np.ndarray) -> list[Tensor]:
    """Conditioned text blocks ghat[t] of shape (U+1) x dim, one per frame.

    Frames sharing identical window contents share one computed block (the
    window path is blank-dominated, so this collapses T blocks to roughly the
    number of emitted tokens). Sharing is purely an evaluation-order choice:
    each block depends only on (g, window contents), never on t or T.
    """
    U1 = g.shape[0]
    blocks: dict[tuple[int, ...], Tensor] = {}
    out: list[Tensor] = []
    for t in range(windows.shape[0]):
        key = tuple(int(v) for v in windows[t])
        block = blocks.get(key)
        if block is None:
            win = _window_flat_embedding(model, windows[t])
            tiled = ag.add(Tensor(np.zeros((U1, win.shape[0]))), win)
            cat = ag.concat([g, tiled])
            hid = ag.tanh(ag.add(ag.matmul(cat, model.params["cond.W1"]),
                                 model.params["cond.b1"]))
            block = ag.add(g, ag.matmul(hid, model.params["cond.W2"]))
            blocks[key] = block
        out.append(block)
    return out


# -- lattices ---------------------------------------------------------------------

def baseline_lattice(model: TransducerModel, h: Tensor, g: Tensor,
                     pa_rows: list[Tensor] | None = None) -> Tensor:
    """Unconditioned T x (U+1) x V logit lattice."""
    if pa_rows is None:
        pa_rows = acoustic_projections(model, h)
    pt = model.project_text(g)
    return ag.stack([model.joint_from_parts(pa, pt) for pa in pa_rows])


def lookahead_lattice(model: TransducerModel, h: Tensor, g: Tensor,
                      windows: np.ndarray,
                      pa_rows: list[Tensor] | None = None) -> Tensor:
    """Conditioned lattice: row t is joined against ghat[t] = F(g, window[t]).

    Frames sharing a window share one conditioned text projection.
    """
    if windows.shape[0] != h.shape[0]:
        raise ValueError(f"{windows.shape[0]} windows for {h.shape[0]} frames")
    if pa_rows is None:
        pa_rows = acoustic_projections(model, h)
    blocks = condition(model, g, windows)
    pt_cache: dict[int, Tensor] = {}
    rows = []
    for t, pa in enumerate(pa_rows):
        pt = pt_cache.get(id(blocks[t]))
        if pt is None:
            pt = model.project_text(blocks[t])
            pt_cache[id(blocks[t])] = pt
        rows.append(model.joint_from_parts(pa, pt))
    return ag.stack(rows)


# -- training objective -------------------------------------------------------------

def combined_loss(model: TransducerModel, frames: np.ndarray, tokens: list[int],
                  *, lookahead_enabled: bool, w: int, lambda_iam: float,
                  max_horizon: int | None = None):
    """Transcript loss + lambda * acoustic-only auxiliary loss.

    ``lookahead_enabled`` switches only the conditioning of the main lattice;
    the auxiliary term is present either way so model comparisons isolate the
    conditioning mechanism. Returns (total scalar Tensor, float parts dict).
    """
    h = model.acoustic_encode(frames)
    pa_rows = acoustic_projections(model, h)
    frame_logits = iam_frame_logits(model, h, pa_rows)
    g = model.text_encode(tokens)
    if lookahead_enabled:
        path = iam_greedy_path(frame_logits)
        windows = extract_windows(path, w, max_horizon=max_horizon)
        lattice = lookahead_lattice(model, h, g, windows, pa_rows)
    else:
        lattice = baseline_lattice(model, h, g, pa_rows)
    main = tl.rnnt_loss_op(lattice, tokens)
    iam = tl.iam_loss_op(ag.stack(frame_logits), tokens)
    total = ag.add(main, ag.mul(iam, float(lambda_iam)))
    parts = {"main": main.item(), "iam": iam.item(), "total": total.item()}
    return total, parts

"""Transducer marginal likelihood: log-domain forward/backward DP + gradient.

The lattice is T x (U+1) x V raw logits. At cell (t, u) the model has consumed
t frames and emitted u labels; blank advances t, label y[u] advances u. The
loss is -log of the sum over all monotonic alignments, computed by the alpha
recursion; the analytic gradient w.r.t. the raw logits has the classic
posterior-minus-occupancy form:

    d(-ll)/d logits[t,u,v] = occ(t,u) * softmax[t,u,v] - gamma(t,u,v)

where gamma(t,u,v) is the posterior probability of traversing edge v out of
cell (t,u) and occ(t,u) = sum_v gamma(t,u,v) = exp(alpha + beta - ll). The DP
itself is a handful of numpy loops, deliberately not built from taped
primitives; :func:`rnnt_loss_op` registers this closed-form gradient as one
custom tape record instead.

A corollary worth noting: the gradient w.r.t. the *unnormalized log-prob* of
the correct label at any cell is -gamma <= 0, so boosting that log-prob never
increases the loss. The same is NOT true of the raw logit (softmax coupling
can make it locally harmful); tests pin the true form.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import DimensionError, Tensor
from .vocab import BLANK_ID

NEG_INF = -np.inf


def _validate(logits: np.ndarray, labels, blank: int):
    if logits.ndim != 3:
        raise DimensionError(f"lattice must be T x (U+1) x V, got shape {logits.shape}")
    T, U1, V = logits.shape
    U = len(labels)
    if T < 1:
        raise DimensionError("lattice needs at least one frame")
    if U1 != U + 1:
        raise DimensionError(f"lattice has {U1} label rows but transcript needs {U + 1}")
    if not 0 <= blank < V:
        raise DimensionError(f"blank id {blank} outside vocabulary of size {V}")
    for u, tok in enumerate(labels):
        if not 0 <= tok < V:
            raise DimensionError(f"label {tok} at position {u} outside vocabulary")
        if tok == blank:
            raise DimensionError(f"transcript contains blank at position {u}")
    return T, U, V


def lattice_log_probs(logits: np.ndarray) -> np.ndarray:
    """Stable log-softmax over the vocabulary axis."""
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def forward_backward(log_probs: np.ndarray, labels, blank: int = BLANK_ID):
    """Alpha/beta tables and total log-likelihood.

    alpha[t,u]: log-prob of consuming t frames while emitting labels[:u].
    beta[t,u]:  log-prob of finishing from (t,u), including the final blank.
    Identity: alpha[t,u] + beta[t,u] marginalizes all paths through (t,u), and
    beta[0,0] == alpha[T-1,U] + log_probs[T-1,U,blank] == total ll.
    """
    T, U1, _ = log_probs.shape
    U = U1 - 1
    y = list(labels)

    alpha = np.full((T, U1), NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(1, T):
        alpha[t, 0] = alpha[t - 1, 0] + log_probs[t - 1, 0, blank]
    for u in range(1, U1):
        alpha[0, u] = alpha[0, u - 1] + log_probs[0, u - 1, y[u - 1]]
        for t in range(1, T):
            alpha[t, u] = np.logaddexp(
                alpha[t - 1, u] + log_probs[t - 1, u, blank],
                alpha[t, u - 1] + log_probs[t, u - 1, y[u - 1]],
            )

    beta = np.full((T, U1), NEG_INF)
    beta[T - 1, U] = log_probs[T - 1, U, blank]
    for t in range(T - 2, -1, -1):
        beta[t, U] = log_probs[t, U, blank] + beta[t + 1, U]
    for u in range(U - 1, -1, -1):
        beta[T - 1, u] = log_probs[T - 1, u, y[u]] + beta[T - 1, u + 1]
        for t in range(T - 2, -1, -1):
            beta[t, u] = np.logaddexp(
                log_probs[t, u, blank] + beta[t + 1, u],
                log_probs[t, u, y[u]] + beta[t, u + 1],
            )

    ll = alpha[T - 1, U] + log_probs[T - 1, U, blank]
    return alpha, beta, float(ll)


def rnnt_loss(logits: np.ndarray, labels, blank: int = BLANK_ID):
    """Loss and its analytic gradient w.r.t. the raw logit lattice."""
    logits = np.asarray(logits, dtype=np.float64)
    T, U, V = _validate(logits, labels, blank)
    y = list(labels)
    lp = lattice_log_probs(logits)
    alpha, beta, ll = forward_backward(lp, y, blank)
    if not np.isfinite(ll):
        raise ag.NonFiniteError("transducer likelihood underflowed to -inf")

    # beta_next[t,u]: continuation value after taking blank out of (t,u)
    beta_next = np.full((T, U + 1), NEG_INF)
    if T > 1:
        beta_next[:-1, :] = beta[1:, :]
    beta_next[T - 1, U] = 0.0  # final blank exits the lattice
    gamma = np.zeros((T, U + 1, V))
    gamma[:, :, blank] = np.exp(alpha + lp[:, :, blank] + beta_next - ll)
    if U > 0:
        label_lp = lp[:, :-1, :][:, np.arange(U), y]          # lp[t, u, y[u]]
        gamma_label = np.exp(alpha[:, :-1] + label_lp + beta[:, 1:] - ll)
        for u in range(U):
            gamma[:, u, y[u]] += gamma_label[:, u]

    occ = np.exp(alpha + beta - ll)
    grad = occ[:, :, None] * np.exp(lp) - gamma
    return -ll, grad


def rnnt_loss_op(lattice: Tensor, labels, blank: int = BLANK_ID) -> Tensor:
    """Scalar loss tensor wired into the tape via the closed-form gradient."""
    loss, grad = rnnt_loss(lattice.data, labels, blank)

    def bwd(g):
        return (g * grad,)

    return ag.apply_op((lattice,), np.float64(loss), bwd)


def tile_frame_logits(frame_logits: Tensor, n_rows: int) -> Tensor:
    """Broadcast per-frame logits (T x V) into a T x n_rows x V lattice.

    Used for the acoustic-only auxiliary loss: the text encoding is zeroed, so
    every label row of the lattice shares the frame's logits. Backward sums
    over the tiled axis via the usual unbroadcast.
    """
    T, V = frame_logits.shape
    expanded = ag.reshape(frame_logits, (T, 1, V))
    return ag.add(expanded, Tensor(np.zeros((1, n_rows, 1))))


def iam_loss_op(frame_logits: Tensor, labels, blank: int = BLANK_ID) -> Tensor:
    """Marginal transcript loss of the acoustic-only distribution.

    Same DP as the main loss, over a lattice whose label rows are all equal;
    this supervises the implicit acoustic model that the lookahead windows are
    extracted from.
    """
    lattice = tile_frame_logits(frame_logits, len(labels) + 1)
    return rnnt_loss_op(lattice, labels, blank)

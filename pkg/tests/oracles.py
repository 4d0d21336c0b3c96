"""Slow, independent reference implementations used to cross-check the package.

Everything here is written in the most literal style possible (explicit loops,
exhaustive enumeration, direct textbook formulas) so that agreement with the
optimized library code is meaningful evidence of correctness.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def matmul_triple_loop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product via three explicit Python loops."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
        squeeze = True
    else:
        squeeze = False
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for p in range(k):
                s += a[i, p] * b[p, j]
            out[i, j] = s
    return out[0] if squeeze else out


def log_softmax_direct(x: np.ndarray) -> np.ndarray:
    """log softmax along the last axis, by the direct definition."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1, x.shape[-1])
    out = np.empty_like(flat)
    for i, row in enumerate(flat):
        denom = math.log(sum(math.exp(v - max(row)) for v in row)) + max(row)
        out[i] = [v - denom for v in row]
    return out.reshape(x.shape)


def central_difference(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        grad[idx] = (f(xp) - f(xm)) / (2.0 * eps)
        it.iternext()
    return grad


def rnnt_loglik_enumerated(log_probs: np.ndarray, labels, blank: int = 0) -> float:
    """Transducer log-likelihood by summing over every monotonic alignment.

    An alignment is an interleaving of T-1 time advances (blank emissions)
    with U label emissions, followed by a final blank from the terminal
    lattice node.  Enumerate the positions of the label emissions among the
    first T-1+U moves.
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    T, u_plus_1, _ = lp.shape
    U = len(labels)
    assert u_plus_1 == U + 1
    n_moves = (T - 1) + U
    total = -math.inf
    for label_positions in itertools.combinations(range(n_moves), U):
        label_set = set(label_positions)
        t, u = 0, 0
        path_lp = 0.0
        for move in range(n_moves):
            if move in label_set:
                path_lp += lp[t, u, labels[u]]
                u += 1
            else:
                path_lp += lp[t, u, blank]
                t += 1
        path_lp += lp[T - 1, U, blank]
        total = np.logaddexp(total, path_lp)
    return float(total)


def edit_distance_recursive(ref, hyp, sub_cost, ins_cost, del_cost) -> float:
    """Plain recursive Levenshtein distance with pluggable costs (no memo)."""

    def rec(i: int, j: int) -> float:
        if i == len(ref) and j == len(hyp):
            return 0.0
        best = math.inf
        if i < len(ref) and j < len(hyp):
            best = min(best, sub_cost(ref[i], hyp[j]) + rec(i + 1, j + 1))
        if i < len(ref):
            best = min(best, del_cost(ref[i]) + rec(i + 1, j))
        if j < len(hyp):
            best = min(best, ins_cost(hyp[j]) + rec(i, j + 1))
        return best

    return rec(0, 0)


def windows_linear_scan(path, w: int, blank: int = 0, max_horizon=None):
    """Future-token windows by a literal forward scan from each frame."""
    T = len(path)
    out = []
    for t in range(T):
        limit = T if max_horizon is None else min(T, t + max_horizon + 1)
        win = [tok for tok in path[t:limit] if tok != blank][:w]
        win += [blank] * (w - len(win))
        out.append(win)
    return out


def best_labeling_exhaustive(score_fn, vocab_size: int, max_len: int):
    """argmax over every labeling up to max_len of a marginal-likelihood fn.

    score_fn(labels) must return the log marginal probability of the labeling.
    Ties break toward the lexicographically smaller token tuple, matching the
    deterministic tie rule used by the decoder.
    """
    best_labels, best_score = (), score_fn([])
    for n in range(1, max_len + 1):
        for labels in itertools.product(range(1, vocab_size), repeat=n):
            s = score_fn(list(labels))
            if s > best_score + 1e-12 or (
                abs(s - best_score) <= 1e-12 and labels < tuple(best_labels)
            ):
                best_labels, best_score = labels, s
    return list(best_labels), best_score

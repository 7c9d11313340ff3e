"""Linear-chain CRF over per-position tag scores.

A path's score is start[y0] + sum of emissions + sum of pairwise transition
scores + end[yL-1]. Training minimizes the negative log-likelihood computed
with a log-space forward pass; its gradient is (marginals - gold indicator),
obtained from a forward-backward sweep. Decoding is Viterbi with ties broken
toward the lowest tag id at each backtrack step.

All functions operate on a single sequence; batching is a caller-side loop.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def _validate(emissions: np.ndarray, trans: np.ndarray, start: np.ndarray, end: np.ndarray):
    L, K = emissions.shape
    if L < 1:
        raise ValueError("need at least one position")
    if trans.shape != (K, K) or start.shape != (K,) or end.shape != (K,):
        raise ValueError("transition/start/end shapes disagree with emissions")
    return L, K


def crf_score(
    emissions: np.ndarray,
    tags,
    trans: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
) -> float:
    """Unnormalized log-score of one tag path."""
    L, K = _validate(emissions, trans, start, end)
    tags = np.asarray(tags, dtype=int)
    if tags.shape != (L,):
        raise ValueError(f"need {L} tags, got shape {tags.shape}")
    if tags.min() < 0 or tags.max() >= K:
        raise ValueError("tag id out of range")
    total = start[tags[0]] + emissions[np.arange(L), tags].sum() + end[tags[-1]]
    total += trans[tags[:-1], tags[1:]].sum()
    return float(total)


def _forward_table(emissions, trans, start, end):
    L, K = emissions.shape
    log_alpha = np.empty((L, K))
    log_alpha[0] = start + emissions[0]
    for t in range(1, L):
        log_alpha[t] = emissions[t] + logsumexp(
            log_alpha[t - 1][:, None] + trans, axis=0
        )
    log_z = float(logsumexp(log_alpha[-1] + end))
    return log_alpha, log_z


def crf_nll(
    emissions: np.ndarray,
    tags,
    trans: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
    want_cache: bool = False,
):
    """Negative log-likelihood of the gold path: log Z - score(gold)."""
    _validate(emissions, trans, start, end)
    log_alpha, log_z = _forward_table(emissions, trans, start, end)
    gold = crf_score(emissions, tags, trans, start, end)
    nll = log_z - gold
    if not want_cache:
        return nll
    cache = dict(
        emissions=emissions, tags=np.asarray(tags, dtype=int), trans=trans,
        start=start, end=end, log_alpha=log_alpha, log_z=log_z,
    )
    return nll, cache


def crf_nll_backward(cache: dict) -> dict[str, np.ndarray]:
    """Exact gradients of crf_nll w.r.t. emissions, trans, start, end.

    The emission gradient is the classic (posterior marginals - gold
    one-hot); transition/start/end follow the same pattern with pairwise and
    boundary marginals.
    """
    emissions = cache["emissions"]
    trans, start, end = cache["trans"], cache["start"], cache["end"]
    tags, log_alpha, log_z = cache["tags"], cache["log_alpha"], cache["log_z"]
    L, K = emissions.shape

    log_beta = np.empty((L, K))
    log_beta[-1] = end
    for t in range(L - 2, -1, -1):
        log_beta[t] = logsumexp(
            trans + (emissions[t + 1] + log_beta[t + 1])[None, :], axis=1
        )

    marginals = np.exp(log_alpha + log_beta - log_z)

    d_emissions = marginals.copy()
    d_emissions[np.arange(L), tags] -= 1.0

    d_trans = np.zeros_like(trans)
    for t in range(L - 1):
        log_pair = (
            log_alpha[t][:, None]
            + trans
            + (emissions[t + 1] + log_beta[t + 1])[None, :]
            - log_z
        )
        d_trans += np.exp(log_pair)
        d_trans[tags[t], tags[t + 1]] -= 1.0

    d_start = marginals[0].copy()
    d_start[tags[0]] -= 1.0
    d_end = marginals[-1].copy()
    d_end[tags[-1]] -= 1.0

    return dict(emissions=d_emissions, trans=d_trans, start=d_start, end=d_end)


def viterbi(
    emissions: np.ndarray,
    trans: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
) -> np.ndarray:
    """Highest-scoring tag path; argmax ties pick the lowest tag id."""
    L, K = _validate(emissions, trans, start, end)
    delta = start + emissions[0]
    back = np.empty((L, K), dtype=int)
    for t in range(1, L):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = emissions[t] + cand[back[t], np.arange(K)]
    path = np.empty(L, dtype=int)
    path[-1] = int(np.argmax(delta + end))
    for t in range(L - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path

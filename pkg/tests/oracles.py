"""Independent reference implementations the test suite checks against.

Everything here is deliberately brute-force and shares no code with the
package: chunking by scanning all (start, end, label) triples, CRF partition
and decoding by exhaustive enumeration, and gradients by central finite
differences.
"""

from __future__ import annotations

import itertools

import numpy as np

from jointnlu.tagging import Chunk, SlotTag


def brute_force_chunks(tags: list[SlotTag]) -> set[Chunk]:
    """All (label, start, end) triples that form a maximal lenient-BIO chunk.

    A triple qualifies iff position `start` opens a run of `label` (a B, or
    an I not preceded by the same label), positions start+1..end all continue
    it with I-label, and the run cannot be extended right.
    """
    n = len(tags)
    out = set()
    labels = {t.label for t in tags if t.label}
    for label in labels:
        for start in range(n):
            for end in range(start, n):
                opens = tags[start] == SlotTag("B", label) or (
                    tags[start] == SlotTag("I", label)
                    and (start == 0 or tags[start - 1] not in (SlotTag("B", label), SlotTag("I", label)))
                )
                if not opens:
                    continue
                if any(tags[k] != SlotTag("I", label) for k in range(start + 1, end + 1)):
                    continue
                if end + 1 < n and tags[end + 1] == SlotTag("I", label):
                    continue
                out.add(Chunk(label, start, end))
    return out


def all_tag_sequences(length: int, labels: list[str]):
    """Every BIO tag sequence of exactly `length` over the given labels."""
    alphabet = [SlotTag("O")]
    for lab in labels:
        alphabet.append(SlotTag("B", lab))
        alphabet.append(SlotTag("I", lab))
    yield from itertools.product(alphabet, repeat=length)


def random_tag_sequence(rng: np.random.Generator, length: int, labels: list[str]) -> list[SlotTag]:
    alphabet = [SlotTag("O")]
    for lab in labels:
        alphabet.append(SlotTag("B", lab))
        alphabet.append(SlotTag("I", lab))
    return [alphabet[i] for i in rng.integers(0, len(alphabet), size=length)]


def crf_score(emissions, tags, trans, start, end) -> float:
    """Path score: start + emissions + transitions + end, summed directly."""
    s = start[tags[0]] + emissions[0, tags[0]]
    for t in range(1, len(tags)):
        s += trans[tags[t - 1], tags[t]] + emissions[t, tags[t]]
    s += end[tags[-1]]
    return float(s)


def crf_log_partition_enumerate(emissions, trans, start, end) -> float:
    """log sum over ALL tag sequences of exp(score); O(S^N), small N only."""
    n, s = emissions.shape
    scores = [
        crf_score(emissions, tags, trans, start, end)
        for tags in itertools.product(range(s), repeat=n)
    ]
    m = max(scores)
    return m + np.log(np.sum(np.exp(np.asarray(scores) - m)))

def crf_best_path_enumerate(emissions, trans, start, end, tol: float = 1e-9):
    """Argmax path by enumeration.

    Returns (path, score, n_optimal) where n_optimal counts the paths within
    tol of the maximum; the returned path is the lexicographically smallest
    of those. Path-level comparisons against a decoder are only meaningful
    when n_optimal == 1 (decoder tie-breaking is backtrack-order specific);
    score-level comparisons are always valid.
    """
    n, s = emissions.shape
    paths = list(itertools.product(range(s), repeat=n))
    scores = [crf_score(emissions, tags, trans, start, end) for tags in paths]
    best_score = max(scores)
    near = [p for p, sc in zip(paths, scores) if sc >= best_score - tol]
    return list(min(near)), best_score, len(near)


def crf_enumerate(emissions, trans, start, end, tol: float = 1e-9):
    """Vectorized exhaustive scoring of every tag path.

    Returns (log_partition, best_path, best_score, n_optimal). Semantics
    match crf_log_partition_enumerate / crf_best_path_enumerate; this form
    just scores all S^N paths in one numpy pass so large instance counts
    stay cheap.
    """
    n, s = emissions.shape
    paths = np.array(list(itertools.product(range(s), repeat=n)))
    scores = start[paths[:, 0]] + end[paths[:, -1]]
    scores = scores + emissions[np.arange(n), paths].sum(axis=1)
    if n > 1:
        scores = scores + trans[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    m = scores.max()
    log_z = m + np.log(np.sum(np.exp(scores - m)))
    near = np.flatnonzero(scores >= m - tol)
    # product() yields paths in lexicographic order, so the first
    # near-optimal index is the lexicographically smallest optimum.
    return float(log_z), list(paths[near[0]]), float(m), len(near)


def finite_difference(fn, params: dict[str, np.ndarray], name: str, step: float = 1e-5,
                      max_coords: int | None = None, rng: np.random.Generator | None = None):
    """Central-difference gradient of scalar fn(params) w.r.t. params[name].

    Returns (coords, grads): flat indices probed and their FD estimates. When
    max_coords is given, a random subset of coordinates is probed.
    """
    arr = params[name]
    size = arr.size
    if max_coords is not None and size > max_coords:
        assert rng is not None
        coords = rng.choice(size, size=max_coords, replace=False)
    else:
        coords = np.arange(size)
    grads = np.empty(len(coords))
    flat = arr.reshape(-1)
    for j, c in enumerate(coords):
        keep = flat[c]
        flat[c] = keep + step
        up = fn(params)
        flat[c] = keep - step
        down = fn(params)
        flat[c] = keep
        grads[j] = (up - down) / (2 * step)
    return coords, grads


def relative_gradient_error(analytic, fd) -> np.ndarray:
    """|a-f| / max(1e-8, |a|, |f|) elementwise, floored to 0 for near-zero diffs."""
    a = np.asarray(analytic, dtype=float)
    f = np.asarray(fd, dtype=float)
    diff = np.abs(a - f)
    denom = np.maximum(1e-8, np.maximum(np.abs(a), np.abs(f)))
    return np.where(diff < 1e-9, 0.0, diff / denom)

"""Per-position slot scoring with intent and word-feature fusion.

Each position's input is the concatenation [intent probabilities;
word-feature embedding; hidden state], squeezed through dropout and one
linear projection. The intent block uses the softmax of the CURRENT intent
logits and stays differentiable, so slot supervision also shapes the intent
head. The feature block can be switched off, narrowing the projection to
[intent probabilities; hidden state].
"""

from __future__ import annotations

import numpy as np

from .numerics import apply_mask, dropout_mask, softmax_backward, stable_softmax


def fused_width(n_intents: int, d_h: int, use_features: bool, feature_width: int = 32) -> int:
    return n_intents + (feature_width if use_features else 0) + d_h


def slot_logits(
    intent_logit_vec: np.ndarray,
    feature_vec: np.ndarray | None,
    hidden_vec: np.ndarray,
    W_s: np.ndarray,
    b_s: np.ndarray,
) -> np.ndarray:
    """Single-position slot scores: W_s [softmax(intent); features; hidden] + b_s."""
    blocks = [stable_softmax(intent_logit_vec)]
    if feature_vec is not None:
        blocks.append(feature_vec)
    blocks.append(hidden_vec)
    fused = np.concatenate(blocks)
    if W_s.shape[1] != fused.shape[0]:
        raise ValueError(
            f"W_s expects width {W_s.shape[1]}, fused input has {fused.shape[0]}"
        )
    return W_s @ fused + b_s


def slot_forward(
    y_int: np.ndarray,
    f_words: np.ndarray | None,
    H: np.ndarray,
    W_s: np.ndarray,
    b_s: np.ndarray,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    want_cache: bool = False,
):
    """Batched slot scores (batch, length, n_slots).

    y_int is (batch, n_intents); its softmax row is broadcast to every
    position. f_words is (batch, length, 32) or None when the feature path is
    ablated. Dropout hits the concatenated vector.
    """
    b, n, d_h = H.shape
    p_int = stable_softmax(y_int, axis=-1)
    blocks = [np.broadcast_to(p_int[:, None, :], (b, n, p_int.shape[-1]))]
    if f_words is not None:
        if f_words.shape[:2] != (b, n):
            raise ValueError("feature block shape disagrees with hidden states")
        blocks.append(f_words)
    blocks.append(H)
    fused = np.concatenate(blocks, axis=-1)
    if W_s.shape[1] != fused.shape[-1]:
        raise ValueError(
            f"W_s expects width {W_s.shape[1]}, fused input has {fused.shape[-1]}"
        )
    drop = dropout_mask(rng, fused.shape, dropout_rate)
    fused_used = apply_mask(fused, drop)
    logits = fused_used @ W_s.T + b_s
    if not want_cache:
        return logits
    cache = dict(
        p_int=p_int, f_width=0 if f_words is None else f_words.shape[-1],
        d_h=d_h, drop=drop, fused_used=fused_used,
    )
    return logits, cache


def slot_backward(
    d_logits: np.ndarray, cache: dict, W_s: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray, dict[str, np.ndarray]]:
    """Backprop through slot_forward.

    Returns (d_y_int, d_f_words, d_H, grads) where grads holds W_s and b_s.
    d_f_words is None when the feature path was off.
    """
    p_int = cache["p_int"]
    n_int = p_int.shape[-1]
    f_width, d_h = cache["f_width"], cache["d_h"]

    flat_d = d_logits.reshape(-1, d_logits.shape[-1])
    flat_fused = cache["fused_used"].reshape(-1, W_s.shape[1])
    grads = {"W_s": flat_d.T @ flat_fused, "b_s": flat_d.sum(axis=0)}

    d_fused = apply_mask(d_logits @ W_s, cache["drop"])
    d_p_rows = d_fused[..., :n_int]
    d_p_int = d_p_rows.sum(axis=1)  # every position shares the intent row
    d_y_int = softmax_backward(d_p_int, p_int, axis=-1)
    d_f_words = d_fused[..., n_int:n_int + f_width] if f_width else None
    d_H = d_fused[..., n_int + f_width:]
    return d_y_int, d_f_words, d_H, grads


def init_slot_params(
    rng: np.random.Generator,
    n_slots: int,
    n_intents: int,
    d_h: int,
    use_features: bool,
    scale: float = 0.02,
) -> dict[str, np.ndarray]:
    width = fused_width(n_intents, d_h, use_features)
    return {
        "W_s": rng.normal(0.0, scale, (n_slots, width)),
        "b_s": np.zeros(n_slots),
    }

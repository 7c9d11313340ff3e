"""Joint training: the weighted two-task objective, the schedule and
optimizer regime, per-epoch dev evaluation, and best-checkpoint selection."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import IntentVocab, SlotVocab, TaggedUtterance
from .encoder import EncoderConfig
from .features import WordFeaturizer
from .model import (
    Batch,
    Checkpoint,
    ModelConfig,
    align_utterance,
    decode_word_tags,
    init_model_params,
    make_batch,
    model_loss_and_grads,
    predict_batch,
)
from .optim import AdamW, lr_schedule
from .subwords import AlignedSequence, WordPieceVocab, train_vocab
from .tagging import (
    EvalReport,
    O_TAG,
    intent_accuracy,
    per_token_micro_f1,
    sentence_accuracy,
    slot_f1,
)

# Encoder dimensions small enough to train on one CPU core in minutes.
DESK_ENCODER = EncoderConfig(
    vocab_size=4, d_h=64, n_layers=2, n_heads=4, d_ff=128, max_len=50
)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or parameters; surfaced,
    never hidden behind a cryptic downstream shape or math error."""


@dataclass(frozen=True)
class TrainConfig:
    """The full training regime. Defaults are the published desk settings."""

    gamma: float = 0.6
    epochs: int = 50
    batch_size: int = 64
    max_len: int = 50
    learning_rate: float = 8e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-6
    weight_decay: float = 0.01
    warmup_proportion: float = 0.1
    dropout_rate: float = 0.1
    seed: int = 0
    slot_mode: str = "softmax"
    slot_features: bool = True
    intent_pool: str = "attention"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.epochs < 1 or self.batch_size < 1 or self.max_len < 3:
            raise ValueError("epochs, batch_size, max_len out of range")
        if self.slot_mode not in ("softmax", "crf"):
            raise ValueError(f"bad slot_mode {self.slot_mode!r}")
        if self.intent_pool not in ("attention", "start_token"):
            raise ValueError(f"bad intent_pool {self.intent_pool!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def to_kv_text(self) -> str:
        return "".join(
            f"{f.name}={getattr(self, f.name)!r}\n"
            for f in dataclasses.fields(self)
        )

    @classmethod
    def from_kv_text(cls, text: str) -> "TrainConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"line {lineno}: unknown setting {key!r}")
            kwargs[key] = _parse_value(fields[key].type, value, lineno)
        return cls(**kwargs)


def _parse_value(type_name, text: str, lineno: int):
    name = type_name if isinstance(type_name, str) else type_name.__name__
    if name == "bool":
        low = text.lower()
        if low in ("true", "on", "1", "yes"):
            return True
        if low in ("false", "off", "0", "no"):
            return False
        raise ValueError(f"line {lineno}: not a boolean: {text!r}")
    if name == "int":
        return int(text)
    if name == "float":
        return float(text)
    return text.strip("'\"")


def validate_config_text(text: str):
    """Parse a config file, collecting every problem instead of stopping at
    the first one. Returns (config, []) on success, (None, errors) otherwise.
    """
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    kwargs = {}
    errors: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            errors.append(f"line {lineno}: unknown setting {key!r}")
            continue
        try:
            kwargs[key] = _parse_value(fields[key].type, value, lineno)
        except ValueError:
            errors.append(f"line {lineno}: bad value for {key}: {value!r}")
    # Probe each parsed value on its own so one out-of-range setting does
    # not hide the next.
    for key, value in kwargs.items():
        try:
            TrainConfig(**{key: value})
        except ValueError as err:
            errors.append(f"{key}: {err}")
    if errors:
        return None, errors
    return TrainConfig(**kwargs), []


def joint_loss(l_intent: float, l_slot: float, gamma: float) -> float:
    """Two-task mix: gamma weighs the intent term, (1-gamma) the slot term."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    return gamma * l_intent + (1.0 - gamma) * l_slot


@dataclass(frozen=True)
class LossBreakdown:
    """One step's loss terms; l_joint always equals the exact mix."""

    l_intent: float
    l_slot: float
    l_joint: float

    @classmethod
    def mix(cls, l_intent: float, l_slot: float, gamma: float) -> "LossBreakdown":
        return cls(l_intent, l_slot, joint_loss(l_intent, l_slot, gamma))


def slot_loss_positions(seq: AlignedSequence) -> Tuple[int, ...]:
    """Positions whose slot predictions carry loss: every real piece,
    including continuation pieces and the framing markers. Batch padding
    beyond len(seq) never contributes."""
    return tuple(range(len(seq)))


def select_best(reports: Sequence[EvalReport]) -> int:
    """Epoch whose dev report maximizes the three-measure sum; ties go to
    the earliest epoch."""
    if not reports:
        raise ValueError("need at least one report")
    scores = [r.selection_score for r in reports]
    return int(np.argmax(scores))


@dataclass(frozen=True)
class EpochRecord:
    """One append-only training-log line."""

    epoch: int
    l_intent: float
    l_slot: float
    l_joint: float
    dev: EvalReport

    def to_line(self) -> str:
        d = self.dev.to_dict()
        parts = [
            f"epoch={self.epoch}",
            f"l_intent={self.l_intent!r}",
            f"l_slot={self.l_slot!r}",
            f"l_joint={self.l_joint!r}",
        ]
        parts.extend(f"{k}={v!r}" for k, v in d.items())
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "EpochRecord":
        d = {}
        for token in line.split():
            key, value = token.split("=", 1)
            d[key] = value
        return cls(
            epoch=int(d["epoch"]),
            l_intent=float(d["l_intent"]),
            l_slot=float(d["l_slot"]),
            l_joint=float(d["l_joint"]),
            dev=EvalReport.from_dict(d),
        )


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Checkpoint
    best_epoch: int
    history: Tuple[EpochRecord, ...]


def evaluate(
    params: Dict[str, np.ndarray],
    cfg: ModelConfig,
    seqs: Sequence[AlignedSequence],
    utterances: Sequence[TaggedUtterance],
    intent_vocab: IntentVocab,
    slot_vocab: SlotVocab,
    batch_size: int = 64,
) -> EvalReport:
    """Word-level scoring of the model on an aligned corpus.

    Predictions on truncated sequences are padded with O for the dropped
    words, so they score as ordinary errors instead of crashing alignment.
    """
    if len(seqs) != len(utterances):
        raise ValueError("aligned sequences and utterances must pair up")
    pred_intents: List[str] = []
    pred_tags: List[list] = []
    for lo in range(0, len(seqs), batch_size):
        chunk = seqs[lo:lo + batch_size]
        batch = make_batch(chunk, [0] * len(chunk), slot_vocab)
        intent_ids, piece_preds, _ = predict_batch(params, cfg, batch)
        for seq, iid, pieces in zip(chunk, intent_ids, piece_preds):
            pred_intents.append(intent_vocab.decode(int(iid)))
            pred_tags.append(decode_word_tags(seq, pieces, slot_vocab))
    gold_intents = [u.intent for u in utterances]
    gold_tags = [list(u.tags) for u in utterances]
    for i, (gold, pred) in enumerate(zip(gold_tags, pred_tags)):
        if len(pred) < len(gold):
            pred_tags[i] = pred + [O_TAG] * (len(gold) - len(pred))
    chunk_scores = slot_f1(gold_tags, pred_tags)
    return EvalReport(
        intent_accuracy=intent_accuracy(gold_intents, pred_intents),
        sentence_accuracy=sentence_accuracy(
            gold_intents, pred_intents, gold_tags, pred_tags
        ),
        slot_f1=chunk_scores.f1,
        per_token_micro_f1=per_token_micro_f1(gold_tags, pred_tags),
        tp=chunk_scores.tp,
        fp=chunk_scores.fp,
        fn=chunk_scores.fn,
    )


def train(
    train_corpus: Sequence[TaggedUtterance],
    dev_corpus: Sequence[TaggedUtterance],
    config: TrainConfig,
    featurizer: WordFeaturizer,
    *,
    encoder: Optional[EncoderConfig] = None,
    piece_vocab: Optional[WordPieceVocab] = None,
    vocab_target: int = 300,
    log_path=None,
) -> TrainResult:
    """Fit the joint model and return the dev-selected checkpoint.

    Label and sub-word vocabularies come from the train split only. The
    `encoder` argument is a dimension template; its vocab_size and max_len
    are always replaced to match the trained sub-word vocabulary and
    config.max_len.
    """
    if not train_corpus:
        raise ValueError("train corpus is empty")
    rng = np.random.default_rng(config.seed)

    if piece_vocab is None:
        words = [w for u in train_corpus for w in u.words]
        piece_vocab = train_vocab(words, vocab_target)
    intent_vocab = IntentVocab.from_corpus(train_corpus)
    slot_vocab = SlotVocab.from_corpus(train_corpus)

    template = encoder if encoder is not None else DESK_ENCODER
    enc_cfg = dataclasses.replace(
        template, vocab_size=len(piece_vocab.pieces), max_len=config.max_len
    )
    model_cfg = ModelConfig(
        encoder=enc_cfg,
        n_intents=len(intent_vocab),
        n_slots=len(slot_vocab),
        slot_mode=config.slot_mode,
        slot_features=config.slot_features,
        intent_pool=config.intent_pool,
        dropout_rate=config.dropout_rate,
    )
    params = init_model_params(model_cfg, rng)
    opt = AdamW(
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.epsilon,
        weight_decay=config.weight_decay,
    )

    train_seqs = [
        align_utterance(u, piece_vocab, featurizer, config.max_len)
        for u in train_corpus
    ]
    train_intents = np.array(
        [intent_vocab.encode(u.intent) for u in train_corpus], dtype=int
    )
    dev_seqs = [
        align_utterance(u, piece_vocab, featurizer, config.max_len)
        for u in dev_corpus
    ]

    n = len(train_seqs)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = steps_per_epoch * config.epochs
    step = 0
    history: List[EpochRecord] = []
    best_params: Dict[str, np.ndarray] = {}
    best_score = -np.inf
    best_epoch = 0
    log_file = open(log_path, "a", encoding="utf-8") if log_path else None
    try:
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            sums = np.zeros(3)
            n_batches = 0
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                batch = make_batch(
                    [train_seqs[i] for i in idx],
                    train_intents[idx],
                    slot_vocab,
                )
                try:
                    # Healthy runs never overflow: softmax is shift
                    # protected, so inf/nan here means the step blew up.
                    with np.errstate(over="raise", invalid="raise"):
                        l_int, l_slot, grads = model_loss_and_grads(
                            params, model_cfg, batch, config.gamma,
                            config.dropout_rate, rng,
                        )
                except FloatingPointError as err:
                    raise DivergenceError(
                        f"non-finite activations at epoch {epoch}, "
                        f"step {step}: {err}"
                    ) from err
                l_jnt = joint_loss(l_int, l_slot, config.gamma)
                if not (np.isfinite(l_int) and np.isfinite(l_slot)):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch}, step {step}: "
                        f"intent={l_int}, slot={l_slot}"
                    )
                lr = lr_schedule(
                    step, total_steps, config.warmup_proportion,
                    config.learning_rate,
                )
                opt.step(params, grads, lr)
                if not all(np.isfinite(v).all() for v in params.values()):
                    raise DivergenceError(
                        f"non-finite parameters after epoch {epoch}, "
                        f"step {step}; try a lower learning rate"
                    )
                step += 1
                sums += (l_int, l_slot, l_jnt)
                n_batches += 1

            dev_report = evaluate(
                params, model_cfg, dev_seqs, dev_corpus,
                intent_vocab, slot_vocab, config.batch_size,
            )
            means = [float(x) for x in sums / n_batches]
            record = EpochRecord(epoch, *means, dev=dev_report)
            history.append(record)
            if log_file:
                log_file.write(record.to_line() + "\n")
                log_file.flush()
            if dev_report.selection_score > best_score:
                best_score = dev_report.selection_score
                best_epoch = epoch
                best_params = {k: v.copy() for k, v in params.items()}
    finally:
        if log_file:
            log_file.close()

    checkpoint = Checkpoint(
        params=best_params,
        config=model_cfg,
        intent_vocab=intent_vocab,
        slot_vocab=slot_vocab,
        piece_vocab=piece_vocab,
        featurizer=featurizer,
    )
    return TrainResult(
        checkpoint=checkpoint,
        best_epoch=best_epoch,
        history=tuple(history),
    )

"""Word-piece vocabulary induction, greedy tokenization, and the alignment
bookkeeping that maps word-level tags onto piece-level sequences.

Aligned sequences are framed by start/end markers. The first piece of each
word carries the word's tag; every following piece and both markers carry X.
Word features are copied to every piece of the word; markers get zeros. A
boolean `active` mask remembers which positions are first pieces so that
piece-level predictions can be gathered back to word level.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import FEATURE_DIM
from .tagging import AlignmentError, O_TAG, SlotTag, X_TAG

CONTINUATION = "##"

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
BOS_TOKEN = "[BOS]"
EOS_TOKEN = "[EOS]"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN)


@dataclass(frozen=True)
class WordPieceVocab:
    """Dense piece->id table; ids 0..3 are reserved, base pieces follow."""

    pieces: tuple[str, ...]
    ids: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if tuple(self.pieces[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the reserved tokens")
        if len(set(self.pieces)) != len(self.pieces):
            raise ValueError("duplicate pieces in vocabulary")
        object.__setattr__(self, "ids", {p: i for i, p in enumerate(self.pieces)})

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def pad_id(self) -> int:
        return self.ids[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.ids[UNK_TOKEN]

    @property
    def bos_id(self) -> int:
        return self.ids[BOS_TOKEN]

    @property
    def eos_id(self) -> int:
        return self.ids[EOS_TOKEN]

    def piece(self, piece_id: int) -> str:
        return self.pieces[piece_id]

    def tokenize_pieces(self, word: str) -> list[str]:
        """Greedy longest-match-first segmentation.

        A word containing any character with no vocabulary entry collapses to
        a single [UNK]; words over the known alphabet always segment, since
        every character has both a word-initial and a continuation entry.
        """
        if not word:
            raise ValueError("cannot tokenize an empty word")
        out: list[str] = []
        pos = 0
        while pos < len(word):
            prefix = "" if pos == 0 else CONTINUATION
            end = len(word)
            piece = None
            while end > pos:
                cand = prefix + word[pos:end]
                if cand in self.ids:
                    piece = cand
                    break
                end -= 1
            if piece is None:
                return [UNK_TOKEN]
            out.append(piece)
            pos = end
        return out

    def tokenize(self, word: str) -> list[int]:
        return [self.ids[p] for p in self.tokenize_pieces(word)]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(p + "\n" for p in self.pieces), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordPieceVocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(lines))


def _word_counts(corpus: Iterable[str] | Mapping[str, int]) -> Counter:
    if isinstance(corpus, Mapping):
        counts = Counter(dict(corpus))
    else:
        counts = Counter(corpus)
    if not counts:
        raise ValueError("empty corpus")
    if any(not w for w in counts):
        raise ValueError("empty word in corpus")
    return counts


def _merge(a: str, b: str) -> str:
    return a + b.removeprefix(CONTINUATION)


def train_vocab(corpus: Iterable[str] | Mapping[str, int], target_size: int) -> WordPieceVocab:
    """Induce a word-piece vocabulary by greedy pair merging.

    The base inventory holds every character of the corpus in both
    word-initial and continuation form (tokenization totality); merges then
    add the most frequent adjacent pair until `target_size` pieces exist or
    no pair repeats. Ties are broken lexicographically, so the result is a
    pure function of the corpus multiset and the size.
    """
    counts = _word_counts(corpus)
    alphabet = sorted({c for w in counts for c in w})
    base = sorted(alphabet + [CONTINUATION + c for c in alphabet])
    floor = len(RESERVED_TOKENS) + len(base)
    if target_size < floor:
        raise ValueError(
            f"target_size {target_size} below base inventory "
            f"({len(base)} character pieces + {len(RESERVED_TOKENS)} reserved)"
        )

    segmented = {w: tuple([w[0]] + [CONTINUATION + c for c in w[1:]]) for w in counts}
    merged: list[str] = []
    while floor + len(merged) < target_size:
        pair_counts: Counter = Counter()
        for w, pieces in segmented.items():
            for a, b in zip(pieces, pieces[1:]):
                pair_counts[(a, b)] += counts[w]
        if not pair_counts:
            break
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        if pair_counts[best] < 2:
            break
        new_piece = _merge(*best)
        if new_piece not in merged:  # re-derivable via a different split
            merged.append(new_piece)
        for w, pieces in segmented.items():
            out = []
            i = 0
            while i < len(pieces):
                if i + 1 < len(pieces) and (pieces[i], pieces[i + 1]) == best:
                    out.append(new_piece)
                    i += 2
                else:
                    out.append(pieces[i])
                    i += 1
            segmented[w] = tuple(out)

    return WordPieceVocab(RESERVED_TOKENS + tuple(base) + tuple(merged))


@dataclass(frozen=True)
class AlignedSequence:
    """Piece-level view of one tagged utterance, framed by [BOS]/[EOS].

    All per-position tuples share one length. `active[i]` is True exactly at
    the first piece of each surviving word; `word_index[i]` points back to
    the source word (None at markers). `features` is (length, 23) float64.
    """

    piece_ids: tuple[int, ...]
    piece_tags: tuple[SlotTag, ...]
    active: tuple[bool, ...]
    features: np.ndarray
    word_index: tuple[int | None, ...]
    truncated: bool = False

    def __post_init__(self):
        n = len(self.piece_ids)
        if not (len(self.piece_tags) == len(self.active) == len(self.word_index) == n):
            raise ValueError("aligned fields disagree on length")
        if self.features.shape != (n, FEATURE_DIM):
            raise ValueError(f"features must be ({n}, {FEATURE_DIM})")

    def __len__(self) -> int:
        return len(self.piece_ids)

    @property
    def word_count(self) -> int:
        return sum(self.active)


def align(
    words: Sequence[str],
    tags: Sequence[SlotTag],
    features: np.ndarray,
    vocab: WordPieceVocab,
    max_len: int = 50,
) -> AlignedSequence:
    """Tokenize a tagged utterance and build its aligned piece sequence.

    Truncation drops trailing words whole: a word whose pieces would cross
    the max_len boundary (with both markers counted) is cut entirely and the
    result is flagged, never errored.
    """
    if len(words) != len(tags):
        raise AlignmentError(f"{len(words)} words vs {len(tags)} tags")
    if np.shape(features) != (len(words), FEATURE_DIM):
        raise ValueError(f"features must be ({len(words)}, {FEATURE_DIM})")
    if max_len < 3:
        raise ValueError("max_len must fit both markers plus one piece")

    ids = [vocab.bos_id]
    piece_tags = [X_TAG]
    active = [False]
    word_index: list[int | None] = [None]
    rows = [np.zeros(FEATURE_DIM)]
    truncated = False
    for wi, (word, tag) in enumerate(zip(words, tags)):
        piece_ids = vocab.tokenize(word)
        if len(ids) + len(piece_ids) + 1 > max_len:
            truncated = True
            break
        for k, pid in enumerate(piece_ids):
            ids.append(pid)
            piece_tags.append(tag if k == 0 else X_TAG)
            active.append(k == 0)
            word_index.append(wi)
            rows.append(np.asarray(features[wi], dtype=float))
    ids.append(vocab.eos_id)
    piece_tags.append(X_TAG)
    active.append(False)
    word_index.append(None)
    rows.append(np.zeros(FEATURE_DIM))

    return AlignedSequence(
        piece_ids=tuple(ids),
        piece_tags=tuple(piece_tags),
        active=tuple(active),
        features=np.array(rows, dtype=np.float64),
        word_index=tuple(word_index),
        truncated=truncated,
    )


def de_align(seq: AlignedSequence, piece_predictions: Sequence[SlotTag]) -> list[SlotTag]:
    """Gather piece-level predictions back to word level.

    Only active positions contribute; an X predicted at an active position
    falls back to O so downstream scoring stays total.
    """
    if len(piece_predictions) != len(seq):
        raise AlignmentError(
            f"{len(piece_predictions)} predictions vs {len(seq)} aligned positions"
        )
    out = []
    for is_active, tag in zip(seq.active, piece_predictions):
        if is_active:
            out.append(O_TAG if tag.kind == "X" else tag)
    return out

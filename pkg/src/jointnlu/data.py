"""Corpus files, label vocabularies, and split statistics.

On-disk format, one utterance per block:

    # intent=<label>
    word<TAB>tag
    ...

Blocks are separated by blank lines; files are UTF-8 with LF endings. The
same format carries converted benchmark data and the synthetic grammar.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Sequence, Tuple

from .tagging import SlotTag

INTENT_HEADER = "# intent="

# Reserved label for dev/test intents never seen in train. It has a logit
# row so unseen golds can be encoded, but train never produces it as a
# target and scoring compares original strings, so it always counts wrong.
UNK_INTENT = "[UNK]"


class CorpusError(ValueError):
    """A corpus file does not follow the token-per-line format."""


@dataclass(frozen=True)
class TaggedUtterance:
    """One labeled example: whole words, word-level BIO tags, one intent."""

    words: Tuple[str, ...]
    tags: Tuple[SlotTag, ...]
    intent: str

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.words:
            raise ValueError("utterance has no words")
        if len(self.words) != len(self.tags):
            raise ValueError(
                f"{len(self.words)} words but {len(self.tags)} tags"
            )
        if not self.intent:
            raise ValueError("intent label is empty")
        for w in self.words:
            if not w or any(c.isspace() for c in w):
                raise ValueError(f"bad word {w!r}")
        for t in self.tags:
            if t.kind == "X":
                raise ValueError("X is a sub-word marker, not a word tag")

    def tag_strings(self) -> Tuple[str, ...]:
        return tuple(str(t) for t in self.tags)


def load_corpus(path) -> list[TaggedUtterance]:
    """Parse a corpus file; malformed input raises CorpusError with the
    offending line number. Lenient about chunk continuity (see lint_corpus)."""
    text = Path(path).read_text(encoding="utf-8")
    out: list[TaggedUtterance] = []
    intent: str | None = None
    header_line = 0
    words: list[str] = []
    tags: list[SlotTag] = []

    def flush() -> None:
        nonlocal intent, words, tags
        if intent is None:
            return
        if not words:
            raise CorpusError(f"line {header_line}: intent header with no tokens")
        try:
            out.append(TaggedUtterance(tuple(words), tuple(tags), intent))
        except ValueError as exc:
            raise CorpusError(f"utterance at line {header_line}: {exc}") from None
        intent, words, tags = None, [], []

    for lineno, line in enumerate(text.split("\n"), 1):
        if line == "":
            flush()
            continue
        if line.startswith("#"):
            if not line.startswith(INTENT_HEADER):
                raise CorpusError(f"line {lineno}: unrecognized header {line!r}")
            if intent is not None:
                raise CorpusError(
                    f"line {lineno}: new header before a blank separator"
                )
            label = line[len(INTENT_HEADER):]
            if not label:
                raise CorpusError(f"line {lineno}: empty intent label")
            intent, header_line = label, lineno
            continue
        if intent is None:
            raise CorpusError(f"line {lineno}: token line before an intent header")
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise CorpusError(
                f"line {lineno}: expected word<TAB>tag, got {line!r}"
            )
        word, tag_text = parts
        try:
            tag = SlotTag.parse(tag_text)
        except ValueError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
        if tag.kind == "X":
            raise CorpusError(
                f"line {lineno}: X is reserved for sub-word alignment"
            )
        words.append(word)
        tags.append(tag)
    flush()
    return out


def save_corpus(corpus: Sequence[TaggedUtterance], path) -> None:
    lines: list[str] = []
    for utt in corpus:
        lines.append(INTENT_HEADER + utt.intent)
        lines.extend(f"{w}\t{t}" for w, t in zip(utt.words, utt.tags))
        lines.append("")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))


def lint_corpus(corpus: Sequence[TaggedUtterance]) -> list[str]:
    """Flag continuation tags that do not extend a chunk of the same label.

    These are accepted by the loader (the chunk extractor repairs them), but
    usually indicate annotation mistakes worth surfacing.
    """
    flags = []
    for i, utt in enumerate(corpus):
        prev: SlotTag | None = None
        for j, tag in enumerate(utt.tags):
            if tag.kind == "I":
                ok = prev is not None and prev.kind in ("B", "I") and (
                    prev.label == tag.label
                )
                if not ok:
                    before = str(prev) if prev is not None else "start"
                    flags.append(
                        f"utterance {i} word {j}: {tag} follows {before}"
                    )
            prev = tag
    return flags


def combine_intents(labels: Iterable[str]) -> str:
    """Collapse a set of intent labels into one canonical multi-label string.

    Component labels are deduplicated, sorted, and '#'-joined, so the result
    is order-insensitive and the operation is idempotent.
    """
    parts: set[str] = set()
    for label in labels:
        for piece in label.split("#"):
            if not piece:
                raise ValueError(f"empty intent component in {label!r}")
            parts.add(piece)
    if not parts:
        raise ValueError("no intent labels to combine")
    return "#".join(sorted(parts))


@dataclass(frozen=True)
class CorpusStats:
    """Split-level summary; word/label statistics come from train only."""

    vocab_size: int
    avg_sentence_length: float
    n_intents: int
    n_slots: int
    n_train: int
    n_dev: int
    n_test: int

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is negative")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def to_kv_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.to_dict().items())


def corpus_stats(
    train: Sequence[TaggedUtterance],
    dev: Sequence[TaggedUtterance],
    test: Sequence[TaggedUtterance],
) -> CorpusStats:
    vocab = {w for u in train for w in u.words}
    avg = sum(len(u.words) for u in train) / len(train) if train else 0.0
    intents = {u.intent for u in train}
    slots = {s for u in train for s in u.tag_strings()}
    return CorpusStats(
        vocab_size=len(vocab),
        avg_sentence_length=avg,
        n_intents=len(intents),
        n_slots=len(slots),
        n_train=len(train),
        n_dev=len(dev),
        n_test=len(test),
    )


@dataclass(frozen=True)
class IntentVocab:
    """Intent label <-> id table. Id 0 is the reserved unseen-label slot."""

    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels or self.labels[0] != UNK_INTENT:
            raise ValueError(f"labels must start with {UNK_INTENT!r}")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate intent labels")
        object.__setattr__(
            self, "_ids", {label: i for i, label in enumerate(self.labels)}
        )

    @classmethod
    def from_corpus(cls, corpus: Sequence[TaggedUtterance]) -> "IntentVocab":
        seen = sorted({u.intent for u in corpus} - {UNK_INTENT})
        return cls((UNK_INTENT, *seen))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def unk_id(self) -> int:
        return 0

    def encode(self, label: str) -> int:
        return self._ids.get(label, 0)

    def decode(self, idx: int) -> str:
        return self.labels[idx]


@dataclass(frozen=True)
class SlotVocab:
    """Piece-level tag <-> id table: O is 0, the sub-word marker X is 1,
    labeled tags follow in sorted order. Unseen tags encode to O."""

    tags: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tags) < 2 or self.tags[0] != "O" or self.tags[1] != "X":
            raise ValueError("tag table must start with ('O', 'X')")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("duplicate tags")
        parsed = tuple(SlotTag.parse(t) for t in self.tags)
        object.__setattr__(self, "_parsed", parsed)
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.tags)})

    @classmethod
    def from_corpus(cls, corpus: Sequence[TaggedUtterance]) -> "SlotVocab":
        seen = sorted({s for u in corpus for s in u.tag_strings()} - {"O"})
        return cls(("O", "X", *seen))

    def __len__(self) -> int:
        return len(self.tags)

    @property
    def o_id(self) -> int:
        return 0

    @property
    def x_id(self) -> int:
        return 1

    def encode(self, tag: SlotTag | str) -> int:
        return self._ids.get(str(tag), 0)

    def decode(self, idx: int) -> SlotTag:
        return self._parsed[idx]

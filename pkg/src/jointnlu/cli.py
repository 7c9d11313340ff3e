"""Operator commands: train, eval, compare, attn, annotate.

Batch commands only; every run is deterministic given its inputs, and a
training run leaves behind a manifest that pins everything needed to redo
it bit for bit (settings, seed, corpus fingerprints).

Exit codes: 0 success, 2 bad usage or bad inputs, 3 training divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .data import load_corpus
from .features import WordFeaturizer
from .model import (
    SLOT_MODES,
    align_utterance,
    load_checkpoint,
    make_batch,
    model_outputs,
    save_checkpoint,
)
from .subwords import align
from .tagging import (
    EvalReport,
    O_TAG,
    intent_accuracy,
    per_token_micro_f1,
    relative_error_reduction,
    sentence_accuracy,
    slot_f1,
)
from .training import (
    DivergenceError,
    EpochRecord,
    TrainConfig,
    evaluate,
    train,
    validate_config_text,
)

POOL_MODES = ("attention", "start_token")

# Every file a training run reads from the data directory.
_REQUIRED_DATA = ("train.txt", "dev.txt", "lexicon.txt", "gazetteer.tsv",
                  "english_dict.txt")

# Headline measures compared between two runs.
_MEASURES = ("intent_acc", "sent_acc", "slot_f1")


@dataclass(frozen=True)
class RunManifest:
    """Record of one training run, sufficient to reproduce it bit for bit:
    the exact settings (seed included), fingerprints of every input file,
    and where the outputs live relative to the manifest."""

    config: TrainConfig
    seed: int
    data_dir: str
    corpus_hashes: Dict[str, str]
    checkpoint_path: str
    log_path: str
    best_epoch: int
    history: Tuple[str, ...]

    @property
    def best_dev_report(self) -> EvalReport:
        return EpochRecord.from_line(self.history[self.best_epoch]).dev

    def to_json(self) -> str:
        payload = {
            "config": dataclasses.asdict(self.config),
            "seed": self.seed,
            "data_dir": self.data_dir,
            "corpus_hashes": dict(self.corpus_hashes),
            "checkpoint_path": self.checkpoint_path,
            "log_path": self.log_path,
            "best_epoch": self.best_epoch,
            "history": list(self.history),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(
            config=TrainConfig(**d["config"]),
            seed=int(d["seed"]),
            data_dir=d["data_dir"],
            corpus_hashes=dict(d["corpus_hashes"]),
            checkpoint_path=d["checkpoint_path"],
            log_path=d["log_path"],
            best_epoch=int(d["best_epoch"]),
            history=tuple(d["history"]),
        )


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_data_dir(data_dir: Path):
    """Load corpora and annotation resources, fingerprinting every file."""
    if not data_dir.is_dir():
        raise ValueError(f"data directory not found: {data_dir}")
    missing = [n for n in _REQUIRED_DATA if not (data_dir / n).is_file()]
    if missing:
        raise ValueError(f"{data_dir} is missing {', '.join(missing)}")
    corpora = {
        "train": load_corpus(data_dir / "train.txt"),
        "dev": load_corpus(data_dir / "dev.txt"),
    }
    hashes = {n: _sha256(data_dir / n) for n in _REQUIRED_DATA}
    if (data_dir / "test.txt").is_file():
        corpora["test"] = load_corpus(data_dir / "test.txt")
        hashes["test.txt"] = _sha256(data_dir / "test.txt")
    featurizer = WordFeaturizer.from_files(
        data_dir / "lexicon.txt",
        data_dir / "gazetteer.tsv",
        data_dir / "english_dict.txt",
    )
    return corpora, featurizer, hashes


def _train_one(config, corpora, hashes, featurizer, run_dir: Path,
               data_dir: str) -> RunManifest:
    run_dir.mkdir(parents=True, exist_ok=True)
    result = train(
        corpora["train"], corpora["dev"], config, featurizer,
        log_path=run_dir / "train.log",
    )
    save_checkpoint(result.checkpoint, run_dir / "checkpoint.npz")
    manifest = RunManifest(
        config=config,
        seed=config.seed,
        data_dir=data_dir,
        corpus_hashes=dict(hashes),
        checkpoint_path="checkpoint.npz",
        log_path="train.log",
        best_epoch=result.best_epoch,
        history=tuple(r.to_line() for r in result.history),
    )
    (run_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def _seed_summary(manifests: Sequence[RunManifest]) -> str:
    scores = [m.best_dev_report.selection_score for m in manifests]
    pick = int(np.argmax(scores))
    lines = []
    for m, s in zip(manifests, scores):
        d = m.best_dev_report
        lines.append(
            f"seed={m.seed} best_epoch={m.best_epoch}"
            f" intent_acc={d.intent_accuracy!r}"
            f" sent_acc={d.sentence_accuracy!r}"
            f" slot_f1={d.slot_f1!r} selection={s!r}"
        )
    lines.append(f"best seed={manifests[pick].seed}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    config_text = Path(args.config).read_text(encoding="utf-8")
    config, problems = validate_config_text(config_text)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    if args.slot_mode:
        config = dataclasses.replace(config, slot_mode=args.slot_mode)
    if args.no_slot_features:
        config = dataclasses.replace(config, slot_features=False)
    if args.intent_pool:
        config = dataclasses.replace(config, intent_pool=args.intent_pool)
    if args.seeds < 1:
        raise ValueError("--seeds must be at least 1")

    # Everything is loaded and checked before anything is written, so a bad
    # invocation leaves no partial outputs behind.
    corpora, featurizer, hashes = _load_data_dir(Path(args.data))

    out_root = Path(args.out)
    manifests = []
    for k in range(args.seeds):
        run_cfg = dataclasses.replace(config, seed=config.seed + k)
        run_dir = out_root / f"seed{run_cfg.seed}" if args.seeds > 1 else out_root
        manifest = _train_one(run_cfg, corpora, hashes, featurizer,
                              run_dir, args.data)
        manifests.append(manifest)
        best = manifest.best_dev_report
        print(
            f"seed={run_cfg.seed} best_epoch={manifest.best_epoch}"
            f" selection={best.selection_score:.4f}"
        )
    if args.seeds > 1:
        summary = _seed_summary(manifests)
        (out_root / "summary.txt").write_text(summary, encoding="utf-8")
        sys.stdout.write(summary)
    return 0


def _self_test_report(corpus) -> EvalReport:
    """Score the gold labels against themselves; anything below a perfect
    report means the measurement pipeline itself is broken."""
    gold_intents = [u.intent for u in corpus]
    gold_tags = [list(u.tags) for u in corpus]
    scores = slot_f1(gold_tags, gold_tags)
    return EvalReport(
        intent_accuracy=intent_accuracy(gold_intents, gold_intents),
        sentence_accuracy=sentence_accuracy(
            gold_intents, gold_intents, gold_tags, gold_tags
        ),
        slot_f1=scores.f1,
        per_token_micro_f1=per_token_micro_f1(gold_tags, gold_tags),
        tp=scores.tp,
        fp=scores.fp,
        fn=scores.fn,
    )


def _check_label_vocabularies(ckpt, corpus) -> None:
    """Compare the corpus label sets against the checkpoint's.

    Individual labels the model never saw decode to the reserved fallbacks
    and score as errors, so partial novelty only warns. A corpus whose
    intents are all unknown cannot be the dataset this model was trained
    for, and that certain mismatch is rejected.
    """
    corpus_intents = {u.intent for u in corpus}
    known = set(ckpt.intent_vocab.labels)
    if corpus_intents and not (corpus_intents & known):
        raise ValueError(
            "vocabulary mismatch: no corpus intent appears in the "
            "checkpoint's label set"
        )
    unk_int = sorted(corpus_intents - known)
    unk_tag = sorted(
        {t for u in corpus for t in u.tag_strings()} - set(ckpt.slot_vocab.tags)
    )
    if unk_int:
        print(
            "warning: intent label(s) unseen in training, scored as errors: "
            + ", ".join(unk_int),
            file=sys.stderr,
        )
    if unk_tag:
        print(
            "warning: slot tag(s) unseen in training, scored as errors: "
            + ", ".join(unk_tag),
            file=sys.stderr,
        )


def cmd_eval(args) -> int:
    corpus = load_corpus(args.data)
    if args.self_test:
        report = _self_test_report(corpus)
    else:
        if not args.checkpoint:
            raise ValueError("--checkpoint is required unless --self-test")
        ckpt = load_checkpoint(args.checkpoint)
        _check_label_vocabularies(ckpt, corpus)
        seqs = [
            align_utterance(u, ckpt.piece_vocab, ckpt.featurizer,
                            ckpt.config.encoder.max_len)
            for u in corpus
        ]
        report = evaluate(
            ckpt.params, ckpt.config, seqs, corpus,
            ckpt.intent_vocab, ckpt.slot_vocab, args.batch_size,
        )
    text = report.to_kv_text()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _read_measures(path) -> Dict[str, float]:
    """Pull the three headline measures out of a report file.

    Values above 1 are read as percentages (published-table style) and
    values in [0, 1] as fractions; the choice is made per file over the
    three measures, so extra entries like chunk counts never skew it.
    """
    values: Dict[str, float] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        try:
            values[key.strip()] = float(value)
        except ValueError:
            continue
    missing = [m for m in _MEASURES if m not in values]
    if missing:
        raise ValueError(f"{path}: missing measure(s): {', '.join(missing)}")
    picked = {m: values[m] for m in _MEASURES}
    if any(v > 1.0 for v in picked.values()):
        picked = {m: v / 100.0 for m, v in picked.items()}
    return picked


def cmd_compare(args) -> int:
    a = _read_measures(args.report_a)
    b = _read_measures(args.report_b)
    lines = ["measure\ta\tb\trer_pct"]
    for m in _MEASURES:
        rer = relative_error_reduction(a[m], b[m])
        lines.append(f"{m}\t{100 * a[m]:.2f}\t{100 * b[m]:.2f}\t{rer:.2f}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _attention_svg(rows: Sequence[Tuple[str, float]]) -> str:
    """Self-contained bar chart, one row per piece, width scaled to the
    largest weight."""
    from xml.sax.saxutils import escape

    bar_h, gap, label_w, chart_w = 16, 6, 140, 360
    height = (bar_h + gap) * len(rows) + gap
    top = max((w for _, w in rows), default=1.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg"'
        f' width="{label_w + chart_w + 70}" height="{height}"'
        f' font-family="monospace" font-size="12">'
    ]
    for i, (token, weight) in enumerate(rows):
        y = gap + i * (bar_h + gap)
        bar = chart_w * weight / top
        parts.append(
            f'<text x="{label_w - 6}" y="{y + bar_h - 4}"'
            f' text-anchor="end">{escape(token)}</text>'
        )
        parts.append(
            f'<rect x="{label_w}" y="{y}" width="{bar:.2f}"'
            f' height="{bar_h}" fill="#36648b"/>'
        )
        parts.append(
            f'<text x="{label_w + bar + 5:.2f}" y="{y + bar_h - 4}">'
            f"{weight:.4f}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_attn(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    words = args.text.split()
    feats = ckpt.featurizer.featurize(words)
    seq = align(words, [O_TAG] * len(words), feats, ckpt.piece_vocab,
                ckpt.config.encoder.max_len)
    batch = make_batch([seq], [0], ckpt.slot_vocab)
    _, _, alpha = model_outputs(ckpt.params, ckpt.config, batch)
    rows = [
        (ckpt.piece_vocab.piece(pid), float(alpha[0, i]))
        for i, pid in enumerate(seq.piece_ids)
    ]
    if args.format == "svg":
        content = _attention_svg(rows)
    else:
        content = "token\tweight\n" + "".join(
            f"{tok}\t{w!r}\n" for tok, w in rows
        )
    if args.out:
        Path(args.out).write_text(content, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(content)
    return 0


def cmd_annotate(args) -> int:
    featurizer = WordFeaturizer.from_files(args.lexicon, args.gazetteer,
                                           args.dict)
    words = args.text.split()
    lines = ["word\tcanonical\tcase\tentity"]
    if words:
        entities, cases, canonical = featurizer.annotate(words)
        lines.extend(
            f"{w}\t{c}\t{case.name}\t{ent.name}"
            for w, c, case, ent in zip(words, canonical, cases, entities)
        )
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointnlu",
        description="Joint intent and slot model: batch operator commands.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "train", help="fit a model; writes checkpoint, manifest, and log"
    )
    p.add_argument("--config", required=True,
                   help="training settings, key=value per line")
    p.add_argument("--data", required=True,
                   help="directory with train.txt, dev.txt, and resources")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, default=1,
                   help="run this many seeds (config seed, +1, ...)")
    p.add_argument("--slot-mode", choices=SLOT_MODES)
    p.add_argument("--no-slot-features", action="store_true")
    p.add_argument("--intent-pool", choices=POOL_MODES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--data", required=True, help="corpus file to score")
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--self-test", action="store_true",
                   help="score the gold labels against themselves")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "compare", help="relative error reduction of report A over report B"
    )
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser(
        "attn", help="dump the intent pooling weights for one utterance"
    )
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--format", choices=("tsv", "svg"), default="tsv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_attn)

    p = sub.add_parser(
        "annotate", help="word case and entity annotation table"
    )
    p.add_argument("--lexicon", required=True)
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_annotate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

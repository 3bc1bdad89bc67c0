"""Command line interface.

Subcommands: embed-train, augment, tag-rules, train, eval, ablate, classify.
Training flags mirror the TrainConfig fields; `--config path` reads a
key=value file first, with explicit flags winning.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .augment import AugmentConfig, NegationLexicon, SentimentDictionary, augment_dataset
from .embedding import SkipGramConfig, build_vocabulary, save_embeddings, train_skipgram
from .errors import ShortsentError
from .pipeline import (
    TrainConfig,
    as_samples,
    checkpoint_load,
    checkpoint_save,
    evaluate,
    format_ablation_table,
    load_corpus,
    predict,
    prepare_dataset,
    run_ablation,
    save_corpus,
    tokenize,
    train,
    _load_resources,
)
from .rules import RULE_NAMES, tag_rule

log = logging.getLogger(__name__)

_CONFIG_FIELDS = [f for f in dataclasses.fields(TrainConfig) if f.name != "split_ratios"]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in _CONFIG_FIELDS:
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("int", "int | None"):
            parser.add_argument(flag, type=int, default=None)
        elif f.type in ("float", "float | None"):
            parser.add_argument(flag, type=float, default=None)
        else:
            parser.add_argument(flag, type=str, default=None)
    parser.add_argument("--config", type=str, default=None, help="key=value config file")


def _build_config(args) -> TrainConfig:
    overrides = {
        f.name: getattr(args, f.name) for f in _CONFIG_FIELDS if getattr(args, f.name) is not None
    }
    if args.config:
        return TrainConfig.from_file(args.config, **overrides)
    return TrainConfig(**overrides)


def _write_records(path: str | None, records: list[dict]) -> None:
    if not path:
        return
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def cmd_embed_train(args) -> int:
    with open(args.corpus, encoding="utf-8") as fh:
        docs = [tokenize(line) for line in fh.read().splitlines() if line.strip()]
    vocab = build_vocabulary(docs, args.max_vocab)
    cfg = SkipGramConfig(
        window_radius=args.window,
        epochs=args.epochs,
        learning_rate=args.lr,
        negative_samples=args.negatives,
        rng_seed=args.seed,
        embed_dim=args.dim,
    )
    matrix = train_skipgram(docs, vocab, cfg)
    save_embeddings(matrix, vocab, args.out)
    print(f"trained {matrix.rows}x{matrix.dim} embeddings -> {args.out}")
    return 0


def cmd_augment(args) -> int:
    messages = load_corpus(args.corpus)
    dictionary = (
        SentimentDictionary.load(args.dict) if args.dict else _default_resources()[0]
    )
    lexicon = NegationLexicon.load(args.negations) if args.negations else _default_resources()[1]
    cfg = AugmentConfig(
        term_swaps=not args.no_term,
        negations=not args.no_negation,
        max_term_variants=args.max_variants,
        seed=args.seed,
    )
    out = augment_dataset(as_samples(messages), dictionary, lexicon, cfg)
    save_corpus(out, args.out)
    print(f"augmented {len(messages)} -> {len(out)} samples -> {args.out}")
    return 0


def _default_resources():
    dictionary, lexicon, patterns, _ = _load_resources(TrainConfig())
    return dictionary, lexicon, patterns


def cmd_tag_rules(args) -> int:
    messages = load_corpus(args.corpus)
    dictionary, _lexicon, patterns = _default_resources()
    if args.dict:
        dictionary = SentimentDictionary.load(args.dict)
    if args.patterns:
        from .rules import RulePattern

        patterns = RulePattern.load(args.patterns)
    for m in messages:
        if m.rule is None:
            m.rule = RULE_NAMES[tag_rule(m.text, patterns, dictionary)]
    save_corpus(messages, args.out)
    print(f"tagged {len(messages)} messages -> {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _build_config(args)
    messages = load_corpus(args.corpus)
    dataset = prepare_dataset(messages, config)
    net, report = train(dataset, config)
    checkpoint_save(net, args.out)
    print(report.format_table())
    _write_records(args.records, [report.to_record()])
    print(f"checkpoint -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    net = checkpoint_load(args.checkpoint)
    messages = load_corpus(args.corpus)
    report = evaluate(net, as_samples(messages), args.average)
    print(report.format_table())
    _write_records(args.records, [report.to_record()])
    return 0


def cmd_ablate(args) -> int:
    config = _build_config(args)
    messages = load_corpus(args.corpus)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    rows = run_ablation(messages, variants, config, n_seeds=args.n_seeds, workdir=args.workdir)
    print(format_ablation_table(rows))
    _write_records(args.records, rows)
    return 0


def cmd_classify(args) -> int:
    net = checkpoint_load(args.checkpoint)
    if args.text is not None:
        texts = [args.text]
    else:
        with open(args.corpus, encoding="utf-8") as fh:
            texts = [ln.split("\t")[0] for ln in fh.read().splitlines() if ln.strip()]
    for text in texts:
        result = predict(net, text)
        probs = " ".join(f"{p:.4f}" for p in result["sentiment_probs"])
        print(f"{result['sentiment']}\t[{probs}]\t{text}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        "shortsent", description="Sentiment classification for short informal messages"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("embed-train", help="train skip-gram word embeddings")
    p.add_argument("--corpus", required=True, help="plain text, one message per line")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=320)
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--max-vocab", type=int, default=65000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_embed_train)

    p = sub.add_parser("augment", help="expand a labeled corpus with variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dict", default=None)
    p.add_argument("--negations", default=None)
    p.add_argument("--no-term", action="store_true")
    p.add_argument("--no-negation", action="store_true")
    p.add_argument("--max-variants", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("tag-rules", help="fill in missing rule labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patterns", default=None)
    p.add_argument("--dict", default=None)
    p.set_defaults(func=cmd_tag_rules)

    p = sub.add_parser("train", help="train one model variant")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--records", default=None, help="write metrics as JSON lines")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--average", choices=("macro", "micro"), default="macro")
    p.add_argument("--records", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare several variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--variants", required=True, help="comma-separated ids, e.g. 2,5,9")
    p.add_argument("--n-seeds", type=int, default=1)
    p.add_argument("--workdir", default=None)
    p.add_argument("--records", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("classify", help="classify a message or a file of messages")
    p.add_argument("--checkpoint", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text", default=None)
    group.add_argument("--corpus", default=None)
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ShortsentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end plumbing: corpus files, preprocessing, splits, the training
loop for every model variant, evaluation metrics, checkpoints and ablation.

The variant ladder mirrors the experiment grid: a CNN baseline picks up
term-swap augmentation, the penalty-matrix loss, negation augmentation,
frozen transferred embeddings and character-level vectors one step at a
time; the last two rungs switch the core to a GRU and add the rule task.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import zipfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .augment import (
    AugmentConfig,
    AugmentedSample,
    NegationLexicon,
    SentimentDictionary,
    augment_dataset,
    mask_target,
)
from .chars import CharBiGRUParams, CharVocabulary, char_tokenize
from .embedding import (
    EmbeddingMatrix,
    SkipGramConfig,
    Vocabulary,
    build_vocabulary,
    load_embeddings,
    set_frozen,
    train_skipgram,
)
from .errors import ConfigError, FormatError, InputError
from .gru import GRUCellParams
from .loss import (
    PenaltyMatrix,
    SENTIMENT_CLASSES,
    cross_entropy,
    multitask_loss,
    onehot,
    weighted_cross_entropy,
)
from .models import (
    CNNEncoderParams,
    DropoutSpec,
    EncodedMessage,
    Linear,
    ModelConfig,
    MultiTaskNet,
    forward_multitask,
)
from .rules import RuleLabel, RulePattern, RULE_NAMES, rule_from_name, tag_rule
from .tensor import Tape, Tensor, add, backward, scale, sgd_step, zero_grads
from .textnorm import tokenize as _tokenize

log = logging.getLogger(__name__)

_DATA_DIR = Path(__file__).parent / "data"

CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Corpus records and preprocessing
# ---------------------------------------------------------------------------


@dataclass
class LabeledMessage:
    text: str
    sentiment: str  # positive | negative | neutral
    rule: str | None = None
    target: str | None = None


def tokenize(text: str) -> list[str]:
    """Normalize and split a message (lowercase, punctuation detached)."""
    return _tokenize(text)


def load_corpus(path) -> list[LabeledMessage]:
    """Read tab-separated 'text<TAB>sentiment[<TAB>rule][<TAB>target]' lines."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read corpus {path}: {exc}")
    out = []
    for no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if not 2 <= len(fields) <= 4:
            raise FormatError(f"{path}:{no}: expected 2-4 tab-separated fields, got {len(fields)}")
        text, sentiment = fields[0], fields[1].strip().lower()
        if sentiment not in SENTIMENT_CLASSES:
            raise FormatError(f"{path}:{no}: unknown sentiment {fields[1]!r}")
        rule = fields[2].strip().lower() if len(fields) > 2 and fields[2].strip() else None
        if rule is not None:
            rule_from_name(rule)  # validates
        target = fields[3].strip() if len(fields) > 3 and fields[3].strip() else None
        out.append(LabeledMessage(text=text, sentiment=sentiment, rule=rule, target=target))
    return out


def save_corpus(samples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            rule = getattr(s, "rule", None) or ""
            target = getattr(s, "target", None) or ""
            label = getattr(s, "sentiment", None) or getattr(s, "label", None)
            line = f"{s.text}\t{label}"
            if rule or target:
                line += f"\t{rule}"
            if target:
                line += f"\t{target}"
            fh.write(line + "\n")


def pad_truncate(tokens: list[str], vocab: Vocabulary, length: int = 10) -> list[int]:
    """Map to indices, keep the first `length`, right-pad with PAD."""
    idx = vocab.encode(tokens[:length])
    return idx + [0] * (length - len(idx))


def prepare_message(
    text: str, vocab: Vocabulary, char_vocab: CharVocabulary | None, seq_len: int
) -> EncodedMessage:
    words = tokenize(text)
    token_ids = pad_truncate(words, vocab, seq_len)
    n_words = min(len(words), seq_len)
    char_ids: list[int] = []
    ends: list[int] = []
    if char_vocab is not None and words:
        char_ids, all_ends = char_tokenize(text, char_vocab)
        ends = all_ends[:seq_len]
    return EncodedMessage(
        token_ids=token_ids, char_ids=char_ids, end_positions=ends, n_words=n_words
    )


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    train: list[AugmentedSample]
    validation: list[AugmentedSample]
    test: list[AugmentedSample]


def as_samples(messages: list[LabeledMessage]) -> list[AugmentedSample]:
    """Wrap corpus records as original samples, masking targets on the way."""
    out = []
    for i, m in enumerate(messages):
        text = m.text
        if m.target:
            text, _found = mask_target(text, m.target)
        out.append(
            AugmentedSample(
                text=text,
                label=m.sentiment,
                rule=m.rule,
                target=m.target,
                provenance="original",
                source_id=i,
            )
        )
    return out


def split_dataset(
    samples: list[AugmentedSample],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> Dataset:
    """Seeded shuffle of the original messages, contiguous cut, and every
    augmented variant assigned to the same split as its original."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"split ratios must be non-negative, got {ratios}")
    groups: list[int] = []
    seen: set[int] = set()
    for s in samples:
        if s.source_id not in seen:
            seen.add(s.source_id)
            groups.append(s.source_id)
    rng = np.random.default_rng(seed)
    order = [groups[i] for i in rng.permutation(len(groups))]
    n = len(order)
    n_train = int(n * ratios[0])
    n_val = int(n * ratios[1])
    assignment = {}
    for rank, gid in enumerate(order):
        if rank < n_train:
            assignment[gid] = "train"
        elif rank < n_train + n_val:
            assignment[gid] = "validation"
        else:
            assignment[gid] = "test"
    buckets = {"train": [], "validation": [], "test": []}
    for s in samples:
        buckets[assignment[s.source_id]].append(s)
    return Dataset(**buckets)


# ---------------------------------------------------------------------------
# Variants and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariantSpec:
    core: str
    term_aug: bool = False
    penalty: bool = False
    negation_aug: bool = False
    transfer: bool = False
    chars: bool = False
    multitask: bool = False


_LADDER: list[tuple[str, str, VariantSpec]] = [
    ("2", "cnn", VariantSpec("cnn")),
    ("3", "cnn-aug", VariantSpec("cnn", term_aug=True)),
    ("4", "cnn-aug-penalty", VariantSpec("cnn", term_aug=True, penalty=True)),
    ("5", "cnn-negation", VariantSpec("cnn", term_aug=True, penalty=True, negation_aug=True)),
    (
        "6",
        "cnn-transfer",
        VariantSpec("cnn", term_aug=True, penalty=True, negation_aug=True, transfer=True),
    ),
    (
        "7",
        "cnn-chars",
        VariantSpec(
            "cnn", term_aug=True, penalty=True, negation_aug=True, transfer=True, chars=True
        ),
    ),
    (
        "8",
        "gru",
        VariantSpec(
            "gru", term_aug=True, penalty=True, negation_aug=True, transfer=True, chars=True
        ),
    ),
    (
        "9",
        "gru-multitask",
        VariantSpec(
            "gru",
            term_aug=True,
            penalty=True,
            negation_aug=True,
            transfer=True,
            chars=True,
            multitask=True,
        ),
    ),
]

VARIANTS: dict[str, VariantSpec] = {}
for _num, _name, _spec in _LADDER:
    VARIANTS[_num] = _spec
    VARIANTS["#" + _num] = _spec
    VARIANTS[_name] = _spec

VARIANT_NAMES = [name for _, name, _ in _LADDER]


def resolve_variant(variant_id: str) -> VariantSpec:
    try:
        return VARIANTS[variant_id.strip().lower()]
    except KeyError:
        raise ConfigError(
            f"unknown variant {variant_id!r}; expected one of {VARIANT_NAMES} or 2-9"
        )


@dataclass
class TrainConfig:
    variant: str = "gru-multitask"
    seq_len: int = 10
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.1
    drop_rate: float = 0.3
    seed: int = 0
    embed_dim: int = 320
    char_dim: int = 24
    char_hidden: int = 50
    hidden: int = 200
    cnn_filters: int = 64
    cnn_width: int = 3
    cnn_pool: int = 2
    max_vocab: int = 65000
    window_radius: int = 4
    negative_samples: int = 5
    skipgram_epochs: int = 0
    skipgram_lr: float = 0.025
    max_term_variants: int = 16
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    embeddings_path: str | None = None
    dictionary_path: str | None = None
    negation_path: str | None = None
    patterns_path: str | None = None
    penalty_path: str | None = None
    early_stopping_patience: int | None = None
    stop_at_train_accuracy: float | None = None
    metrics_average: str = "macro"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.metrics_average not in ("macro", "micro"):
            raise ConfigError("metrics_average must be 'macro' or 'micro'")

    def variant_spec(self) -> VariantSpec:
        return resolve_variant(self.variant)

    def model_config(self) -> ModelConfig:
        spec = self.variant_spec()
        return ModelConfig(
            core=spec.core,
            embed_dim=self.embed_dim,
            use_chars=spec.chars,
            char_dim=self.char_dim,
            char_hidden=self.char_hidden,
            hidden=self.hidden,
            seq_len=self.seq_len,
            cnn_filters=self.cnn_filters,
            cnn_width=self.cnn_width,
            cnn_pool=self.cnn_pool,
            drop_rate=self.drop_rate,
            seed=self.seed,
        )

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        """Build from a key=value file; later command-line overrides win."""
        values: dict = {}
        field_types = {f.name: f for f in dataclasses.fields(cls)}
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        for no, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{no}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in field_types:
                raise ConfigError(f"{path}:{no}: unknown config key {key!r}")
            values[key] = _coerce_field(key, raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce_field(name: str, raw: str):
    defaults = TrainConfig()
    current = getattr(defaults, name)
    if raw.lower() in ("none", ""):
        return None
    if name == "split_ratios":
        parts = [float(x) for x in raw.replace(",", " ").split()]
        return tuple(parts)
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def _load_resources(config: TrainConfig):
    dictionary = (
        SentimentDictionary.load(config.dictionary_path)
        if config.dictionary_path
        else SentimentDictionary.load(_DATA_DIR / "dictionary.tsv")
    )
    lexicon = (
        NegationLexicon.load(config.negation_path)
        if config.negation_path
        else NegationLexicon.load(_DATA_DIR / "negations.tsv")
    )
    patterns = (
        RulePattern.load(config.patterns_path)
        if config.patterns_path
        else RulePattern.load(_DATA_DIR / "patterns.txt")
    )
    penalty = (
        PenaltyMatrix.load(config.penalty_path)
        if config.penalty_path
        else PenaltyMatrix.default()
    )
    return dictionary, lexicon, patterns, penalty


def prepare_dataset(messages: list[LabeledMessage], config: TrainConfig) -> Dataset:
    """Mask targets, run the variant's augmentation stages, and split with
    provenance kept inside one split."""
    spec = config.variant_spec()
    dictionary, lexicon, _patterns, _penalty = _load_resources(config)
    originals = as_samples(messages)
    if spec.term_aug or spec.negation_aug:
        aug_cfg = AugmentConfig(
            term_swaps=spec.term_aug,
            negations=spec.negation_aug,
            max_term_variants=config.max_term_variants,
            seed=config.seed,
        )
        samples = augment_dataset(originals, dictionary, lexicon, aug_cfg)
    else:
        samples = originals
    return split_dataset(samples, ratios=config.split_ratios, seed=config.seed)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f_measure: float
    per_class: dict[str, dict[str, float]]
    confusion: list[list[int]]  # rows = true class, columns = predicted
    average: str = "macro"

    def to_record(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "average": self.average,
            "per_class": self.per_class,
            "confusion": self.confusion,
        }

    def format_table(self) -> str:
        lines = [f"{'class':<10} {'precision':>9} {'recall':>9} {'f':>9} {'support':>8}"]
        for name in SENTIMENT_CLASSES:
            c = self.per_class[name]
            lines.append(
                f"{name:<10} {c['precision']:>9.3f} {c['recall']:>9.3f} "
                f"{c['f_measure']:>9.3f} {int(c['support']):>8}"
            )
        lines.append(
            f"{self.average:<10} {self.precision:>9.3f} {self.recall:>9.3f} "
            f"{self.f_measure:>9.3f}"
        )
        return "\n".join(lines)


def metrics_from_confusion(confusion: np.ndarray, average: str = "macro") -> MetricsReport:
    conf = np.asarray(confusion, dtype=np.int64)
    per_class = {}
    ps, rs, fs = [], [], []
    for c, name in enumerate(SENTIMENT_CLASSES):
        tp = conf[c, c]
        support = conf[c].sum()
        predicted = conf[:, c].sum()
        p = tp / predicted if predicted else 0.0
        r = tp / support if support else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        per_class[name] = {
            "precision": float(p),
            "recall": float(r),
            "f_measure": float(f),
            "support": int(support),
        }
        ps.append(p)
        rs.append(r)
        fs.append(f)
    if average == "macro":
        precision, recall, f_measure = np.mean(ps), np.mean(rs), np.mean(fs)
    else:  # micro: single-label, so P = R = F = accuracy
        total = conf.sum()
        acc = np.trace(conf) / total if total else 0.0
        precision = recall = f_measure = acc
    return MetricsReport(
        precision=float(precision),
        recall=float(recall),
        f_measure=float(f_measure),
        per_class=per_class,
        confusion=conf.tolist(),
        average=average,
    )


def evaluate(net: MultiTaskNet, samples, average: str = "macro") -> MetricsReport:
    """Macro (or micro) precision/recall/F over the three sentiment classes."""
    samples = list(samples)
    if not samples:
        raise InputError("cannot evaluate on an empty split")
    conf = np.zeros((3, 3), dtype=np.int64)
    char_vocab = net.char_params.vocab if net.char_params is not None else None
    for s in samples:
        msg = prepare_message(s.text, net.vocab, char_vocab, net.seq_len)
        probs, _ = forward_multitask(msg, net, "infer")
        pred = int(np.argmax(probs.values))
        true = SENTIMENT_CLASSES.index(s.label)
        conf[true, pred] += 1
    return metrics_from_confusion(conf, average)


def predict(net: MultiTaskNet, text: str) -> dict:
    """Classify one message; returns labels and probability lists."""
    char_vocab = net.char_params.vocab if net.char_params is not None else None
    msg = prepare_message(text, net.vocab, char_vocab, net.seq_len)
    sent, rule = forward_multitask(msg, net, "infer")
    return {
        "text": text,
        "sentiment": SENTIMENT_CLASSES[int(np.argmax(sent.values))],
        "sentiment_probs": sent.values.tolist(),
        "rule": RULE_NAMES[RuleLabel(int(np.argmax(rule.values)))],
        "rule_probs": rule.values.tolist(),
    }


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _rule_index(sample: AugmentedSample, patterns, dictionary) -> int:
    if sample.rule is not None:
        return rule_from_name(sample.rule).value
    return tag_rule(sample.text, patterns, dictionary).value


def _accuracy(net: MultiTaskNet, prepared, labels) -> float:
    correct = 0
    for msg, true in zip(prepared, labels):
        probs, _ = forward_multitask(msg, net, "infer")
        if int(np.argmax(probs.values)) == true:
            correct += 1
    return correct / len(prepared)


def train(dataset: Dataset, config: TrainConfig):
    """Mini-batch SGD over the variant's loss; returns (net, validation report).

    Per-epoch validation metrics are logged; when a validation split exists
    the best-macro-F parameters are restored at the end, and
    `early_stopping_patience` epochs without improvement stop the run.
    """
    spec = config.variant_spec()
    if not dataset.train:
        raise InputError("training split is empty")
    dictionary, _lexicon, patterns, penalty_matrix = _load_resources(config)
    penalty = penalty_matrix if spec.penalty else None

    train_texts = [tokenize(s.text) for s in dataset.train]
    word_emb = None
    if spec.transfer:
        if not config.embeddings_path:
            raise ConfigError(f"variant {config.variant!r} requires embeddings_path")
        word_emb, vocab = load_embeddings(config.embeddings_path)
        set_frozen(word_emb, True)
        if word_emb.dim != config.embed_dim:
            raise ConfigError(
                f"embedding file width {word_emb.dim} does not match embed_dim "
                f"{config.embed_dim}"
            )
    else:
        vocab = build_vocabulary(train_texts, config.max_vocab)
        if config.skipgram_epochs > 0:
            sg = SkipGramConfig(
                window_radius=config.window_radius,
                epochs=config.skipgram_epochs,
                learning_rate=config.skipgram_lr,
                negative_samples=config.negative_samples,
                rng_seed=config.seed,
                embed_dim=config.embed_dim,
            )
            word_emb = train_skipgram([tokenize(s.text) for s in dataset.train], vocab, sg)

    char_vocab = (
        CharVocabulary.build(s.text for s in dataset.train) if spec.chars else None
    )
    net = MultiTaskNet.create(vocab, char_vocab, config.model_config(), word_emb=word_emb)
    net.penalty = penalty

    prepared = [
        prepare_message(s.text, vocab, char_vocab, config.seq_len) for s in dataset.train
    ]
    sent_labels = [SENTIMENT_CLASSES.index(s.label) for s in dataset.train]
    rule_labels = (
        [_rule_index(s, patterns, dictionary) for s in dataset.train]
        if spec.multitask
        else None
    )

    params = net.parameters()
    rng = np.random.default_rng(config.seed)
    best_f = -1.0
    best_values = None
    stale = 0
    report = None
    history = []

    for epoch in range(config.epochs):
        order = rng.permutation(len(prepared))
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            with Tape():
                batch_loss = None
                for i in batch:
                    sent_probs, rule_probs = forward_multitask(prepared[i], net, "train")
                    y = onehot(sent_labels[i], 3)
                    if penalty is not None:
                        sample_loss = weighted_cross_entropy(y, sent_probs, penalty)
                    else:
                        sample_loss = cross_entropy(y, sent_probs)
                    if rule_labels is not None:
                        rule_loss = cross_entropy(onehot(rule_labels[i], 4), rule_probs)
                        sample_loss = multitask_loss(sample_loss, rule_loss)
                    batch_loss = (
                        sample_loss if batch_loss is None else add(batch_loss, sample_loss)
                    )
                batch_loss = scale(batch_loss, 1.0 / len(batch))
                backward(batch_loss)
            net.zero_pinned_grads()
            sgd_step(params, config.learning_rate)
            zero_grads(params)
            epoch_loss += batch_loss.item() * len(batch)
        epoch_loss /= len(prepared)

        entry = {"epoch": epoch, "loss": epoch_loss}
        if config.stop_at_train_accuracy is not None:
            entry["train_accuracy"] = _accuracy(net, prepared, sent_labels)
        if dataset.validation:
            report = evaluate(net, dataset.validation, config.metrics_average)
            entry["validation_f"] = report.f_measure
            if report.f_measure > best_f:
                best_f = report.f_measure
                best_values = [p.copy_values() for p in params]
                stale = 0
            else:
                stale += 1
        history.append(entry)
        log.info("epoch %d: %s", epoch, entry)
        if (
            config.stop_at_train_accuracy is not None
            and entry.get("train_accuracy", 0.0) >= config.stop_at_train_accuracy
        ):
            break
        if (
            config.early_stopping_patience is not None
            and stale > config.early_stopping_patience
        ):
            break

    if best_values is not None:
        for p, v in zip(params, best_values):
            p.values[...] = v
    net.history = history
    if dataset.validation:
        report = evaluate(net, dataset.validation, config.metrics_average)
    else:
        report = evaluate(net, dataset.train, config.metrics_average)
    return net, report


def run_ablation(
    messages: list[LabeledMessage],
    variant_ids: list[str],
    config: TrainConfig,
    n_seeds: int = 1,
    workdir: str | Path | None = None,
) -> list[dict]:
    """Train and evaluate each variant with shared seeds; one row per variant.

    Rows carry test-split metrics averaged over `n_seeds` runs. When a
    transfer variant is requested without an embeddings file, skip-gram
    embeddings are trained once on the corpus and reused by every run.
    """
    specs = [(vid, resolve_variant(vid)) for vid in variant_ids]
    config = replace(config)
    if any(s.transfer for _, s in specs) and not config.embeddings_path:
        workdir = Path(workdir) if workdir else Path(".")
        emb_path = workdir / "ablation_embeddings.txt"
        _pretrain_embeddings(messages, config, emb_path)
        config = replace(config, embeddings_path=str(emb_path))
    rows = []
    for vid, _spec in specs:
        metrics = {"precision": [], "recall": [], "f_measure": []}
        for s in range(n_seeds):
            cfg = replace(config, variant=vid, seed=config.seed + s)
            ds = prepare_dataset(messages, cfg)
            net, val_report = train(ds, cfg)
            rep = evaluate(net, ds.test, cfg.metrics_average) if ds.test else val_report
            for key in metrics:
                metrics[key].append(getattr(rep, key))
        rows.append(
            {
                "variant": vid,
                "seeds": n_seeds,
                "precision": float(np.mean(metrics["precision"])),
                "recall": float(np.mean(metrics["recall"])),
                "f_measure": float(np.mean(metrics["f_measure"])),
                "f_by_seed": [float(f) for f in metrics["f_measure"]],
            }
        )
    return rows


def _pretrain_embeddings(messages, config: TrainConfig, path) -> None:
    docs = [tokenize(m.text) for m in messages]
    vocab = build_vocabulary(docs, config.max_vocab)
    sg = SkipGramConfig(
        window_radius=config.window_radius,
        epochs=max(config.skipgram_epochs, 1),
        learning_rate=config.skipgram_lr,
        negative_samples=config.negative_samples,
        rng_seed=config.seed,
        embed_dim=config.embed_dim,
    )
    emb = train_skipgram(docs, vocab, sg)
    from .embedding import save_embeddings

    save_embeddings(emb, vocab, path)


def format_ablation_table(rows: list[dict]) -> str:
    lines = [f"{'variant':<16} {'precision':>9} {'recall':>9} {'f':>9} {'seeds':>6}"]
    for r in rows:
        lines.append(
            f"{r['variant']:<16} {r['precision']:>9.3f} {r['recall']:>9.3f} "
            f"{r['f_measure']:>9.3f} {r['seeds']:>6}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def _collect_arrays(net: MultiTaskNet) -> dict[str, np.ndarray]:
    arrays = {"word_emb": net.word_emb.weights.values}
    if net.char_params is not None:
        arrays["char_table"] = net.char_params.table.values
        for tag, cell in (("char_f", net.char_params.forward), ("char_b", net.char_params.backward)):
            for name in ("W_r", "U_r", "W_z", "U_z", "W", "U"):
                arrays[f"{tag}_{name}"] = getattr(cell, name).values
    if net.gru_params is not None:
        for name in ("W_r", "U_r", "W_z", "U_z", "W", "U"):
            arrays[f"gru_{name}"] = getattr(net.gru_params, name).values
    if net.cnn_params is not None:
        arrays["cnn_filters"] = net.cnn_params.filters.values
        arrays["cnn_bias"] = net.cnn_params.bias.values
    arrays["sent_W"] = net.sent_head.W.values
    arrays["sent_b"] = net.sent_head.b.values
    arrays["rule_W"] = net.rule_head.W.values
    arrays["rule_b"] = net.rule_head.b.values
    return arrays


def checkpoint_save(net: MultiTaskNet, path) -> None:
    """Single-file archive: versioned JSON metadata plus every parameter."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "core": net.core,
        "seq_len": net.seq_len,
        "embed_dim": net.word_emb.dim,
        "frozen": net.word_emb.frozen,
        "drop_rate": net.dropout.drop_rate,
        "dropout_seed": net.dropout.rng_seed,
        "vocab": net.vocab.tokens,
        "char": None,
        "cnn": None,
        "penalty": net.penalty.values.tolist() if net.penalty is not None else None,
    }
    if net.char_params is not None:
        meta["char"] = {
            "chars": net.char_params.vocab.chars,
            "dim": net.char_params.table.shape[1],
            "hidden": net.char_params.hidden,
        }
    if net.cnn_params is not None:
        meta["cnn"] = {"pool": net.cnn_params.pool}
    buffer = io.BytesIO()
    np.savez(buffer, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
             **_collect_arrays(net))
    with open(path, "wb") as fh:
        fh.write(buffer.getvalue())


def checkpoint_load(path) -> MultiTaskNet:
    """Rebuild a network bit-exactly from checkpoint_save output."""
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError, zipfile.BadZipFile, KeyError) as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}")
    try:
        meta = json.loads(bytes(arrays.pop("meta")).decode("utf-8"))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"checkpoint {path} has no readable metadata: {exc}")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise FormatError(
            f"checkpoint version {meta.get('version')} not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    try:
        vocab = Vocabulary(meta["vocab"])
        word_emb = EmbeddingMatrix(Tensor(arrays["word_emb"], requires_grad=True))
        if meta["frozen"]:
            set_frozen(word_emb, True)
        char_params = None
        if meta["char"] is not None:
            cmeta = meta["char"]
            char_params = CharBiGRUParams(
                vocab=CharVocabulary(cmeta["chars"]),
                table=Tensor(arrays["char_table"], requires_grad=True),
                forward=_load_cell(arrays, "char_f"),
                backward=_load_cell(arrays, "char_b"),
            )
        gru_params = _load_cell(arrays, "gru") if meta["core"] == "gru" else None
        cnn_params = None
        if meta["core"] == "cnn":
            cnn_params = CNNEncoderParams(
                filters=Tensor(arrays["cnn_filters"], requires_grad=True),
                bias=Tensor(arrays["cnn_bias"], requires_grad=True),
                pool=int(meta["cnn"]["pool"]),
            )
        net = MultiTaskNet(
            vocab=vocab,
            word_emb=word_emb,
            char_params=char_params,
            core=meta["core"],
            gru_params=gru_params,
            cnn_params=cnn_params,
            sent_head=Linear(
                W=Tensor(arrays["sent_W"], requires_grad=True),
                b=Tensor(arrays["sent_b"], requires_grad=True),
            ),
            rule_head=Linear(
                W=Tensor(arrays["rule_W"], requires_grad=True),
                b=Tensor(arrays["rule_b"], requires_grad=True),
            ),
            dropout=DropoutSpec(meta["drop_rate"], training=False, rng_seed=meta["dropout_seed"]),
            seq_len=int(meta["seq_len"]),
        )
    except KeyError as exc:
        raise FormatError(f"checkpoint {path} is missing entry {exc}")
    if meta.get("penalty") is not None:
        net.penalty = PenaltyMatrix(np.array(meta["penalty"]))
    return net


def _load_cell(arrays: dict[str, np.ndarray], tag: str) -> GRUCellParams:
    return GRUCellParams(
        **{
            name: Tensor(arrays[f"{tag}_{name}"], requires_grad=True)
            for name in ("W_r", "U_r", "W_z", "U_z", "W", "U")
        }
    )

"""Domain-knowledge data augmentation: target masking, sentiment-term swaps,
and negation-based variant generation.

Term swaps come in two forms. Same-score swaps replace one matched term with
a peer of equal score and keep the label. Opposite-score swaps flip every
polar term in the message at once (one choice per slot) and invert a
positive/negative label, so the generated text stays internally consistent.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import FormatError, InputError
from .textnorm import normalize_token, strip_edge_punct, tokenize

log = logging.getLogger(__name__)

TARGET_SURFACE = "Target"
BEFORE_MESSAGE = "message"
BEFORE_TERM = "term"

_FLIP = {"positive": "negative", "negative": "positive"}


@dataclass(frozen=True)
class AugmentedSample:
    """A labeled message plus where it came from."""

    text: str
    label: str  # positive | negative | neutral
    rule: str | None = None
    target: str | None = None
    provenance: str = "original"  # original | term_swap | negation
    source_id: int = -1


class SentimentDictionary:
    """term -> score in {-1, 0, +1}; multi-word terms matched longest-first."""

    def __init__(self, entries: dict[str, int]):
        self._surface: dict[tuple[str, ...], str] = {}
        self._scores: dict[tuple[str, ...], int] = {}
        for term, score in entries.items():
            if score not in (-1, 0, 1):
                raise InputError(f"score for {term!r} must be in {{-1, 0, 1}}, got {score}")
            key = tuple(tokenize(term))
            if not key:
                raise InputError(f"dictionary term {term!r} normalizes to nothing")
            self._scores[key] = int(score)
            self._surface[key] = term
        self._max_len = max((len(k) for k in self._scores), default=0)

    def __len__(self) -> int:
        return len(self._scores)

    @classmethod
    def load(cls, path) -> "SentimentDictionary":
        """Parse tab-separated 'term<TAB>score' lines."""
        entries: dict[str, int] = {}
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise FormatError(f"cannot read sentiment dictionary {path}: {exc}")
        for no, line in enumerate(lines, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{no}: expected 'term<TAB>score', got {line!r}")
            try:
                entries[parts[0].strip()] = int(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{no}: score {parts[1]!r} is not an integer")
        return cls(entries)

    def score(self, term: str) -> int | None:
        return self._scores.get(tuple(tokenize(term)))

    def terms_with_score(self, score: int) -> list[str]:
        return sorted(s for k, s in self._surface.items() if self._scores[k] == score)

    def find_terms(self, norm_tokens: list[str]) -> list[tuple[int, int, int]]:
        """Non-overlapping longest matches over normalized tokens.

        Returns (start, end_exclusive, score) triples in text order.
        """
        found = []
        i = 0
        n = len(norm_tokens)
        while i < n:
            hit = None
            for width in range(min(self._max_len, n - i), 0, -1):
                key = tuple(norm_tokens[i : i + width])
                if key in self._scores:
                    hit = (i, i + width, self._scores[key])
                    break
            if hit is not None:
                found.append(hit)
                i = hit[1]
            else:
                i += 1
        return found


@dataclass
class NegationLexicon:
    """Negation phrases with their placement: before the whole message or
    before each polar term."""

    entries: list[tuple[str, str]]

    def __post_init__(self):
        if not self.entries:
            raise InputError("negation lexicon must not be empty")
        if len(set(self.entries)) != len(self.entries):
            raise InputError("negation lexicon contains duplicate entries")
        for phrase, placement in self.entries:
            if placement not in (BEFORE_MESSAGE, BEFORE_TERM):
                raise InputError(
                    f"placement for {phrase!r} must be '{BEFORE_MESSAGE}' or "
                    f"'{BEFORE_TERM}', got {placement!r}"
                )

    @classmethod
    def load(cls, path) -> "NegationLexicon":
        """Parse tab-separated 'phrase<TAB>placement' lines."""
        entries = []
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise FormatError(f"cannot read negation lexicon {path}: {exc}")
        for no, line in enumerate(lines, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{no}: expected 'phrase<TAB>placement', got {line!r}")
            entries.append((parts[0].strip(), parts[1].strip()))
        try:
            return cls(entries)
        except InputError as exc:
            raise FormatError(f"invalid negation lexicon {path}: {exc}")


def _raw_spans(text: str):
    """Whitespace tokens of the display text with their comparison forms."""
    raw = text.split()
    return raw, [normalize_token(t) for t in raw]


def _match_span(norm: list[str], at: int, phrase_tokens: tuple[str, ...]) -> bool:
    return tuple(norm[at : at + len(phrase_tokens)]) == phrase_tokens


def _replace_span(raw: list[str], start: int, end: int, replacement: str) -> list[str]:
    """Swap raw tokens [start, end) for a replacement term, keeping the edge
    punctuation of the removed span."""
    lead = strip_edge_punct(raw[start])[0]
    trail = strip_edge_punct(raw[end - 1])[2]
    repl_tokens = replacement.split()
    repl_tokens[0] = lead + repl_tokens[0]
    repl_tokens[-1] = repl_tokens[-1] + trail
    return raw[:start] + repl_tokens + raw[end:]


def mask_target(message: str, entity: str) -> tuple[str, bool]:
    """Replace each whole-token, case-insensitive occurrence of the entity by
    the reserved target marker. Returns (text, whether anything matched)."""
    if not entity or not entity.strip():
        raise InputError("entity must be a non-empty string")
    ent = tuple(normalize_token(t) for t in entity.split())
    raw, norm = _raw_spans(message)
    out: list[str] = []
    i = 0
    replaced = False
    while i < len(raw):
        if _match_span(norm, i, ent):
            span = _replace_span(raw[i : i + len(ent)], 0, len(ent), TARGET_SURFACE)
            out.extend(span)
            i += len(ent)
            replaced = True
        else:
            out.append(raw[i])
            i += 1
    return " ".join(out), replaced


def term_augment(
    sample: AugmentedSample,
    dictionary: SentimentDictionary,
    max_variants: int,
    seed: int = 0,
) -> list[AugmentedSample]:
    """Generate same-score and label-flipping term-swap variants.

    Capped at max_variants by seeded sampling without replacement; the
    original text is never emitted.
    """
    raw, norm = _raw_spans(sample.text)
    occurrences = dictionary.find_terms(norm)
    if not occurrences:
        return []

    results: list[tuple[str, str]] = []

    # Same-score swaps: one occurrence at a time, label unchanged.
    for start, end, score in occurrences:
        current = " ".join(norm[start:end])
        for term in dictionary.terms_with_score(score):
            if " ".join(tokenize(term)) == current:
                continue
            text = " ".join(_replace_span(raw, start, end, term))
            results.append((text, sample.label))

    # Opposite-score swaps: flip every polar slot at once so the message
    # polarity actually inverts, then invert a polar label.
    polar = [occ for occ in occurrences if occ[2] != 0]
    if polar:
        choices = [dictionary.terms_with_score(-score) for _, _, score in polar]
        if all(choices):
            flipped = _FLIP.get(sample.label, sample.label)
            for combo in itertools.product(*choices):
                tokens = list(raw)
                for (start, end, _), term in sorted(
                    zip(polar, combo), key=lambda item: -item[0][0]
                ):
                    tokens = _replace_span(tokens, start, end, term)
                results.append((" ".join(tokens), flipped))

    seen = {(sample.text, sample.label)}
    unique: list[tuple[str, str]] = []
    for item in results:
        if item not in seen:
            seen.add(item)
            unique.append(item)
    if len(unique) > max_variants:
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(unique), size=max_variants, replace=False))
        unique = [unique[int(i)] for i in keep]
    return [
        AugmentedSample(
            text=text,
            label=label,
            rule=sample.rule,
            target=sample.target,
            provenance="term_swap",
            source_id=sample.source_id,
        )
        for text, label in unique
    ]


def negation_augment(
    sample: AugmentedSample,
    lexicon: NegationLexicon,
    dictionary: SentimentDictionary | None = None,
) -> list[AugmentedSample]:
    """Insert negation phrases and flip the polar label; neutral samples are
    skipped. Term placement needs the dictionary to locate polar terms."""
    if sample.label not in _FLIP:
        return []
    flipped = _FLIP[sample.label]
    raw, norm = _raw_spans(sample.text)
    texts: list[str] = []
    for phrase, placement in lexicon.entries:
        if placement == BEFORE_MESSAGE:
            texts.append(f"{phrase} {sample.text}")
        else:
            if dictionary is None:
                continue
            for start, _end, score in dictionary.find_terms(norm):
                if score == 0:
                    continue
                texts.append(" ".join(raw[:start] + [phrase] + raw[start:]))
    seen = set()
    out = []
    for text in texts:
        if text in seen or text == sample.text:
            continue
        seen.add(text)
        out.append(
            AugmentedSample(
                text=text,
                label=flipped,
                rule=sample.rule,
                target=sample.target,
                provenance="negation",
                source_id=sample.source_id,
            )
        )
    return out


@dataclass
class AugmentConfig:
    term_swaps: bool = True
    negations: bool = True
    max_term_variants: int = 16
    seed: int = 0


def augment_dataset(
    samples: list[AugmentedSample],
    dictionary: SentimentDictionary,
    lexicon: NegationLexicon | None,
    config: AugmentConfig,
) -> list[AugmentedSample]:
    """Originals plus the enabled variant stages, deduplicated by (text,
    label). Conflicting duplicates (same text, different label) are logged
    and the earlier sample kept."""
    numbered = [
        s if s.source_id >= 0 else replace(s, source_id=i) for i, s in enumerate(samples)
    ]
    pool: list[AugmentedSample] = list(numbered)
    if config.term_swaps:
        for s in numbered:
            pool.extend(
                term_augment(
                    s,
                    dictionary,
                    config.max_term_variants,
                    seed=_per_sample_seed(config.seed, s.source_id),
                )
            )
    if config.negations:
        if lexicon is None:
            raise InputError("negation augmentation requires a negation lexicon")
        for s in numbered:
            pool.extend(negation_augment(s, lexicon, dictionary))

    by_text: dict[str, str] = {}
    seen: set[tuple[str, str]] = set()
    out: list[AugmentedSample] = []
    for s in pool:
        key = (s.text, s.label)
        if key in seen:
            continue
        if s.text in by_text and by_text[s.text] != s.label:
            log.warning(
                "conflicting duplicate %r: keeping label %s, dropping %s",
                s.text,
                by_text[s.text],
                s.label,
            )
            continue
        by_text[s.text] = s.label
        seen.add(key)
        out.append(s)
    return out


def _per_sample_seed(base: int, source_id: int) -> int:
    return (base * 1_000_003 + source_id) % (2**63)

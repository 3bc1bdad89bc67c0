"""Four-way syntactic rule labels for short messages plus a pattern tagger.

The tagger is a corpus-preparation utility: it assigns one of the four rule
categories from entity/marker lexicons so that unlabeled corpora can feed
the rule-classification task. Hand-annotated rule labels always win.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .augment import SentimentDictionary
from .errors import FormatError, InputError
from .tensor import Tensor
from .textnorm import tokenize


class RuleLabel(Enum):
    DIRECTLY_SIMPLE = 0
    DIRECTLY_COMPARABLE = 1
    QUESTION = 2
    HEURISTICS = 3


RULE_NAMES = {
    RuleLabel.DIRECTLY_SIMPLE: "simple",
    RuleLabel.DIRECTLY_COMPARABLE: "comparable",
    RuleLabel.QUESTION: "question",
    RuleLabel.HEURISTICS: "heuristic",
}
RULES_BY_NAME = {name: label for label, name in RULE_NAMES.items()}

# How close (in tokens) a sentiment term must be to an entity for the
# directly-simple rule.
SIMPLE_WINDOW = 3


def rule_from_name(name: str) -> RuleLabel:
    try:
        return RULES_BY_NAME[name]
    except KeyError:
        raise InputError(f"unknown rule name {name!r}; expected one of {sorted(RULES_BY_NAME)}")


def encode_rule(label: RuleLabel) -> Tensor:
    """One-hot width-4 encoding in (simple, comparable, question, heuristic) order."""
    v = np.zeros(4)
    v[label.value] = 1.0
    return Tensor(v)


@dataclass
class RulePattern:
    """Entity and marker lexicons driving the tagger.

    Evaluation precedence is fixed: comparable, then question, then simple,
    with heuristics as the fallback.
    """

    entities: list[str]
    comparative: list[str]
    question: list[str]

    def __post_init__(self):
        self._entity_keys = sorted(
            {tuple(tokenize(e)) for e in self.entities if tokenize(e)},
            key=len,
            reverse=True,
        )
        self._comparative = {t for m in self.comparative for t in tokenize(m)}
        self._question = {t for m in self.question for t in tokenize(m)}

    @classmethod
    def load(cls, path) -> "RulePattern":
        """Parse a sectioned text file: [entities], [comparative], [question]."""
        sections: dict[str, list[str]] = {"entities": [], "comparative": [], "question": []}
        current: str | None = None
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise FormatError(f"cannot read pattern file {path}: {exc}")
        for no, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                if current not in sections:
                    raise FormatError(f"{path}:{no}: unknown section {line!r}")
                continue
            if current is None:
                raise FormatError(f"{path}:{no}: entry before any section header")
            sections[current].append(line)
        return cls(
            entities=sections["entities"],
            comparative=sections["comparative"],
            question=sections["question"],
        )

    def entity_spans(self, tokens: list[str]) -> list[tuple[int, int]]:
        spans = []
        i = 0
        n = len(tokens)
        while i < n:
            hit = None
            for key in self._entity_keys:
                if tuple(tokens[i : i + len(key)]) == key:
                    hit = (i, i + len(key))
                    break
            if hit is not None:
                spans.append(hit)
                i = hit[1]
            else:
                i += 1
        return spans

    def has_comparative(self, tokens: list[str]) -> bool:
        return any(t in self._comparative for t in tokens)

    def has_question(self, tokens: list[str]) -> bool:
        return "?" in tokens or any(t in self._question for t in tokens)


def tag_rule(
    message: str, patterns: RulePattern, dictionary: SentimentDictionary
) -> RuleLabel:
    """Deterministic rule tag for a message; total over all inputs."""
    tokens = tokenize(message)
    spans = patterns.entity_spans(tokens)
    if spans:
        if patterns.has_comparative(tokens):
            return RuleLabel.DIRECTLY_COMPARABLE
        if patterns.has_question(tokens):
            return RuleLabel.QUESTION
        terms = dictionary.find_terms(tokens)
        for e_start, e_end in spans:
            for t_start, t_end, _score in terms:
                gap = max(t_start - e_end, e_start - t_end) + 1
                if gap <= SIMPLE_WINDOW:
                    return RuleLabel.DIRECTLY_SIMPLE
    return RuleLabel.HEURISTICS

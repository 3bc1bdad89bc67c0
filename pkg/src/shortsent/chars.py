"""Character-level word vectors from a bidirectional GRU over the message.

The whole message runs through forward and backward character GRUs; each
word is represented by the two states read at its end-character position,
then concatenated with its word-level embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .gru import GRUCellParams, gru_run
from .tensor import Tensor, concat, take_rows
from .textnorm import tokenize

CHAR_PAD, CHAR_UNK = 0, 1
CHAR_PAD_TOKEN = "<pad>"
CHAR_UNK_TOKEN = "<unk>"


class CharVocabulary:
    """Character<->index map with reserved PAD/UNK slots."""

    def __init__(self, chars: list[str]):
        if len(chars) < 2 or chars[0] != CHAR_PAD_TOKEN or chars[1] != CHAR_UNK_TOKEN:
            raise InputError("character vocabulary must start with the PAD and UNK slots")
        if len(set(chars)) != len(chars):
            raise InputError("character vocabulary entries must be unique")
        self._chars = list(chars)
        self._index = {c: i for i, c in enumerate(self._chars)}

    @classmethod
    def build(cls, texts) -> "CharVocabulary":
        """Collect characters of the normalized texts, most frequent first."""
        counts: dict[str, int] = {}
        seen_any = False
        for text in texts:
            seen_any = True
            for ch in " ".join(tokenize(text)):
                counts[ch] = counts.get(ch, 0) + 1
        if not seen_any:
            raise InputError("cannot build a character vocabulary from an empty corpus")
        ranked = sorted(counts, key=lambda c: (-counts[c], c))
        return cls([CHAR_PAD_TOKEN, CHAR_UNK_TOKEN] + ranked)

    def __len__(self) -> int:
        return len(self._chars)

    @property
    def chars(self) -> list[str]:
        return list(self._chars)

    def index(self, ch: str) -> int:
        return self._index.get(ch, CHAR_UNK)


def char_tokenize(message: str, vocab: CharVocabulary) -> tuple[list[int], list[int]]:
    """Character indices of the normalized message plus each word's
    end-character position. Single spaces between words stay in the sequence."""
    words = tokenize(message)
    joined = " ".join(words)
    ends = []
    pos = -1
    for w in words:
        pos += len(w)
        ends.append(pos)
        pos += 1  # the separating space
    return [vocab.index(c) for c in joined], ends


@dataclass
class CharBiGRUParams:
    """Character embedding table plus independent forward/backward cells."""

    vocab: CharVocabulary
    table: Tensor  # (C, char_dim); PAD row pinned to zeros
    forward: GRUCellParams
    backward: GRUCellParams

    @classmethod
    def create(
        cls,
        vocab: CharVocabulary,
        char_dim: int = 24,
        hidden: int = 50,
        rng: np.random.Generator | None = None,
    ) -> "CharBiGRUParams":
        rng = rng if rng is not None else np.random.default_rng(0)
        table = rng.uniform(-0.5 / char_dim, 0.5 / char_dim, size=(len(vocab), char_dim))
        table[CHAR_PAD] = 0.0
        return cls(
            vocab=vocab,
            table=Tensor(table, requires_grad=True),
            forward=GRUCellParams.create(char_dim, hidden, rng),
            backward=GRUCellParams.create(char_dim, hidden, rng),
        )

    @property
    def hidden(self) -> int:
        return self.forward.hidden

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden

    def parameters(self) -> list[Tensor]:
        return [self.table] + self.forward.parameters() + self.backward.parameters()


def encode_char_ids(
    char_ids: list[int], end_positions: list[int], params: CharBiGRUParams
) -> Tensor:
    """Bi-GRU over a character-index sequence, read out at the end positions."""
    if not char_ids:
        raise InputError("cannot encode an empty character sequence")
    n = len(char_ids)
    vecs = take_rows(params.table, char_ids)
    fwd_states, _ = gru_run(vecs, None, params.forward)
    flipped = take_rows(vecs, list(range(n - 1, -1, -1)))
    bwd_states_rev, _ = gru_run(flipped, None, params.backward)
    fwd_at_ends = take_rows(fwd_states, end_positions)
    bwd_at_ends = take_rows(bwd_states_rev, [n - 1 - e for e in end_positions])
    return concat([fwd_at_ends, bwd_at_ends], axis=1)


def encode_char_words(message: str, params: CharBiGRUParams) -> Tensor:
    """One row of width 2*hidden per word of the message."""
    char_ids, ends = char_tokenize(message, params.vocab)
    if not char_ids:
        raise InputError("cannot character-encode an empty message")
    return encode_char_ids(char_ids, ends, params)


def combine_word_char(word_vecs: Tensor, char_vecs: Tensor) -> Tensor:
    """Row-wise concatenation, word part first."""
    if word_vecs.values.ndim != 2 or char_vecs.values.ndim != 2:
        raise DimensionError("combine_word_char needs two 2-D matrices")
    if word_vecs.shape[0] != char_vecs.shape[0]:
        raise DimensionError(
            f"row counts differ: word {word_vecs.shape[0]} vs char {char_vecs.shape[0]}"
        )
    return concat([word_vecs, char_vecs], axis=1)

"""Vocabulary construction, skip-gram training, sequence embedding and freezing.

The embedding matrix is the package's transfer-learning unit: it can be
trained here, saved to a plain-text file, and reloaded frozen so that later
classifier training never writes gradients into it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, FormatError, InputError, StateError
from .tensor import Tensor, take_rows

PAD, UNK, TARGET = 0, 1, 2
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
TARGET_TOKEN = "target"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, TARGET_TOKEN)


class Vocabulary:
    """Bijective token<->index map with reserved PAD/UNK/TARGET slots."""

    def __init__(self, tokens: list[str]):
        if len(tokens) < len(RESERVED_TOKENS) or tuple(tokens[:3]) != RESERVED_TOKENS:
            raise InputError(f"vocabulary must start with the reserved tokens {RESERVED_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise InputError("vocabulary tokens must be unique")
        self._tokens = list(tokens)
        self._index = {t: i for i, t in enumerate(self._tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def index(self, token: str) -> int:
        return self._index.get(token, UNK)

    def token(self, index: int) -> str:
        if not 0 <= index < len(self._tokens):
            raise InputError(f"index {index} out of range for vocabulary of size {len(self)}")
        return self._tokens[index]

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.index(t) for t in tokens]


def build_vocabulary(corpus, max_size: int = 65000) -> Vocabulary:
    """Rank tokens by descending frequency (ties lexicographic) and truncate.

    `corpus` is a sequence of token lists. Reserved tokens occupy the first
    three slots; everything beyond max_size maps to UNK at lookup time.
    """
    if max_size < len(RESERVED_TOKENS) + 1:
        raise ConfigError(f"max_size must leave room beyond the reserved slots, got {max_size}")
    counts: dict[str, int] = {}
    n_docs = 0
    for doc in corpus:
        n_docs += 1
        for tok in doc:
            if tok in RESERVED_TOKENS:
                continue
            counts[tok] = counts.get(tok, 0) + 1
    if n_docs == 0:
        raise InputError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    kept = ranked[: max_size - len(RESERVED_TOKENS)]
    return Vocabulary(list(RESERVED_TOKENS) + kept)


@dataclass
class EmbeddingMatrix:
    """M x K word-vector table; `frozen` blocks all gradient writes."""

    weights: Tensor
    frozen: bool = False

    @classmethod
    def random(cls, vocab_size: int, dim: int, rng: np.random.Generator) -> "EmbeddingMatrix":
        w = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim))
        w[PAD] = 0.0  # padding stays information-free
        return cls(weights=Tensor(w, requires_grad=True))

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def rows(self) -> int:
        return self.weights.shape[0]


def set_frozen(matrix: EmbeddingMatrix, flag: bool) -> None:
    """Toggle the freeze: when frozen, backward never touches the weights."""
    matrix.frozen = bool(flag)
    matrix.weights.requires_grad = not matrix.frozen
    if matrix.frozen:
        matrix.weights.zero_grad()


def embed_sequence(tokens, matrix: EmbeddingMatrix) -> Tensor:
    """Row-lookup embedding of an index sequence, equivalent to onehot @ W."""
    idx = list(tokens)
    for t in idx:
        if not 0 <= int(t) < matrix.rows:
            raise InputError(f"token index {t} out of range for vocabulary of size {matrix.rows}")
    return take_rows(matrix.weights, idx)


@dataclass
class SkipGramConfig:
    window_radius: int = 4
    epochs: int = 5
    learning_rate: float = 0.025
    negative_samples: int = 5
    rng_seed: int = 0
    embed_dim: int = 320

    def __post_init__(self):
        if self.window_radius < 1:
            raise ConfigError(f"window_radius must be >= 1, got {self.window_radius}")
        if self.negative_samples < 0:
            raise ConfigError(f"negative_samples must be >= 0, got {self.negative_samples}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")


def generate_skipgram_pairs(tokens: list[int], window_radius: int) -> list[tuple[int, int]]:
    """All (center, context) pairs within the window; PAD never appears."""
    if not tokens:
        raise InputError("cannot generate pairs from an empty token list")
    pairs = []
    n = len(tokens)
    for i, center in enumerate(tokens):
        if center == PAD:
            continue
        lo = max(0, i - window_radius)
        hi = min(n - 1, i + window_radius)
        for j in range(lo, hi + 1):
            if j == i or tokens[j] == PAD:
                continue
            pairs.append((center, tokens[j]))
    return pairs


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def train_skipgram(corpus, vocab: Vocabulary | None, config: SkipGramConfig) -> EmbeddingMatrix:
    """Train word vectors by predicting context words from each center word.

    Uses negative sampling with `config.negative_samples` draws from the
    unigram^0.75 distribution, or the full softmax objective when that count
    is zero. Bitwise reproducible for a fixed rng_seed.
    """
    if vocab is None or len(vocab) <= len(RESERVED_TOKENS):
        raise StateError("a built vocabulary is required before skip-gram training")
    rng = np.random.default_rng(config.rng_seed)
    m, k = len(vocab), config.embed_dim
    w_in = rng.uniform(-0.5 / k, 0.5 / k, size=(m, k))
    w_in[PAD] = 0.0
    w_out = np.zeros((m, k))

    pairs: list[tuple[int, int]] = []
    counts = np.zeros(m)
    for doc in corpus:
        idx = vocab.encode(doc)
        for t in idx:
            if t != PAD:
                counts[t] += 1
        if idx:
            pairs.extend(generate_skipgram_pairs(idx, config.window_radius))
    if not pairs:
        return EmbeddingMatrix(weights=Tensor(w_in, requires_grad=True))

    weights = counts**0.75
    weights[PAD] = 0.0
    noise = weights / weights.sum() if weights.sum() > 0 else None

    lr = config.learning_rate
    pair_arr = np.asarray(pairs, dtype=np.int64)
    for _ in range(config.epochs):
        order = rng.permutation(len(pair_arr))
        for c, o in pair_arr[order]:
            v = w_in[c]
            if config.negative_samples > 0:
                dv = np.zeros(k)
                u = w_out[o]
                g = _sigmoid(v @ u) - 1.0  # positive pair pulls score up
                dv += g * u
                w_out[o] -= lr * g * v
                negs = rng.choice(m, size=config.negative_samples, p=noise)
                for n in negs:
                    if n == o:
                        continue
                    un = w_out[n]
                    gn = _sigmoid(v @ un)
                    dv += gn * un
                    w_out[n] -= lr * gn * v
                w_in[c] -= lr * dv
            else:
                scores = w_out @ v
                scores -= scores.max()
                p = np.exp(scores)
                p /= p.sum()
                p[o] -= 1.0
                dv = w_out.T @ p
                w_out -= lr * np.outer(p, v)
                w_in[c] -= lr * dv
    return EmbeddingMatrix(weights=Tensor(w_in, requires_grad=True))


def save_embeddings(matrix: EmbeddingMatrix, vocab: Vocabulary, path) -> None:
    """Write 'EMB <M> <K>' then one '<token> <K floats>' line per vocab row."""
    if matrix.rows != len(vocab):
        raise DimensionError(
            f"embedding rows ({matrix.rows}) must match vocabulary size ({len(vocab)})"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"EMB {matrix.rows} {matrix.dim}\n")
        for i, tok in enumerate(vocab.tokens):
            vals = " ".join(f"{v:.17g}" for v in matrix.weights.values[i])
            fh.write(f"{tok} {vals}\n")


def load_embeddings(path) -> tuple[EmbeddingMatrix, Vocabulary]:
    """Inverse of save_embeddings; bit-exact round trip, all-or-nothing."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read embedding file {path}: {exc}")
    if not lines:
        raise FormatError(f"embedding file {path} is empty")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "EMB":
        raise FormatError(f"bad embedding header {lines[0]!r}; expected 'EMB <M> <K>'")
    try:
        m, k = int(header[1]), int(header[2])
    except ValueError:
        raise FormatError(f"non-integer dimensions in embedding header {lines[0]!r}")
    body = [ln for ln in lines[1:] if ln]
    if len(body) != m:
        raise FormatError(f"embedding file declares {m} rows but contains {len(body)}")
    tokens: list[str] = []
    values = np.empty((m, k))
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != k + 1:
            raise FormatError(f"embedding row {i} has {len(parts) - 1} values, expected {k}")
        tokens.append(parts[0])
        try:
            values[i] = [float(x) for x in parts[1:]]
        except ValueError:
            raise FormatError(f"non-numeric value in embedding row {i}")
    try:
        vocab = Vocabulary(tokens)
    except InputError as exc:
        raise FormatError(f"embedding file vocabulary is invalid: {exc}")
    return EmbeddingMatrix(weights=Tensor(values, requires_grad=True)), vocab

"""Classifier building blocks: CNN encoder, dropout, heads, multi-task net.

The multi-task network shares everything from the embedding lookup through
the sequence encoder; the 3-way sentiment head and 4-way rule head each read
the same final representation through their own fully connected layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chars import CharBiGRUParams, CharVocabulary, combine_word_char, encode_char_ids
from .embedding import EmbeddingMatrix, PAD, Vocabulary, embed_sequence
from .errors import ConfigError, DimensionError
from .gru import GRUCellParams, bigru_run, gru_cell_step, gru_run  # noqa: F401 (re-export)
from .tensor import Tensor, add, concat, custom_op, hadamard, matmul, softmax


@dataclass
class CNNEncoderParams:
    """f filters of shape (width, embed_dim), one bias each, and a pooling
    window that must divide the sequence length."""

    filters: Tensor  # (f, d, K)
    bias: Tensor  # (f,)
    pool: int

    @classmethod
    def create(
        cls, num_filters: int, width: int, embed_dim: int, pool: int, rng: np.random.Generator
    ) -> "CNNEncoderParams":
        limit = 1.0 / np.sqrt(width * embed_dim)
        filters = rng.uniform(-limit, limit, size=(num_filters, width, embed_dim))
        bias = rng.uniform(-0.05, 0.05, size=num_filters)
        return cls(filters=Tensor(filters, requires_grad=True), bias=Tensor(bias, requires_grad=True), pool=pool)

    @property
    def num_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def width(self) -> int:
        return self.filters.shape[1]

    def out_dim(self, seq_len: int) -> int:
        return (seq_len // self.pool) * self.num_filters

    def parameters(self) -> list[Tensor]:
        return [self.filters, self.bias]


def cnn_encode(E: Tensor, params: CNNEncoderParams) -> Tensor:
    """Convolve each filter down the rows of E, relu, zero-pad the feature map
    to length N, max-pool every `pool` consecutive entries, and flatten the
    resulting (N/pool x f) matrix row-major."""
    if E.values.ndim != 2:
        raise DimensionError(f"cnn_encode needs a 2-D input, got shape {E.shape}")
    n, k = E.shape
    f, d, kf = params.filters.shape
    if kf != k:
        raise DimensionError(f"filter width {kf} does not match embedding width {k}")
    if d > n:
        raise ConfigError(f"filter height {d} exceeds sequence length {n}")
    q = params.pool
    if q < 1 or n % q != 0:
        raise ConfigError(f"pooling window {q} must divide sequence length {n}")
    p = n // q

    ev = E.values
    fv = params.filters.values
    bv = params.bias.values
    valid = n - d + 1
    windows = np.lib.stride_tricks.sliding_window_view(ev, (d, k))[:, 0]  # (valid, d, K)
    pre = np.zeros((f, n))
    pre[:, :valid] = np.tensordot(fv, windows, axes=([1, 2], [1, 2])) + bv[:, None]
    fmap = np.zeros((f, n))
    fmap[:, :valid] = np.maximum(pre[:, :valid], 0.0)
    pooled = fmap.reshape(f, p, q)
    arg = pooled.argmax(axis=2)  # first index wins ties
    out = pooled.max(axis=2).T.reshape(-1)  # (p, f) flattened row-major

    def back(g):
        g_pool = g.reshape(p, f).T  # (f, p)
        gmap = np.zeros((f, p, q))
        np.put_along_axis(gmap, arg[..., None], g_pool[..., None], axis=2)
        gmap = gmap.reshape(f, n) * (pre > 0.0)  # relu gate also blocks the zero padding
        ge = np.zeros_like(ev)
        gf = np.zeros_like(fv)
        gb = np.zeros_like(bv)
        for j in range(f):
            for i in np.nonzero(gmap[j, :valid])[0]:
                gji = gmap[j, i]
                ge[i : i + d] += gji * fv[j]
                gf[j] += gji * ev[i : i + d]
                gb[j] += gji
        return ge, gf, gb

    return custom_op(out, (E, params.filters, params.bias), back)


@dataclass
class DropoutSpec:
    """Inverted dropout: zero with probability drop_rate, rescale survivors.

    Identity whenever training is false or the rate is zero; successive calls
    draw fresh masks from the seeded generator.
    """

    drop_rate: float = 0.0
    training: bool = True
    rng_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.drop_rate < 1.0:
            raise ConfigError(f"drop_rate must lie in [0, 1), got {self.drop_rate}")
        self.reseed()

    def reseed(self) -> None:
        self._rng = np.random.default_rng(self.rng_seed)


def dropout_apply(x: Tensor, spec: DropoutSpec) -> Tensor:
    if not spec.training or spec.drop_rate == 0.0:
        return x
    keep = 1.0 - spec.drop_rate
    mask = (spec._rng.random(x.shape) >= spec.drop_rate) / keep
    return hadamard(x, Tensor(mask))


@dataclass
class Linear:
    """Fully connected layer with bias."""

    W: Tensor  # (out, in)
    b: Tensor  # (out,)

    @classmethod
    def create(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "Linear":
        limit = 1.0 / np.sqrt(in_dim)
        return cls(
            W=Tensor(rng.uniform(-limit, limit, size=(out_dim, in_dim)), requires_grad=True),
            b=Tensor(np.zeros(out_dim), requires_grad=True),
        )

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(self.W, x), self.b)

    def parameters(self) -> list[Tensor]:
        return [self.W, self.b]


@dataclass
class ModelConfig:
    core: str = "gru"  # "gru" or "cnn"
    embed_dim: int = 320
    use_chars: bool = True
    char_dim: int = 24
    char_hidden: int = 50
    hidden: int = 200
    seq_len: int = 10
    cnn_filters: int = 64
    cnn_width: int = 3
    cnn_pool: int = 2
    drop_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.core not in ("gru", "cnn"):
            raise ConfigError(f"core must be 'gru' or 'cnn', got {self.core!r}")


@dataclass
class EncodedMessage:
    """A message prepared for the network: fixed-length word indices plus the
    character sequence and per-word end positions for the first n_words."""

    token_ids: list[int]
    char_ids: list[int]
    end_positions: list[int]
    n_words: int


class MultiTaskNet:
    """Shared encoder feeding a sentiment head and a rule head."""

    def __init__(
        self,
        vocab: Vocabulary,
        word_emb: EmbeddingMatrix,
        char_params: CharBiGRUParams | None,
        core: str,
        gru_params: GRUCellParams | None,
        cnn_params: CNNEncoderParams | None,
        sent_head: Linear,
        rule_head: Linear,
        dropout: DropoutSpec,
        seq_len: int,
    ):
        self.vocab = vocab
        self.word_emb = word_emb
        self.char_params = char_params
        self.core = core
        self.gru_params = gru_params
        self.cnn_params = cnn_params
        self.sent_head = sent_head
        self.rule_head = rule_head
        self.dropout = dropout
        self.seq_len = seq_len
        self.penalty = None  # set by the trainer when cost-sensitive loss is on

    @classmethod
    def create(
        cls,
        vocab: Vocabulary,
        char_vocab: CharVocabulary | None,
        cfg: ModelConfig,
        word_emb: EmbeddingMatrix | None = None,
    ) -> "MultiTaskNet":
        rng = np.random.default_rng(cfg.seed)
        if word_emb is None:
            word_emb = EmbeddingMatrix.random(len(vocab), cfg.embed_dim, rng)
        elif word_emb.dim != cfg.embed_dim:
            raise ConfigError(
                f"embedding width {word_emb.dim} does not match configured {cfg.embed_dim}"
            )
        char_params = None
        width = cfg.embed_dim
        if cfg.use_chars:
            char_params = CharBiGRUParams.create(char_vocab, cfg.char_dim, cfg.char_hidden, rng)
            width += char_params.out_dim
        gru_params = None
        cnn_params = None
        if cfg.core == "gru":
            gru_params = GRUCellParams.create(width, cfg.hidden, rng)
            feat_dim = cfg.hidden
        else:
            cnn_params = CNNEncoderParams.create(
                cfg.cnn_filters, cfg.cnn_width, width, cfg.cnn_pool, rng
            )
            if cfg.seq_len % cfg.cnn_pool != 0:
                raise ConfigError(
                    f"cnn_pool {cfg.cnn_pool} must divide seq_len {cfg.seq_len}"
                )
            feat_dim = cnn_params.out_dim(cfg.seq_len)
        return cls(
            vocab=vocab,
            word_emb=word_emb,
            char_params=char_params,
            core=cfg.core,
            gru_params=gru_params,
            cnn_params=cnn_params,
            sent_head=Linear.create(feat_dim, 3, rng),
            rule_head=Linear.create(feat_dim, 4, rng),
            dropout=DropoutSpec(cfg.drop_rate, training=True, rng_seed=cfg.seed + 1),
            seq_len=cfg.seq_len,
        )

    def parameters(self) -> list[Tensor]:
        params = []
        if not self.word_emb.frozen:
            params.append(self.word_emb.weights)
        if self.char_params is not None:
            params.extend(self.char_params.parameters())
        if self.gru_params is not None:
            params.extend(self.gru_params.parameters())
        if self.cnn_params is not None:
            params.extend(self.cnn_params.parameters())
        params.extend(self.sent_head.parameters())
        params.extend(self.rule_head.parameters())
        return params

    def zero_pinned_grads(self) -> None:
        """Keep the PAD rows of both embedding tables information-free."""
        if not self.word_emb.frozen:
            self.word_emb.weights.grad[PAD] = 0.0
        if self.char_params is not None:
            self.char_params.table.grad[0] = 0.0


def forward_multitask(
    msg: EncodedMessage, net: MultiTaskNet, mode: str = "infer"
) -> tuple[Tensor, Tensor]:
    """Shared stack computed once; both heads read the same final state."""
    if mode not in ("train", "infer"):
        raise ConfigError(f"mode must be 'train' or 'infer', got {mode!r}")
    net.dropout.training = mode == "train"
    x = embed_sequence(msg.token_ids, net.word_emb)
    if net.char_params is not None:
        width = net.char_params.out_dim
        if msg.n_words > 0:
            char_rows = encode_char_ids(msg.char_ids, msg.end_positions, net.char_params)
            if msg.n_words < net.seq_len:
                pad = Tensor(np.zeros((net.seq_len - msg.n_words, width)))
                char_rows = concat([char_rows, pad], axis=0)
        else:
            char_rows = Tensor(np.zeros((net.seq_len, width)))
        x = combine_word_char(x, char_rows)
    x = dropout_apply(x, net.dropout)
    if net.core == "gru":
        _, feat = gru_run(x, None, net.gru_params)
    else:
        feat = cnn_encode(x, net.cnn_params)
    feat = dropout_apply(feat, net.dropout)
    return softmax(net.sent_head(feat)), softmax(net.rule_head(feat))

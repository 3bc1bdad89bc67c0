import hashlib

import numpy as np
import pytest

from shortsent.embedding import (
    PAD,
    PAD_TOKEN,
    TARGET_TOKEN,
    UNK,
    UNK_TOKEN,
    EmbeddingMatrix,
    SkipGramConfig,
    Vocabulary,
    build_vocabulary,
    embed_sequence,
    generate_skipgram_pairs,
    load_embeddings,
    save_embeddings,
    set_frozen,
    train_skipgram,
)
from shortsent.errors import ConfigError, FormatError, InputError, StateError
from shortsent.tensor import Tape, Tensor, backward, matmul, sgd_step, total


def checksum(tensor):
    return hashlib.sha256(tensor.values.tobytes()).hexdigest()


class TestVocabulary:
    def test_reserved_then_frequency_order(self):
        vocab = build_vocabulary([["a", "a", "b"]])
        assert vocab.tokens == [PAD_TOKEN, UNK_TOKEN, TARGET_TOKEN, "a", "b"]
        assert vocab.index("a") == 3

    def test_truncation_drops_least_frequent(self):
        corpus = [["w1"] * 5 + ["w2"] * 4 + ["w3"] * 3 + ["w4"] * 2 + ["w5"]]
        vocab = build_vocabulary(corpus, max_size=4)
        assert len(vocab) == 4
        assert vocab.index("w5") == UNK
        assert vocab.index("w4") == UNK

    def test_frequency_tie_breaks_lexicographically(self):
        vocab = build_vocabulary([["y", "x", "y", "x"]])
        assert vocab.index("x") < vocab.index("y")

    def test_empty_corpus_rejected(self):
        with pytest.raises(InputError):
            build_vocabulary([])

    def test_bijection(self):
        vocab = build_vocabulary([["alpha", "beta", "gamma"]])
        for i in range(len(vocab)):
            assert vocab.index(vocab.token(i)) == i

    def test_pad_index_is_zero(self):
        vocab = build_vocabulary([["a"]])
        assert vocab.index(PAD_TOKEN) == PAD == 0


class TestSkipgramPairs:
    def test_radius_one_enumeration(self):
        pairs = generate_skipgram_pairs([3, 4, 5], 1)
        assert set(pairs) == {(3, 4), (4, 3), (4, 5), (5, 4)}

    def test_single_token_yields_nothing(self):
        assert generate_skipgram_pairs([3], 2) == []

    def test_pair_count_matches_bruteforce(self):
        tokens = [3, 4, 5, 6]
        radius = 2
        pairs = generate_skipgram_pairs(tokens, radius)
        brute = sum(
            min(i + radius, len(tokens) - 1) - max(i - radius, 0)
            for i in range(len(tokens))
        )
        assert len(pairs) == brute == 10

    def test_pad_never_appears(self):
        pairs = generate_skipgram_pairs([PAD, 3, 4, PAD, 5], 3)
        assert all(PAD not in pair for pair in pairs)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            generate_skipgram_pairs([], 1)


def _frames_corpus():
    frames = [
        ("the", "{}", "sat", "on", "the", "mat"),
        ("my", "{}", "sleeps", "all", "day"),
        ("a", "{}", "chased", "the", "ball"),
        ("that", "{}", "ate", "its", "food"),
        ("the", "{}", "ran", "around", "outside"),
        ("his", "{}", "loves", "the", "garden"),
    ]
    docs = []
    for frame in frames:
        for tok in ("cat", "dog"):
            for _ in range(4):
                docs.append([w.format(tok) for w in frame])
    docs += [
        ["rocket", "engines", "burn", "liquid", "fuel"],
        ["the", "rocket", "launch", "window", "opened"],
        ["rocket", "stages", "separate", "after", "liftoff"],
    ] * 8
    docs += [
        ["stone", "walls", "surround", "old", "castles"],
        ["ancient", "stone", "bridges", "span", "rivers"],
        ["stone", "carvings", "decorate", "temples"],
    ] * 8
    return docs


def _cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestTrainSkipgram:
    def test_requires_vocabulary(self):
        cfg = SkipGramConfig(epochs=1, embed_dim=8)
        with pytest.raises(StateError):
            train_skipgram([["a", "b"]], None, cfg)

    def test_zero_epochs_returns_initialization(self):
        docs = [["a", "b", "c"]]
        vocab = build_vocabulary(docs)
        cfg = SkipGramConfig(epochs=0, rng_seed=3, embed_dim=8)
        first = train_skipgram(docs, vocab, cfg)
        second = train_skipgram(docs, vocab, cfg)
        np.testing.assert_array_equal(first.weights.values, second.weights.values)
        trained = train_skipgram(docs, vocab, SkipGramConfig(epochs=2, rng_seed=3, embed_dim=8))
        assert not np.array_equal(first.weights.values, trained.weights.values)

    def test_bitwise_reproducible_under_fixed_seed(self):
        docs = _frames_corpus()[:12]
        vocab = build_vocabulary(docs)
        cfg = SkipGramConfig(epochs=3, rng_seed=11, embed_dim=8)
        a = train_skipgram(docs, vocab, cfg)
        b = train_skipgram(docs, vocab, cfg)
        assert checksum(a.weights) == checksum(b.weights)

    def test_interchangeable_tokens_end_up_close(self):
        docs = _frames_corpus()
        vocab = build_vocabulary(docs)
        cfg = SkipGramConfig(
            window_radius=2, epochs=30, learning_rate=0.05, negative_samples=5,
            rng_seed=7, embed_dim=16,
        )
        w = train_skipgram(docs, vocab, cfg).weights.values
        together = _cosine(w[vocab.index("cat")], w[vocab.index("dog")])
        apart = _cosine(w[vocab.index("rocket")], w[vocab.index("stone")])
        assert together > 0.7
        assert together > apart

    def test_full_softmax_objective_also_learns(self):
        docs = _frames_corpus()
        vocab = build_vocabulary(docs)
        cfg = SkipGramConfig(
            window_radius=2, epochs=8, learning_rate=0.05, negative_samples=0,
            rng_seed=7, embed_dim=16,
        )
        w = train_skipgram(docs, vocab, cfg).weights.values
        together = _cosine(w[vocab.index("cat")], w[vocab.index("dog")])
        apart = _cosine(w[vocab.index("rocket")], w[vocab.index("stone")])
        assert together > apart

    def test_pad_row_stays_zero(self):
        docs = _frames_corpus()[:12]
        vocab = build_vocabulary(docs)
        w = train_skipgram(docs, vocab, SkipGramConfig(epochs=2, embed_dim=8)).weights.values
        np.testing.assert_array_equal(w[PAD], 0.0)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SkipGramConfig(window_radius=0)
        with pytest.raises(ConfigError):
            SkipGramConfig(negative_samples=-1)


class TestEmbedSequence:
    def test_pad_rows(self):
        rng = np.random.default_rng(0)
        matrix = EmbeddingMatrix.random(5, 3, rng)
        out = embed_sequence([PAD, PAD], matrix)
        np.testing.assert_array_equal(out.values, np.zeros((2, 3)))

    def test_equals_explicit_onehot_product(self):
        rng = np.random.default_rng(1)
        matrix = EmbeddingMatrix.random(5, 3, rng)
        tokens = [4, 0, 2, 2, 1]
        onehot = np.zeros((len(tokens), 5))
        for i, t in enumerate(tokens):
            onehot[i, t] = 1.0
        oracle = matmul(Tensor(onehot), matrix.weights)
        looked_up = embed_sequence(tokens, matrix)
        np.testing.assert_array_equal(looked_up.values, oracle.values)

    def test_default_width_shape(self):
        rng = np.random.default_rng(2)
        matrix = EmbeddingMatrix.random(30, 320, rng)
        assert embed_sequence(list(range(10)), matrix).shape == (10, 320)

    def test_out_of_range_rejected(self):
        matrix = EmbeddingMatrix.random(4, 2, np.random.default_rng(0))
        with pytest.raises(InputError):
            embed_sequence([5], matrix)


class TestFreeze:
    def _training_step(self, matrix, tokens):
        # downstream trainable layer, as in a real transfer run
        head = Tensor(np.ones((len(tokens), len(tokens))), requires_grad=True)
        with Tape():
            loss = total(matmul(head, embed_sequence(tokens, matrix)))
            backward(loss)
        sgd_step([matrix.weights, head], 0.1)
        matrix.weights.zero_grad()

    def test_frozen_weights_bit_identical_after_50_steps(self):
        matrix = EmbeddingMatrix.random(6, 4, np.random.default_rng(3))
        set_frozen(matrix, True)
        before = checksum(matrix.weights)
        for _ in range(50):
            self._training_step(matrix, [1, 2, 3])
        assert checksum(matrix.weights) == before

    def test_unfrozen_weights_move(self):
        matrix = EmbeddingMatrix.random(6, 4, np.random.default_rng(3))
        before = checksum(matrix.weights)
        self._training_step(matrix, [1, 2, 3])
        assert checksum(matrix.weights) != before

    def test_toggling_frozen_mid_run_stops_drift(self):
        matrix = EmbeddingMatrix.random(6, 4, np.random.default_rng(4))
        self._training_step(matrix, [1, 2])
        set_frozen(matrix, True)
        frozen_at = checksum(matrix.weights)
        for _ in range(10):
            self._training_step(matrix, [1, 2])
        assert checksum(matrix.weights) == frozen_at


class TestSerialization:
    def test_round_trip_is_bit_exact(self, tmp_path):
        docs = [["red", "green", "blue", "green"]]
        vocab = build_vocabulary(docs)
        matrix = EmbeddingMatrix.random(len(vocab), 7, np.random.default_rng(5))
        path = tmp_path / "emb.txt"
        save_embeddings(matrix, vocab, path)
        loaded, loaded_vocab = load_embeddings(path)
        np.testing.assert_array_equal(loaded.weights.values, matrix.weights.values)
        assert loaded_vocab.tokens == vocab.tokens

    def test_loaded_matrix_freezes_for_transfer(self, tmp_path):
        docs = [["x", "y"]]
        vocab = build_vocabulary(docs)
        matrix = EmbeddingMatrix.random(len(vocab), 4, np.random.default_rng(6))
        path = tmp_path / "emb.txt"
        save_embeddings(matrix, vocab, path)
        loaded, _ = load_embeddings(path)
        set_frozen(loaded, True)
        assert loaded.frozen and not loaded.weights.requires_grad

    def test_truncated_file_rejected(self, tmp_path):
        docs = [["x", "y", "z"]]
        vocab = build_vocabulary(docs)
        matrix = EmbeddingMatrix.random(len(vocab), 4, np.random.default_rng(7))
        path = tmp_path / "emb.txt"
        save_embeddings(matrix, vocab, path)
        content = path.read_text().splitlines()
        path.write_text("\n".join(content[:-2]) + "\n")
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("not an embedding file\n")
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_vocabulary_requires_reserved_prefix(self):
        with pytest.raises(InputError):
            Vocabulary(["a", "b", "c"])

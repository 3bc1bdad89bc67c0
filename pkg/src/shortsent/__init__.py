"""Sentiment classification for short informal messages.

A small dense-tensor engine with reverse-mode differentiation underpins
skip-gram word embeddings, character-level Bi-GRU word vectors, CNN and GRU
classifiers, a penalty-matrix weighted loss, domain-knowledge data
augmentation, and rule-aware multi-task training, all runnable from one CLI.
"""

from .augment import (
    AugmentConfig,
    AugmentedSample,
    NegationLexicon,
    SentimentDictionary,
    augment_dataset,
    mask_target,
    negation_augment,
    term_augment,
)
from .chars import (
    CharBiGRUParams,
    CharVocabulary,
    char_tokenize,
    combine_word_char,
    encode_char_words,
)
from .embedding import (
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
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    DomainError,
    FormatError,
    InputError,
    ShortsentError,
    StateError,
)
from .loss import (
    PenaltyMatrix,
    SENTIMENT_CLASSES,
    cross_entropy,
    multitask_loss,
    weighted_cross_entropy,
)
from .models import (
    CNNEncoderParams,
    DropoutSpec,
    EncodedMessage,
    GRUCellParams,
    ModelConfig,
    MultiTaskNet,
    bigru_run,
    cnn_encode,
    dropout_apply,
    forward_multitask,
    gru_cell_step,
    gru_run,
)
from .pipeline import (
    Dataset,
    LabeledMessage,
    MetricsReport,
    TrainConfig,
    checkpoint_load,
    checkpoint_save,
    evaluate,
    load_corpus,
    pad_truncate,
    predict,
    prepare_dataset,
    prepare_message,
    run_ablation,
    split_dataset,
    tokenize,
    train,
)
from .rules import RuleLabel, RulePattern, encode_rule, tag_rule
from .tensor import (
    Tape,
    Tensor,
    add,
    backward,
    concat,
    elementwise_binary,
    elementwise_unary,
    hadamard,
    ln,
    matmul,
    relu,
    sgd_step,
    sigmoid,
    softmax,
    subtract,
    tanh,
)

__version__ = "0.1.0"

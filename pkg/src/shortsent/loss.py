"""Cross-entropy, penalty-weighted cross-entropy, and multi-task summation.

The penalty matrix scales the loss of a misclassified message by how serious
that particular confusion is: polar-to-polar mistakes cost most, calling a
polar message neutral costs less, and correct predictions are unweighted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, FormatError, InputError
from .tensor import Tensor, add, custom_op, scale

SENTIMENT_CLASSES = ("positive", "negative", "neutral")

# Default misclassification weights, rows = predicted, columns = true,
# class order (positive, negative, neutral).
DEFAULT_PENALTIES = (
    (1.0, 2.5, 2.0),
    (2.5, 1.0, 2.0),
    (1.5, 1.5, 1.0),
)

_LOG_CLAMP = 1e-12


@dataclass
class PenaltyMatrix:
    """3x3 positive weights indexed by (predicted class, true class)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (3, 3):
            raise InputError(f"penalty matrix must be 3x3, got shape {self.values.shape}")
        if not np.all(np.diag(self.values) == 1.0):
            raise InputError("penalty matrix diagonal entries must equal 1")
        if not np.all(self.values >= 1.0):
            raise InputError("penalty matrix entries must all be >= 1")

    @classmethod
    def default(cls) -> "PenaltyMatrix":
        return cls(np.array(DEFAULT_PENALTIES))

    @classmethod
    def load(cls, path) -> "PenaltyMatrix":
        """Parse a 3x3 numeric text file (whitespace-separated)."""
        try:
            with open(path, encoding="utf-8") as fh:
                rows = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
        except OSError as exc:
            raise FormatError(f"cannot read penalty matrix {path}: {exc}")
        if len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise FormatError(f"penalty matrix file {path} must contain 3 rows of 3 numbers")
        try:
            values = np.array([[float(x) for x in r] for r in rows])
        except ValueError:
            raise FormatError(f"non-numeric entry in penalty matrix file {path}")
        try:
            return cls(values)
        except InputError as exc:
            raise FormatError(f"invalid penalty matrix in {path}: {exc}")

    def weight(self, predicted: int, true: int) -> float:
        return float(self.values[predicted, true])


def _onehot_index(y: Tensor) -> int:
    v = y.values
    if v.ndim != 1:
        raise ContractError(f"labels must be 1-D one-hot vectors, got shape {y.shape}")
    if not np.all((v == 0.0) | (v == 1.0)) or int(v.sum()) != 1:
        raise ContractError(f"label vector {v.tolist()} is not one-hot")
    return int(np.argmax(v))


def cross_entropy(y: Tensor, y_hat: Tensor) -> Tensor:
    """-ln of the predicted probability at the true class, clamped at 1e-12."""
    if y.shape != y_hat.shape:
        raise DimensionError(f"label shape {y.shape} does not match prediction {y_hat.shape}")
    i = _onehot_index(y)
    p = float(y_hat.values[i])
    clamped = max(p, _LOG_CLAMP)

    def back(g):
        gy_hat = np.zeros_like(y_hat.values)
        if p >= _LOG_CLAMP:  # below the clamp the loss is constant in p
            gy_hat[i] = -float(g) / p
        return (gy_hat,)

    return custom_op(-np.log(clamped), (y_hat,), back)


def weighted_cross_entropy(y: Tensor, y_hat: Tensor, penalty: PenaltyMatrix) -> Tensor:
    """Cross-entropy scaled by the penalty entry for (argmax prediction,
    argmax truth); the weight is a constant during backward, and argmax
    ties resolve to the lowest index."""
    predicted = int(np.argmax(y_hat.values))
    true = _onehot_index(y)
    return scale(cross_entropy(y, y_hat), penalty.weight(predicted, true))


def multitask_loss(sentiment_loss: Tensor, rule_loss: Tensor) -> Tensor:
    """Exact unweighted sum of the two task losses."""
    if sentiment_loss.shape != () or rule_loss.shape != ():
        raise ContractError("multitask_loss needs two scalar losses")
    return add(sentiment_loss, rule_loss)


def onehot(index: int, width: int) -> Tensor:
    v = np.zeros(width)
    v[index] = 1.0
    return Tensor(v)

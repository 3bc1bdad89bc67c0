"""Gated recurrent cells and sequence runners (uni- and bidirectional).

The cell follows the bias-free gate formulation: reset and update gates from
sigmoid affine maps, a tanh candidate state, and the convex carry
h_t = (1 - z_t) * h_prev + z_t * h_hat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .tensor import Tensor, add, concat, hadamard, matmul, reshape, row, sigmoid, subtract
from .tensor import take_rows, tanh


@dataclass
class GRUCellParams:
    """Gate matrices: W_* map input to hidden, U_* map hidden to hidden."""

    W_r: Tensor
    U_r: Tensor
    W_z: Tensor
    U_z: Tensor
    W: Tensor
    U: Tensor

    @classmethod
    def create(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "GRUCellParams":
        def mat(rows, cols):
            limit = 1.0 / np.sqrt(cols)
            return Tensor(rng.uniform(-limit, limit, size=(rows, cols)), requires_grad=True)

        return cls(
            W_r=mat(hidden, input_dim),
            U_r=mat(hidden, hidden),
            W_z=mat(hidden, input_dim),
            U_z=mat(hidden, hidden),
            W=mat(hidden, input_dim),
            U=mat(hidden, hidden),
        )

    @property
    def hidden(self) -> int:
        return self.U.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def parameters(self) -> list[Tensor]:
        return [self.W_r, self.U_r, self.W_z, self.U_z, self.W, self.U]


def gru_cell_step(
    x_t: Tensor,
    h_prev: Tensor,
    params: GRUCellParams,
    z_override: Tensor | None = None,
) -> Tensor:
    """One timestep. `z_override` injects a fixed update gate for analysis."""
    if x_t.shape != (params.input_dim,) or h_prev.shape != (params.hidden,):
        raise DimensionError(
            f"gru_cell_step expects input {(params.input_dim,)} and hidden "
            f"{(params.hidden,)}, got {x_t.shape} and {h_prev.shape}"
        )
    r = sigmoid(add(matmul(params.W_r, x_t), matmul(params.U_r, h_prev)))
    if z_override is not None:
        z = z_override
    else:
        z = sigmoid(add(matmul(params.W_z, x_t), matmul(params.U_z, h_prev)))
    h_hat = tanh(add(matmul(params.W, x_t), matmul(params.U, hadamard(r, h_prev))))
    one_minus_z = subtract(Tensor(np.ones(params.hidden)), z)
    return add(hadamard(one_minus_z, h_prev), hadamard(z, h_hat))


def gru_run(
    inputs: Tensor,
    h0: Tensor | None,
    params: GRUCellParams,
) -> tuple[Tensor, Tensor]:
    """Run the cell over the rows of `inputs`; returns (all states, last state)."""
    if inputs.values.ndim != 2:
        raise DimensionError(f"gru_run needs a 2-D input matrix, got shape {inputs.shape}")
    n = inputs.shape[0]
    if n == 0:
        raise InputError("gru_run needs at least one timestep")
    h = h0 if h0 is not None else Tensor(np.zeros(params.hidden))
    rows = []
    for t in range(n):
        h = gru_cell_step(row(inputs, t), h, params)
        rows.append(reshape(h, (1, params.hidden)))
    states = concat(rows, axis=0) if len(rows) > 1 else rows[0]
    return states, h


def bigru_run(inputs: Tensor, fwd_params: GRUCellParams, bwd_params: GRUCellParams) -> Tensor:
    """Forward and reversed runs concatenated per position: row t is
    [forward state at t, backward state at t]."""
    n = inputs.shape[0]
    fwd_states, _ = gru_run(inputs, None, fwd_params)
    flipped = take_rows(inputs, list(range(n - 1, -1, -1)))
    bwd_states_rev, _ = gru_run(flipped, None, bwd_params)
    bwd_states = take_rows(bwd_states_rev, list(range(n - 1, -1, -1)))
    return concat([fwd_states, bwd_states], axis=1)

from typing import NamedTuple

import numpy as np

from kern_core.exceptions.DimensionException import DimensionException
from kern_core.parameter_set import ParameterSet
from kern_core.tensor import Tensor, as_tensor, linear, mul, reshape, sigmoid, tanh

GATE_NAMES = ("z", "r", "h")


class GruStep(NamedTuple):
    h: Tensor
    z: Tensor
    r: Tensor
    h_tilde: Tensor


def add_gru_parameters(params: ParameterSet, prefix: str, input_dim: int, hidden_dim: int,
                       rng: np.random.Generator):
    """Registers W (d x d_in), U (d x d) and a zero bias for each of the z, r, h gates."""
    for gate in GATE_NAMES:
        input_bound = 1.0 / np.sqrt(input_dim)
        hidden_bound = 1.0 / np.sqrt(hidden_dim)
        params.add(f"{prefix}.w_{gate}", rng.uniform(-input_bound, input_bound, size=(hidden_dim, input_dim)))
        params.add(f"{prefix}.u_{gate}", rng.uniform(-hidden_bound, hidden_bound, size=(hidden_dim, hidden_dim)))
        params.add(f"{prefix}.b_{gate}", np.zeros(hidden_dim))


def gru_step(a: Tensor, h_prev: Tensor, params: ParameterSet, prefix: str = "gru") -> GruStep:
    """
    One gated update for a single node (1-D inputs) or a batch of nodes (rows of 2-D inputs):

        z = sigmoid(W_z a + U_z h + b_z)
        r = sigmoid(W_r a + U_r h + b_r)
        h~ = tanh(W_h a + U_h (r * h) + b_h)
        h' = (1 - z) * h + z * h~
    """
    a, h_prev = as_tensor(a), as_tensor(h_prev)

    single = a.ndim == 1
    if single:
        a = reshape(a, (1, a.shape[0]))
        h_prev = reshape(h_prev, (1, h_prev.shape[0]))

    w_z = params[f"{prefix}.w_z"]
    hidden_dim, input_dim = w_z.shape
    if a.ndim != 2 or h_prev.ndim != 2 or a.shape[1] != input_dim or h_prev.shape[1] != hidden_dim \
            or a.shape[0] != h_prev.shape[0]:
        raise DimensionException("gru_cell inputs do not match its weights", a.shape, h_prev.shape, w_z.shape)

    def _bias(gate: str):
        name = f"{prefix}.b_{gate}"
        return params[name] if name in params else None

    z = sigmoid(linear(a, w_z, _bias("z")) + linear(h_prev, params[f"{prefix}.u_z"]))
    r = sigmoid(linear(a, params[f"{prefix}.w_r"], _bias("r")) + linear(h_prev, params[f"{prefix}.u_r"]))
    h_tilde = tanh(linear(a, params[f"{prefix}.w_h"], _bias("h")) + linear(mul(r, h_prev), params[f"{prefix}.u_h"]))
    h = mul(1.0 - z, h_prev) + mul(z, h_tilde)

    if single:
        return GruStep(*(reshape(t, (hidden_dim,)) for t in (h, z, r, h_tilde)))

    return GruStep(h, z, r, h_tilde)


def gru_cell(a: Tensor, h_prev: Tensor, params: ParameterSet, prefix: str = "gru") -> Tensor:
    return gru_step(a, h_prev, params, prefix).h

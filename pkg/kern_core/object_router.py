#!/usr/bin/env python3

"""
Object component: every region is duplicated into one node per category, the
nodes exchange messages weighted by the co-occurrence matrix for a fixed number
of gated steps, and each region is classified from all of its category nodes.
"""

from typing import NamedTuple

import numpy as np

from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.gru_cell import add_gru_parameters, gru_cell
from kern_core.parameter_set import ParameterSet
from kern_core.tensor import Tensor, as_tensor, concat, leave_one_out_sum, linear, matmul, replicate, reshape


class ObjectRouterParams:
    """Typed view over the ``{prefix}.*`` entries of a shared ParameterSet."""

    def __init__(self, params: ParameterSet, num_categories: int, steps: int, prefix: str = "object"):
        self.params = params
        self.prefix = prefix
        self.num_categories = int(num_categories)
        self.steps = int(steps)

        self.validate()

    def _get(self, name: str) -> Tensor:
        return self.params[f"{self.prefix}.{name}"]

    @property
    def init_weight(self) -> Tensor:
        return self._get("init.weight")

    @property
    def init_bias(self) -> Tensor:
        return self._get("init.bias")

    @property
    def output_weight(self) -> Tensor:
        return self._get("output.weight")

    @property
    def output_bias(self) -> Tensor:
        return self._get("output.bias")

    @property
    def classifier_weight(self) -> Tensor:
        return self._get("classifier.weight")

    @property
    def classifier_bias(self) -> Tensor:
        return self._get("classifier.bias")

    @property
    def gru_prefix(self) -> str:
        return f"{self.prefix}.gru"

    @property
    def feature_dim(self) -> int:
        return self.init_weight.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.init_weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.output_weight.shape[0]

    def validate(self):
        if self.steps < 1:
            raise ValidationException("Object router needs at least one propagation step")

        d, d_out, c = self.hidden_dim, self.output_dim, self.num_categories
        expected = {
            "init.bias": (d,),
            "gru.w_z": (d, 2 * d),
            "gru.u_z": (d, d),
            "output.weight": (d_out, 2 * d),
            "output.bias": (d_out,),
            "classifier.weight": (c, c * d_out),
            "classifier.bias": (c,),
        }
        for name, shape in expected.items():
            actual = self._get(name).shape
            if actual != shape:
                raise DimensionException(f"Parameter '{self.prefix}.{name}' is inconsistent", actual, shape)

    @staticmethod
    def create(params: ParameterSet, num_categories: int, feature_dim: int, hidden_dim: int, output_dim: int,
               steps: int, rng: np.random.Generator, prefix: str = "object") -> "ObjectRouterParams":
        params.add_linear(f"{prefix}.init", hidden_dim, feature_dim, rng)
        add_gru_parameters(params, f"{prefix}.gru", 2 * hidden_dim, hidden_dim, rng)
        params.add_linear(f"{prefix}.output", output_dim, 2 * hidden_dim, rng)
        params.add_linear(f"{prefix}.classifier", num_categories, num_categories * output_dim, rng)

        return ObjectRouterParams(params, num_categories, steps, prefix)


class ObjectRouterOutput(NamedTuple):
    h0: Tensor
    hT: Tensor
    logits: Tensor


def init_object_hidden(features, params: ObjectRouterParams) -> Tensor:
    """n x d_f region features to n x C x d initial node states, one copy per category."""
    features = as_tensor(features)
    if features.ndim != 2 or features.shape[1] != params.feature_dim:
        raise DimensionException("region features do not match the object router", features.shape,
                                 (features.shape[0] if features.ndim else 0, params.feature_dim))

    projected = linear(features, params.init_weight, params.init_bias)
    return replicate(projected, params.num_categories, axis=1)


def aggregate_object_messages(h: Tensor, cooccurrence: np.ndarray) -> Tensor:
    """
    For node (i, c): the in-edge sum over c' of M[c', c] h[j, c'] concatenated with the
    out-edge sum over c' of M[c, c'] h[j, c'], both summed over every other region j.
    """
    h = as_tensor(h)
    cooccurrence = np.asarray(cooccurrence, dtype=np.float64)
    if h.ndim != 3 or cooccurrence.shape != (h.shape[1], h.shape[1]):
        raise DimensionException("node states do not match the co-occurrence matrix", h.shape, cooccurrence.shape)

    n, c, _ = h.shape
    others = leave_one_out_sum(h)

    incoming = matmul(Tensor(np.broadcast_to(cooccurrence.T, (n, c, c))), others)
    outgoing = matmul(Tensor(np.broadcast_to(cooccurrence, (n, c, c))), others)

    return concat([incoming, outgoing], axis=2)


def propagate_objects(h0: Tensor, cooccurrence: np.ndarray, params: ObjectRouterParams) -> Tensor:
    h = as_tensor(h0)
    n, c, d = h.shape

    for _ in range(params.steps):
        messages = aggregate_object_messages(h, cooccurrence)
        h = reshape(gru_cell(reshape(messages, (n * c, 2 * d)), reshape(h, (n * c, d)),
                             params.params, params.gru_prefix), (n, c, d))

    return h


def classify_objects(h0: Tensor, hT: Tensor, params: ObjectRouterParams) -> Tensor:
    h0, hT = as_tensor(h0), as_tensor(hT)
    if h0.shape != hT.shape or h0.ndim != 3:
        raise DimensionException("initial and final node states disagree", h0.shape, hT.shape)

    n, c, d = h0.shape
    node_outputs = linear(reshape(concat([h0, hT], axis=2), (n * c, 2 * d)), params.output_weight, params.output_bias)
    per_region = reshape(node_outputs, (n, c * params.output_dim))

    return linear(per_region, params.classifier_weight, params.classifier_bias)


def route_objects(features, cooccurrence: np.ndarray, params: ObjectRouterParams) -> ObjectRouterOutput:
    h0 = init_object_hidden(features, params)
    hT = propagate_objects(h0, cooccurrence, params)

    return ObjectRouterOutput(h0, hT, classify_objects(h0, hT, params))


def predict_labels(logits: Tensor) -> np.ndarray:
    # np.argmax resolves ties to the lowest index
    return np.argmax(as_tensor(logits).data, axis=1)

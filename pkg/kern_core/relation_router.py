#!/usr/bin/env python3

"""
Relationship component: for each ordered (subject, object) pair a bipartite
graph of two object nodes and K predicate nodes is built, its edges weighted by
the prior fiber of the pair's category labels. After a fixed number of gated
steps the predicate is classified from all 2 + K node outputs.
"""

from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from loguru import logger

from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.predicted_graph import PairPrediction, PredictedGraph
from kern_core.domain.task import Task
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.gru_cell import add_gru_parameters, gru_cell
from kern_core.object_router import ObjectRouterParams, predict_labels, route_objects
from kern_core.parameter_set import ParameterSet
from kern_core.tensor import Tensor, as_tensor, concat, linear, matmul, replicate, reshape, softmax
from kern_core.utils.box_utils import box_geometry, box_iou

SPATIAL_FEATURE_DIM = 9


class PairInput(NamedTuple):
    subj_feature: np.ndarray
    obj_feature: np.ndarray
    union_feature: np.ndarray
    subj_label: int
    obj_label: int


class RelationRouterParams:
    def __init__(self, params: ParameterSet, num_predicates: int, steps: int, prefix: str = "relation"):
        self.params = params
        self.prefix = prefix
        self.num_predicates = int(num_predicates)
        self.steps = int(steps)

        self.validate()

    def _get(self, name: str) -> Tensor:
        return self.params[f"{self.prefix}.{name}"]

    @property
    def object_init_weight(self) -> Tensor:
        return self._get("object_init.weight")

    @property
    def object_init_bias(self) -> Tensor:
        return self._get("object_init.bias")

    @property
    def union_init_weight(self) -> Tensor:
        return self._get("union_init.weight")

    @property
    def union_init_bias(self) -> Tensor:
        return self._get("union_init.bias")

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
        return self.object_init_weight.shape[1]

    @property
    def union_dim(self) -> int:
        return self.union_init_weight.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.object_init_weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.output_weight.shape[0]

    @property
    def num_nodes(self) -> int:
        return 2 + self.num_predicates

    def validate(self):
        if self.steps < 1:
            raise ValidationException("Relation router needs at least one propagation step")

        d, d_out, k = self.hidden_dim, self.output_dim, self.num_predicates
        expected = {
            "object_init.bias": (d,),
            "union_init.weight": (d, self.feature_dim + SPATIAL_FEATURE_DIM),
            "union_init.bias": (d,),
            "gru.w_z": (d, d),
            "gru.u_z": (d, d),
            "output.weight": (d_out, 2 * d),
            "output.bias": (d_out,),
            "classifier.weight": (k, (k + 2) * d_out),
            "classifier.bias": (k,),
        }
        for name, shape in expected.items():
            actual = self._get(name).shape
            if actual != shape:
                raise DimensionException(f"Parameter '{self.prefix}.{name}' is inconsistent", actual, shape)

    @staticmethod
    def create(params: ParameterSet, num_predicates: int, feature_dim: int, hidden_dim: int, output_dim: int,
               steps: int, rng: np.random.Generator, prefix: str = "relation") -> "RelationRouterParams":
        params.add_linear(f"{prefix}.object_init", hidden_dim, feature_dim, rng)
        params.add_linear(f"{prefix}.union_init", hidden_dim, feature_dim + SPATIAL_FEATURE_DIM, rng)
        add_gru_parameters(params, f"{prefix}.gru", hidden_dim, hidden_dim, rng)
        params.add_linear(f"{prefix}.output", output_dim, 2 * hidden_dim, rng)
        params.add_linear(f"{prefix}.classifier", num_predicates, (num_predicates + 2) * output_dim, rng)

        return RelationRouterParams(params, num_predicates, steps, prefix)


class PairBatch(NamedTuple):
    """Row-aligned arrays for P ordered pairs."""
    subj_features: np.ndarray
    obj_features: np.ndarray
    union_features: np.ndarray
    subj_labels: np.ndarray
    obj_labels: np.ndarray

    @property
    def size(self) -> int:
        return self.subj_labels.shape[0]

    @staticmethod
    def from_pairs(pairs: Sequence[PairInput]) -> "PairBatch":
        return PairBatch(
            np.stack([p.subj_feature for p in pairs]),
            np.stack([p.obj_feature for p in pairs]),
            np.stack([p.union_feature for p in pairs]),
            np.array([p.subj_label for p in pairs], dtype=np.int64),
            np.array([p.obj_label for p in pairs], dtype=np.int64))


def encode_union(subj_box: Sequence[float], obj_box: Sequence[float], subj_feature: np.ndarray,
                 obj_feature: np.ndarray, image_width: float, image_height: float) -> np.ndarray:
    """
    Mean of the two region features followed by the normalized centre and size of
    both boxes and their IoU: d_f + 9 values.
    """
    subj_feature = np.asarray(subj_feature, dtype=np.float64)
    obj_feature = np.asarray(obj_feature, dtype=np.float64)
    if subj_feature.shape != obj_feature.shape:
        raise DimensionException("subject and object features differ", subj_feature.shape, obj_feature.shape)

    return np.concatenate([
        (subj_feature + obj_feature) / 2.0,
        box_geometry(subj_box, image_width, image_height),
        box_geometry(obj_box, image_width, image_height),
        [box_iou(subj_box, obj_box)],
    ])


def build_pair_batch(image: AnnotatedImage, features: np.ndarray, labels: np.ndarray,
                     subj_indices: Sequence[int], obj_indices: Sequence[int]) -> PairBatch:
    boxes = image.boxes()
    unions = [encode_union(boxes[i], boxes[j], features[i], features[j], image.width, image.height)
              for i, j in zip(subj_indices, obj_indices)]
    subj_indices = np.asarray(subj_indices, dtype=np.int64)
    obj_indices = np.asarray(obj_indices, dtype=np.int64)

    return PairBatch(features[subj_indices], features[obj_indices],
                     np.stack(unions) if unions else np.zeros((0, features.shape[1] + SPATIAL_FEATURE_DIM)),
                     np.asarray(labels, dtype=np.int64)[subj_indices],
                     np.asarray(labels, dtype=np.int64)[obj_indices])


def _as_batch(pairs: Union[PairInput, PairBatch, Sequence[PairInput]]) -> PairBatch:
    if isinstance(pairs, PairBatch):
        return pairs
    if isinstance(pairs, PairInput):
        return PairBatch.from_pairs([pairs])
    return PairBatch.from_pairs(pairs)


def init_pair_hidden(pairs: Union[PairInput, PairBatch, Sequence[PairInput]], params: RelationRouterParams) -> Tensor:
    """
    Node states at step 0, ordered [subject, object, predicate 0 .. K-1]. A single
    PairInput gives (2 + K) x d, a batch of P pairs gives P x (2 + K) x d.
    """
    single = isinstance(pairs, PairInput)
    batch = _as_batch(pairs)

    d_f, d_u = params.feature_dim, params.union_dim
    if batch.subj_features.shape[1:] != (d_f,) or batch.obj_features.shape[1:] != (d_f,):
        raise DimensionException("pair features do not match the relation router",
                                 batch.subj_features.shape, (batch.size, d_f))
    if batch.union_features.shape[1:] != (d_u,):
        raise DimensionException("union features do not match the relation router",
                                 batch.union_features.shape, (batch.size, d_u))

    p, d = batch.size, params.hidden_dim
    subj = linear(Tensor(batch.subj_features), params.object_init_weight, params.object_init_bias)
    obj = linear(Tensor(batch.obj_features), params.object_init_weight, params.object_init_bias)
    union = linear(Tensor(batch.union_features), params.union_init_weight, params.union_init_bias)

    h0 = concat([reshape(subj, (p, 1, d)), reshape(obj, (p, 1, d)),
                 replicate(union, params.num_predicates, axis=1)], axis=1)

    return reshape(h0, (2 + params.num_predicates, d)) if single else h0


def pair_adjacency(fibers: np.ndarray) -> np.ndarray:
    """P x (2 + K) x (2 + K) edge weights: both object nodes link to predicate node k with weight fiber[k]."""
    fibers = np.asarray(fibers, dtype=np.float64)
    p, k = fibers.shape
    adjacency = np.zeros((p, k + 2, k + 2))
    adjacency[:, 0, 2:] = fibers
    adjacency[:, 1, 2:] = fibers
    adjacency[:, 2:, 0] = fibers
    adjacency[:, 2:, 1] = fibers

    return adjacency


def aggregate_pair_messages(h: Tensor, fibers: np.ndarray) -> Tensor:
    h = as_tensor(h)
    fibers = np.asarray(fibers, dtype=np.float64)

    single = h.ndim == 2
    if single:
        h = reshape(h, (1,) + h.shape)
        fibers = fibers.reshape(1, -1)

    if h.ndim != 3 or fibers.ndim != 2 or fibers.shape != (h.shape[0], h.shape[1] - 2):
        raise DimensionException("prior fiber does not match the pair graph", fibers.shape, h.shape)

    messages = matmul(Tensor(pair_adjacency(fibers)), h)

    return reshape(messages, messages.shape[1:]) if single else messages


def propagate_pair(h0: Tensor, fibers: np.ndarray, params: RelationRouterParams) -> Tensor:
    h = as_tensor(h0)
    shape = h.shape
    rows, d = int(np.prod(shape[:-1])), shape[-1]

    for _ in range(params.steps):
        messages = aggregate_pair_messages(h, fibers)
        h = reshape(gru_cell(reshape(messages, (rows, d)), reshape(h, (rows, d)),
                             params.params, params.gru_prefix), shape)

    return h


def classify_relation(h0: Tensor, hT: Tensor, params: RelationRouterParams) -> Tensor:
    """Logits over K predicates, index 0 being no-relationship."""
    h0, hT = as_tensor(h0), as_tensor(hT)
    if h0.shape != hT.shape:
        raise DimensionException("initial and final pair states disagree", h0.shape, hT.shape)

    single = h0.ndim == 2
    if single:
        h0 = reshape(h0, (1,) + h0.shape)
        hT = reshape(hT, (1,) + hT.shape)

    p, nodes, d = h0.shape
    node_outputs = linear(reshape(concat([hT, h0], axis=2), (p * nodes, 2 * d)),
                          params.output_weight, params.output_bias)
    logits = linear(reshape(node_outputs, (p, nodes * params.output_dim)),
                    params.classifier_weight, params.classifier_bias)

    return reshape(logits, (params.num_predicates,)) if single else logits


def route_pairs(pairs: Union[PairInput, PairBatch, Sequence[PairInput]], fibers: np.ndarray,
                params: RelationRouterParams) -> Tensor:
    h0 = init_pair_hidden(pairs, params)
    hT = propagate_pair(h0, fibers, params)

    return classify_relation(h0, hT, params)


def _ordered_pairs(n: int):
    subj, obj = np.nonzero(~np.eye(n, dtype=bool))
    return subj, obj


def predict_graph(image: AnnotatedImage, kb: KnowledgeBase, obj_params: ObjectRouterParams,
                  rel_params: RelationRouterParams, task: Task, max_regions: Optional[int] = None,
                  pair_batch_size: int = 256) -> PredictedGraph:
    """
    Object distributions per region and predicate distributions for every ordered
    pair. PredCls uses the ground-truth labels (one-hot objects); SGCls labels the
    regions with the object router first and indexes the prior with its argmax.
    """
    if max_regions is not None and image.num_regions > max_regions:
        logger.warning(f"Image '{image.image_id}' has {image.num_regions} regions, keeping the first {max_regions}")
        image = image.truncated(max_regions)

    n, c = image.num_regions, kb.num_categories
    if n == 0:
        return PredictedGraph(image.image_id, np.zeros((0, c)), [])

    features = image.features()

    if task == Task.PredCls:
        labels = image.labels()
        object_probs = np.zeros((n, c))
        object_probs[np.arange(n), labels] = 1.0
    else:
        routed = route_objects(features, kb.cooccurrence, obj_params)
        object_probs = softmax(routed.logits, axis=1).data
        labels = predict_labels(routed.logits)

    pairs: List[PairPrediction] = []
    subj_indices, obj_indices = _ordered_pairs(n)
    for start in range(0, subj_indices.size, pair_batch_size):
        subj_chunk = subj_indices[start:start + pair_batch_size]
        obj_chunk = obj_indices[start:start + pair_batch_size]

        batch = build_pair_batch(image, features, labels, subj_chunk, obj_chunk)
        logits = route_pairs(batch, kb.fibers(batch.subj_labels, batch.obj_labels), rel_params)
        probs = softmax(logits, axis=1).data

        pairs.extend(PairPrediction(i, j, row) for i, j, row in zip(subj_chunk, obj_chunk, probs))

    return PredictedGraph(image.image_id, object_probs, pairs)

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from kern_core.configuration.config import Config
from kern_core.domain.annotated_image import AnnotatedImage, Region, RelationAnnotation
from kern_core.domain.dataset_schema import NO_RELATIONSHIP, DatasetSchema
from kern_core.parameter_set import ParameterSet

CATEGORIES = ["person", "dog", "horse", "cat"]
PREDICATES = [NO_RELATIONSHIP, "ride", "on"]

PERSON, DOG, HORSE, CAT = range(4)
NOREL, RIDE, ON = range(3)


def make_schema() -> DatasetSchema:
    return DatasetSchema(CATEGORIES, PREDICATES)


def create_config() -> Config:
    """Tiny model and synthetic dataset settings for training-level tests."""
    config = Config()
    config.model.update({"hidden_dim": 4, "output_dim": 3, "object_steps": 2, "relation_steps": 2})
    config.train.update({"epochs": 2, "batch_size": 2, "learning_rate": 1e-2})
    config.eval.update({"ks": [5, 50]})
    config.synth.update({"num_categories": 3, "num_predicates": 3, "feature_dim": 4, "num_images": 10,
                         "min_objects": 2, "max_objects": 3, "annotated_pair_fraction": 0.5,
                         "split_fractions": [0.6, 0.2, 0.2]})
    return config


def make_image(image_id: str, labels: Sequence[int], triplets: Sequence[Tuple[int, int, int]] = (),
               features: Optional[np.ndarray] = None, width: float = 20.0, height: float = 20.0) -> AnnotatedImage:
    """Regions get distinct boxes [i, i, i + 2, i + 3] inside the image."""
    regions = []
    for index, label in enumerate(labels):
        box = (float(index), float(index), float(index) + 2.0, float(index) + 3.0)
        regions.append(Region(box, label, None if features is None else features[index]))

    return AnnotatedImage(image_id, width, height, regions,
                          [RelationAnnotation(s, o, p) for s, o, p in triplets])


def zero_gru(params: ParameterSet, prefix: str):
    for gate in ("z", "r", "h"):
        for kind in ("w", "u", "b"):
            tensor = params[f"{prefix}.{kind}_{gate}"]
            tensor.data = np.zeros_like(tensor.data)


def scalar_sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def gru_oracle(a: np.ndarray, h: np.ndarray, arrays: dict, prefix: str) -> np.ndarray:
    """Straight-line loop version of one gated update for a single node."""
    def _gate(name: str, x: np.ndarray, state: np.ndarray, i: int) -> float:
        w, u, b = arrays[f"{prefix}.w_{name}"], arrays[f"{prefix}.u_{name}"], arrays[f"{prefix}.b_{name}"]
        total = b[i]
        for j in range(x.shape[0]):
            total += w[i, j] * x[j]
        for j in range(state.shape[0]):
            total += u[i, j] * state[j]
        return total

    d = h.shape[0]
    r = np.array([scalar_sigmoid(_gate("r", a, h, i)) for i in range(d)])
    z = np.array([scalar_sigmoid(_gate("z", a, h, i)) for i in range(d)])
    h_tilde = np.array([math.tanh(_gate("h", a, r * h, i)) for i in range(d)])

    return np.array([(1.0 - z[i]) * h[i] + z[i] * h_tilde[i] for i in range(d)])


def numeric_gradient(loss_of, array: np.ndarray, epsilon: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_of()`` with respect to ``array``, which is perturbed in place."""
    gradient = np.zeros_like(array)
    for index in np.ndindex(*array.shape):
        original = array[index]
        array[index] = original + epsilon
        plus = loss_of()
        array[index] = original - epsilon
        minus = loss_of()
        array[index] = original
        gradient[index] = (plus - minus) / (2 * epsilon)

    return gradient


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    # absolute floor for parameters with vanishing gradients
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-4)
    return float(np.linalg.norm(a - b) / scale)

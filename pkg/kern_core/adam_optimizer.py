from typing import Dict, Mapping, Optional

import numpy as np

from kern_core.configuration.train_config import TrainConfig
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.NumericalException import NumericalException
from kern_core.parameter_set import ParameterSet


class OptimizerState:
    """First and second moment estimates per parameter, plus the number of steps taken."""

    def __init__(self, params: ParameterSet):
        self.step = 0
        self.first_moment: Dict[str, np.ndarray] = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.second_moment: Dict[str, np.ndarray] = {name: np.zeros_like(t.data) for name, t in params.items()}


def adam_step(params: ParameterSet, grads: Mapping[str, np.ndarray], state: OptimizerState, config: TrainConfig,
              learning_rate: Optional[float] = None) -> OptimizerState:
    """
    One bias-corrected Adam update, in place. ``learning_rate`` overrides the
    configured rate (the trainer passes its decayed value).
    """
    lr = config.learning_rate if learning_rate is None else learning_rate
    beta1, beta2, epsilon = config.beta1, config.beta2, config.epsilon

    # Validate every gradient before touching any parameter
    for name, tensor in params.items():
        grad = grads[name]
        if grad.shape != tensor.shape:
            raise DimensionException(f"Gradient of '{name}' has the wrong shape", grad.shape, tensor.shape)
        if not np.all(np.isfinite(grad)):
            raise NumericalException(f"Non-finite gradient for parameter '{name}'")

    state.step += 1
    first_correction = 1.0 - beta1 ** state.step
    second_correction = 1.0 - beta2 ** state.step

    for name, tensor in params.items():
        grad = grads[name]
        m = state.first_moment[name] = beta1 * state.first_moment[name] + (1.0 - beta1) * grad
        v = state.second_moment[name] = beta2 * state.second_moment[name] + (1.0 - beta2) * grad * grad

        tensor.data = tensor.data - lr * (m / first_correction) / (np.sqrt(v / second_correction) + epsilon)

    return state

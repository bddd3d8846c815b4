from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from kern_core.exceptions.ContractException import ContractException
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.tensor import Tensor


class ParameterSet:
    """Named trainable tensors, always iterated in sorted name order."""

    def __init__(self):
        self._parameters: Dict[str, Tensor] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._parameters

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._parameters[name]
        except KeyError:
            raise ContractException(f"Unknown parameter '{name}'")

    def __len__(self) -> int:
        return len(self._parameters)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names())

    def names(self) -> List[str]:
        return sorted(self._parameters)

    def items(self) -> List[Tuple[str, Tensor]]:
        return [(name, self._parameters[name]) for name in self.names()]

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._parameters:
            raise ContractException(f"Parameter '{name}' already exists")

        tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._parameters[name] = tensor

        return tensor

    def add_linear(self, prefix: str, out_dim: int, in_dim: int, rng: np.random.Generator, bias: bool = True):
        """Weight ``out x in`` uniform in [-1/sqrt(in), 1/sqrt(in)], zero bias."""
        bound = 1.0 / np.sqrt(in_dim)
        self.add(f"{prefix}.weight", rng.uniform(-bound, bound, size=(out_dim, in_dim)))
        if bias:
            self.add(f"{prefix}.bias", np.zeros(out_dim))

    def zero_grad(self):
        for _, tensor in self.items():
            tensor.zero_grad()

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: tensor.grad for name, tensor in self.items()}

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray], strict: bool = True):
        if strict:
            missing = sorted(set(self._parameters) - set(arrays))
            unexpected = sorted(set(arrays) - set(self._parameters))
            if missing or unexpected:
                raise ContractException(f"Parameter names disagree: missing {missing}, unexpected {unexpected}")

        for name, value in arrays.items():
            if name not in self._parameters:
                continue
            target = self._parameters[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != target.shape:
                raise DimensionException(f"Parameter '{name}' has the wrong shape", target.shape, value.shape)
            target.data = value.copy()
            target.zero_grad()

    @staticmethod
    def from_arrays(arrays: Mapping[str, np.ndarray]) -> "ParameterSet":
        parameters = ParameterSet()
        for name in sorted(arrays):
            parameters.add(name, arrays[name])

        return parameters

    def copy(self) -> "ParameterSet":
        return ParameterSet.from_arrays(self.to_arrays())

    def total_size(self, prefix: Optional[str] = None) -> int:
        return sum(t.data.size for name, t in self.items() if prefix is None or name.startswith(prefix))

import hashlib
from collections import OrderedDict
from typing import Iterable, Iterator, List, Optional

import numpy as np

from ..core.errors import DuplicateParameterError
from .tensor import Tensor


class Parameter:
    """
    Named model weight.

    ``trainable`` drives ``tensor.requires_grad``: frozen parameters take no
    gradient and are never touched by the optimizer.
    """

    __slots__ = ("name", "tensor", "_trainable")

    def __init__(self, name: str, tensor: Tensor, trainable: bool = True):
        self.name = name
        self.tensor = tensor
        self._trainable = False
        self.trainable = trainable

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.shape}, trainable={self.trainable})"

    @property
    def trainable(self) -> bool:
        return self._trainable

    @trainable.setter
    def trainable(self, value: bool) -> None:
        self._trainable = bool(value)
        self.tensor.requires_grad = self._trainable
        if not self._trainable:
            self.tensor.grad = None

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def size(self) -> int:
        return self.tensor.size

    def digest(self) -> str:
        """SHA-256 over name, dtype, shape and raw bytes"""
        h = hashlib.sha256()
        h.update(self.name.encode("utf-8"))
        h.update(self.tensor.dtype_name.encode("ascii"))
        h.update(repr(self.tensor.shape).encode("ascii"))
        h.update(np.ascontiguousarray(self.tensor.data).tobytes())
        return h.hexdigest()


class ParameterStore:
    """Ordered name -> Parameter map with unique names"""

    def __init__(self, parameters: Optional[Iterable[Parameter]] = None):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        for param in parameters or ():
            self.add(param)

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._params:
            raise DuplicateParameterError(f"Duplicate parameter name: {param.name}")
        self._params[param.name] = param
        return param

    def new(self, name: str, data: np.ndarray, trainable: bool = True) -> Parameter:
        return self.add(Parameter(name, Tensor(data, requires_grad=trainable), trainable))

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def trainable(self) -> List[Parameter]:
        return [p for p in self._params.values() if p.trainable]

    def frozen(self) -> List[Parameter]:
        return [p for p in self._params.values() if not p.trainable]

    def set_trainable(self, trainable: bool) -> None:
        for param in self._params.values():
            param.trainable = trainable

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.tensor.grad = None

    def total_size(self) -> int:
        return int(sum(p.size for p in self._params.values()))


def count_trainable(parameters: Iterable[Parameter]) -> int:
    return int(sum(p.size for p in parameters if p.trainable))

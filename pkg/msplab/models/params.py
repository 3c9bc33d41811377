from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Tuple

import numpy as np

from msplab.schemas.model import ModelConfig


@dataclass(frozen=True)
class TensorSet:
    """One float64 tensor per model parameter, in checkpoint order."""

    config: ModelConfig
    embedding: np.ndarray
    W_in: np.ndarray
    hidden: Tuple[np.ndarray, ...]
    W_out: np.ndarray

    def prunable(self) -> List[np.ndarray]:
        """Prunable matrices in forward order: W_in, hidden.*, W_out."""
        return [self.W_in, *self.hidden, self.W_out]

    def tensors(self) -> Dict[str, np.ndarray]:
        named = {"embedding": self.embedding, "W_in": self.W_in}
        for b, matrix in enumerate(self.hidden):
            named[f"hidden.{b}"] = matrix
        named["W_out"] = self.W_out
        return named

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.tensors().items())

    def with_prunable(self, matrices: List[np.ndarray]) -> "TensorSet":
        if len(matrices) != len(self.hidden) + 2:
            raise ValueError("prunable matrix count mismatch")
        return replace(self, W_in=matrices[0], hidden=tuple(matrices[1:-1]), W_out=matrices[-1])

    def with_tensor(self, name: str, value: np.ndarray) -> "TensorSet":
        if name == "embedding":
            return replace(self, embedding=value)
        if name == "W_in":
            return replace(self, W_in=value)
        if name == "W_out":
            return replace(self, W_out=value)
        if name.startswith("hidden."):
            index = int(name.split(".", 1)[1])
            hidden = list(self.hidden)
            hidden[index] = value
            return replace(self, hidden=tuple(hidden))
        raise KeyError(name)

    @property
    def num_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors().values()))

    def equals(self, other: "TensorSet") -> bool:
        """Bitwise equality of every tensor and the config."""
        if self.config != other.config:
            return False
        mine, theirs = self.tensors(), other.tensors()
        return mine.keys() == theirs.keys() and all(
            mine[k].shape == theirs[k].shape and mine[k].tobytes() == theirs[k].tobytes()
            for k in mine
        )


@dataclass(frozen=True)
class ModelParams(TensorSet):
    """Parameters theta of the language model. Never mutated in place."""


@dataclass(frozen=True)
class GradientSet(TensorSet):
    """Gradient of the loss with respect to every ModelParams tensor."""

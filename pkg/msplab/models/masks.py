from dataclasses import dataclass
from typing import List, Tuple

import numpy as np


@dataclass(frozen=True)
class NmMaskSet:
    """Per-layer boolean keep matrices honouring groups of M along each row.

    n[l] counts PRUNED entries per group (75% sparsity at M=4 is n=3).
    """

    keep: Tuple[np.ndarray, ...]
    n: Tuple[int, ...]
    group_size: int
    layer_names: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.keep)

    @classmethod
    def identity(cls, shapes: List[Tuple[int, int]], group_size: int, layer_names: List[str]) -> "NmMaskSet":
        return cls(
            keep=tuple(np.ones(shape, dtype=bool) for shape in shapes),
            n=(0,) * len(shapes),
            group_size=group_size,
            layer_names=tuple(layer_names),
        )

    def to_json(self) -> dict:
        return {
            name: {"n": int(n), "M": self.group_size, "keep": keep.astype(np.uint8).tolist()}
            for name, n, keep in zip(self.layer_names, self.n, self.keep)
        }

from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from msplab.core.errors import InputError
from msplab.schemas.model import VOCAB_SIZE

TokenSource = Union[bytes, bytearray, Sequence[int], np.ndarray]


def as_tokens(data: TokenSource) -> np.ndarray:
    """Byte sequence -> int64 token array."""
    if isinstance(data, (bytes, bytearray)):
        return np.frombuffer(bytes(data), dtype=np.uint8).astype(np.int64)
    return np.asarray(data, dtype=np.int64).reshape(-1)


@dataclass(frozen=True)
class TokenWindowBatch:
    """k-token contexts with their next-token targets."""

    contexts: np.ndarray  # (B, k) int64
    targets: np.ndarray  # (B,) int64

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def check(self, window: int) -> None:
        """Raise InputError unless the batch is usable by a model with context k."""
        if self.contexts.ndim != 2 or self.targets.ndim != 1:
            raise InputError("contexts must be (B, k) and targets (B,)")
        if len(self) == 0:
            raise InputError("batch is empty")
        if self.contexts.shape[0] != self.targets.shape[0]:
            raise InputError("contexts and targets differ in length")
        if self.contexts.shape[1] != window:
            raise InputError(f"context length {self.contexts.shape[1]} != model window {window}")
        for name, ids in (("context", self.contexts), ("target", self.targets)):
            if ids.size and (ids.min() < 0 or ids.max() >= VOCAB_SIZE):
                raise InputError(f"{name} token id out of range [0, {VOCAB_SIZE - 1}]")

    @classmethod
    def from_windows(cls, contexts: Sequence[Sequence[int]], targets: Sequence[int]) -> "TokenWindowBatch":
        ctx = np.asarray(contexts, dtype=np.int64)
        if ctx.ndim == 1:
            ctx = ctx.reshape(1, -1)
        return cls(contexts=ctx, targets=np.asarray(targets, dtype=np.int64).reshape(-1))

    @classmethod
    def from_tokens(cls, data: TokenSource, window: int) -> "TokenWindowBatch":
        """All windows of a token stream, in order: tokens[i:i+k] -> tokens[i+k]."""
        tokens = as_tokens(data)
        if tokens.shape[0] <= window:
            raise InputError(f"sequence of length {tokens.shape[0]} too short for window {window}")
        count = tokens.shape[0] - window
        index = np.arange(count)[:, None] + np.arange(window)[None, :]
        return cls(contexts=tokens[index], targets=tokens[window:].copy())

    def slice(self, start: int, stop: int) -> "TokenWindowBatch":
        return TokenWindowBatch(self.contexts[start:stop], self.targets[start:stop])

    def repeat(self, times: int) -> "TokenWindowBatch":
        return TokenWindowBatch(np.tile(self.contexts, (times, 1)), np.tile(self.targets, times))

    def split(self) -> List["TokenWindowBatch"]:
        """One single-sample batch per window."""
        return [self.slice(i, i + 1) for i in range(len(self))]

    @staticmethod
    def concat(batches: Sequence["TokenWindowBatch"]) -> "TokenWindowBatch":
        return TokenWindowBatch(
            np.concatenate([b.contexts for b in batches], axis=0),
            np.concatenate([b.targets for b in batches], axis=0),
        )


@dataclass(frozen=True)
class CalibrationSet:
    """Per-sample calibration windows (every batch has size 1)."""

    samples: tuple

    def __len__(self) -> int:
        return len(self.samples)

    def require(self) -> None:
        if not self.samples:
            raise InputError("calibration set is empty")
        for sample in self.samples:
            if len(sample) != 1:
                raise InputError("calibration samples must be single windows")

    def as_batch(self) -> TokenWindowBatch:
        """All samples stacked in order; row n is sample n."""
        self.require()
        return TokenWindowBatch.concat(self.samples)

    def duplicated(self, times: int = 2) -> "CalibrationSet":
        return CalibrationSet(tuple(self.samples) * times)

    @classmethod
    def from_batch(cls, batch: TokenWindowBatch) -> "CalibrationSet":
        return cls(tuple(batch.split()))

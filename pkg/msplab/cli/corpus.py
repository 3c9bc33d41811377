"""
Target parsing and contiguous corpus splits.
"""

import math
import re
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from msplab.core.errors import InputError, UsageError
from msplab.models import CalibrationSet, TokenWindowBatch, as_tokens

_TARGET = re.compile(r"^\s*(\d+)\s*:\s*(\d+)\s*$")

DEFAULT_CALIB_SIZE = 128


def parse_target(text: str) -> Tuple[int, int]:
    """'N:M' -> (N, M) with N weights PRUNED of every M ('3:4' is 75% sparsity)."""
    match = _TARGET.match(text or "")
    if match is None:
        raise UsageError(f"target '{text}' is not of the form N:M")
    n, m = int(match.group(1)), int(match.group(2))
    if m < 2:
        raise UsageError(f"target '{text}': M must be at least 2")
    if n > m:
        raise UsageError(f"target '{text}': N must not exceed M")
    return n, m


@dataclass(frozen=True)
class CorpusSplits:
    train: bytes
    calib: bytes
    eval: bytes
    calibration: CalibrationSet


def split_corpus(
    data: bytes,
    fractions: Sequence[float],
    seed: int,
    window: int,
    calib_size: int = DEFAULT_CALIB_SIZE,
) -> CorpusSplits:
    """Contiguous train / calib / eval byte ranges, plus calib_size seeded single-window samples.

    Splits are never shuffled across each other; only the calibration window
    offsets inside the calib range are drawn from the seed.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or sum(fractions) > 1 + 1e-12:
        raise UsageError("split fractions must be three positive numbers summing to at most 1")
    if calib_size < 1:
        raise UsageError("calibration size must be at least 1")

    total = len(data)
    sizes = [math.floor(total * f + 1e-9) for f in fractions]
    bounds = np.cumsum([0, *sizes])
    train, calib, held_out = (bytes(data[bounds[i]:bounds[i + 1]]) for i in range(3))
    for name, part, minimum in (("train", train, window + 2), ("calib", calib, window + 1), ("eval", held_out, window + 1)):
        if len(part) < minimum:
            raise InputError(f"corpus too short: {name} split has {len(part)} bytes, needs at least {minimum}")

    windows = TokenWindowBatch.from_tokens(as_tokens(calib), window)
    rng = np.random.default_rng(seed)
    available = len(windows)
    picks = np.sort(rng.choice(available, size=calib_size, replace=calib_size > available))
    samples = tuple(windows.slice(int(i), int(i) + 1) for i in picks)
    return CorpusSplits(train=train, calib=calib, eval=held_out, calibration=CalibrationSet(samples))

"""
Checkpoint persistence.

Format: {"config": {...}, "tensors": {"embedding": {"shape": [r, c], "data": [...]}, ...}}
with row-major float64 data. Python's float repr round-trips, so load(save(m)) is bit-exact.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
from pydantic import ValidationError

from msplab.core.errors import ConfigurationError, InputError, MalformedFileError
from msplab.core.storage import read_json, write_json
from msplab.models import ModelParams
from msplab.schemas.model import VOCAB_SIZE, ModelConfig

logger = logging.getLogger(__name__)


def expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, int]]:
    h, d = config.hidden_dim, config.embed_dim
    shapes = {"embedding": (VOCAB_SIZE, d), "W_in": (h, config.input_dim)}
    for b in range(config.num_hidden_blocks):
        shapes[f"hidden.{b}"] = (h, h)
    shapes["W_out"] = (VOCAB_SIZE, h)
    return shapes


def checkpoint_document(params: ModelParams) -> Dict[str, Any]:
    return {
        "config": params.config.model_dump(),
        "tensors": {
            name: {"shape": list(tensor.shape), "data": tensor.reshape(-1).tolist()}
            for name, tensor in params.items()
        },
    }


def save_checkpoint(params: ModelParams, config: ModelConfig, path: Union[str, Path]) -> Path:
    """Write params + config as one JSON document (atomic)."""
    if config != params.config:
        raise InputError("config does not match the parameters' config")
    target = write_json(path, checkpoint_document(params))
    logger.info(f"Checkpoint written to {target} ({params.num_parameters} parameters)")
    return target


def load_checkpoint(path: Union[str, Path]) -> Tuple[ModelParams, ModelConfig]:
    """Read a checkpoint; malformed files and invalid configs raise, never return partial models."""
    document = read_json(path)
    if not isinstance(document, dict) or "config" not in document or "tensors" not in document:
        raise MalformedFileError(f"{path} is not a checkpoint (missing config/tensors)")

    try:
        config = ModelConfig.model_validate(document["config"])
    except ValidationError as e:
        raise ConfigurationError("; ".join(err["msg"] for err in e.errors())) from e

    tensors = document["tensors"]
    if not isinstance(tensors, dict):
        raise MalformedFileError(f"{path}: tensors must be an object")

    arrays: Dict[str, np.ndarray] = {}
    for name, shape in expected_shapes(config).items():
        entry = tensors.get(name)
        if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
            raise MalformedFileError(f"{path}: tensor {name} missing or malformed")
        if not isinstance(entry["shape"], list) or entry["shape"] != list(shape):
            raise MalformedFileError(f"{path}: tensor {name} has shape {entry['shape']}, expected {list(shape)}")
        data = entry["data"]
        if not isinstance(data, list) or len(data) != shape[0] * shape[1]:
            raise MalformedFileError(f"{path}: tensor {name} has wrong element count")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
            raise MalformedFileError(f"{path}: tensor {name} has non-numeric data")
        try:
            array = np.asarray(data, dtype=np.float64)
        except OverflowError as e:
            raise MalformedFileError(f"{path}: tensor {name} has values outside float64 range") from e
        if not np.all(np.isfinite(array)):
            raise MalformedFileError(f"{path}: tensor {name} has non-finite data")
        arrays[name] = array.reshape(shape)

    extra = set(tensors) - set(arrays)
    if extra:
        raise MalformedFileError(f"{path}: unexpected tensors {sorted(extra)}")

    params = ModelParams(
        config=config,
        embedding=arrays["embedding"],
        W_in=arrays["W_in"],
        hidden=tuple(arrays[f"hidden.{b}"] for b in range(config.num_hidden_blocks)),
        W_out=arrays["W_out"],
    )
    return params, config

"""
Artifact persistence helpers.

All writes go to a temp file in the destination directory and are moved into
place with os.replace, so an interrupted run never leaves a truncated file.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Union

from msplab.core.errors import MalformedFileError

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text to path atomically."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def dumps(data: Any) -> str:
    """Deterministic JSON encoding (sorted keys, repr floats)."""
    return json.dumps(data, sort_keys=True, allow_nan=False)


def write_json(path: PathLike, data: Any) -> Path:
    return atomic_write_text(path, dumps(data) + "\n")


def write_jsonl(path: PathLike, records: Iterable[Any]) -> Path:
    return atomic_write_text(path, "".join(dumps(record) + "\n" for record in records))


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise MalformedFileError(f"Cannot read {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise MalformedFileError(f"{path} is not UTF-8 text: {e}") from e


def read_json(path: PathLike) -> Any:
    """Read a JSON document; any decoding failure is a malformed-file error."""
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedFileError(f"{path} is not valid JSON: {e}") from e


def read_jsonl(path: PathLike) -> List[Any]:
    lines = _read_text(path).splitlines()
    records = []
    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise MalformedFileError(f"{path}:{number} is not valid JSON: {e}") from e
    return records


def read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise MalformedFileError(f"Cannot read {path}: {e}") from e

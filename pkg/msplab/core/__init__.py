from msplab.core.config import settings
from msplab.core.cache import CacheService
from msplab.core.errors import (
    MSPError,
    UsageError,
    InputError,
    ConfigurationError,
    MalformedFileError,
    NumericalError,
    SearchSetupError,
    OracleCapError,
    UndefinedCorrelationError,
)
from msplab.core.storage import (
    atomic_write_text,
    write_json,
    write_jsonl,
    read_json,
    read_jsonl,
    read_bytes,
)

__all__ = [
    "settings",
    "CacheService",
    "MSPError",
    "UsageError",
    "InputError",
    "ConfigurationError",
    "MalformedFileError",
    "NumericalError",
    "SearchSetupError",
    "OracleCapError",
    "UndefinedCorrelationError",
    "atomic_write_text",
    "write_json",
    "write_jsonl",
    "read_json",
    "read_jsonl",
    "read_bytes",
]

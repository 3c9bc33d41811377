import threading
from typing import Dict, Generic, Hashable, Optional, TypeVar

V = TypeVar("V")


class CacheService(Generic[V]):
    """In-process memo table with hit/miss accounting.

    Safe for concurrent inserts of distinct keys from worker threads.
    """

    def __init__(self) -> None:
        self._store: Dict[Hashable, V] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[V]:
        """Get cached value, counting a hit or a miss."""
        with self._lock:
            value = self._store.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
            return value

    def set(self, key: Hashable, value: V) -> None:
        with self._lock:
            self._store[key] = value

    def __contains__(self, key: Hashable) -> bool:
        with self._lock:
            return key in self._store

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)

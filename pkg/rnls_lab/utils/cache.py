import hashlib
from collections import OrderedDict
from functools import wraps
from typing import Any, Callable

import numpy as np

from rnls_lab.utils.logger import get_logger

log = get_logger("Cache")

# Least-recently-used entries are evicted past this many results
MAX_ENTRIES = 128

# Process-local memo store, keyed by md5 of the call signature
_memory_cache: "OrderedDict[str, Any]" = OrderedDict()


def _freeze(value: Any) -> Any:
    """Mark cached numpy payloads read-only so callers cannot corrupt the store"""
    if isinstance(value, np.ndarray):
        value.flags.writeable = False
    elif isinstance(value, tuple):
        for item in value:
            _freeze(item)
    return value


def cache_size() -> int:
    return len(_memory_cache)


def clear_cache() -> None:
    if _memory_cache:
        log.debug(f"Dropping {len(_memory_cache)} cached results")
    _memory_cache.clear()


def cached(key_prefix: str = ""):
    """Decorator for memoizing pure functions with hashable arguments

    Args:
        key_prefix: Optional prefix for cache key
    """
    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            # Generate cache key from function name and arguments
            key_parts = [key_prefix, func.__module__, func.__name__]
            key_parts.extend(repr(arg) for arg in args)
            key_parts.extend(f"{k}:{v!r}" for k, v in sorted(kwargs.items()))

            cache_key = hashlib.md5("|".join(key_parts).encode()).hexdigest()

            if cache_key in _memory_cache:
                log.debug(f"Cache hit for {func.__name__}")
                _memory_cache.move_to_end(cache_key)
                return _memory_cache[cache_key]

            result = _freeze(func(*args, **kwargs))
            _memory_cache[cache_key] = result
            while len(_memory_cache) > MAX_ENTRIES:
                _memory_cache.popitem(last=False)
            log.debug(f"Cached result for {func.__name__}")

            return result
        return wrapper
    return decorator

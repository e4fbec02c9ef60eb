"""
Content-addressed artifact cache.

Designs and other deterministic constructions are keyed by a SHA-256 hash of
their build parameters, kept in memory with a bounded size, and optionally
mirrored to a directory as JSON so that later runs can reload them.
"""

import hashlib
import json
import logging
import os
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Callable, Dict, Optional

from config import get_config

logger = logging.getLogger(__name__)


@dataclass
class CacheEntry:
    """Cached artifact with its creation timestamp."""
    data: Any
    timestamp: datetime


class ArtifactCache:
    """
    Bounded in-memory cache with an optional JSON mirror on disk.

    Entries are evicted least-recently-used first once max_size is reached.
    Only JSON-serializable payloads are mirrored; callers convert artifacts
    to dictionaries through the `dump`/`load` hooks of get_or_build.
    """

    def __init__(self, max_size: int = 256, directory: Optional[str] = None):
        """
        Initialize the artifact cache.

        Args:
            max_size: Maximum number of in-memory entries
            directory: Optional directory for the JSON mirror
        """
        self.cache: "OrderedDict[str, CacheEntry]" = OrderedDict()
        self.max_size = max_size
        self.directory = directory
        self.hits = 0
        self.misses = 0

    def generate_key(self, kind: str, params: Dict) -> str:
        """
        Generate a cache key from an artifact kind and its parameters.

        Args:
            kind: Artifact kind, e.g. "design"
            params: JSON-serializable build parameters

        Returns:
            "<kind>-<sha256>" string
        """
        params_str = json.dumps(params, sort_keys=True)
        digest = hashlib.sha256(f"{kind}:{params_str}".encode()).hexdigest()
        return f"{kind}-{digest}"

    def get(self, key: str) -> Optional[Any]:
        entry = self.cache.get(key)
        if entry is None:
            return None
        self.cache.move_to_end(key)
        return entry.data

    def set(self, key: str, data: Any):
        if key in self.cache:
            self.cache.move_to_end(key)
        elif len(self.cache) >= self.max_size:
            evicted, _ = self.cache.popitem(last=False)
            logger.debug(f"Evicted artifact {evicted}")
        self.cache[key] = CacheEntry(data=data, timestamp=datetime.now())

    def _path(self, key: str) -> Optional[str]:
        if not self.directory:
            return None
        return os.path.join(self.directory, f"{key}.json")

    def get_or_build(self, kind: str, params: Dict, build: Callable[[], Any],
                     dump: Optional[Callable[[Any], Dict]] = None,
                     load: Optional[Callable[[Dict], Any]] = None) -> Any:
        """
        Return the cached artifact for (kind, params), building it on a miss.

        Args:
            kind: Artifact kind
            params: Build parameters
            build: Zero-argument builder
            dump: Converts the artifact to a JSON dictionary for the disk mirror
            load: Rebuilds (and re-verifies) an artifact from its JSON dictionary

        Returns:
            The artifact
        """
        key = self.generate_key(kind, params)
        cached = self.get(key)
        if cached is not None:
            self.hits += 1
            return cached

        path = self._path(key)
        if path and load and os.path.exists(path):
            with open(path) as fh:
                artifact = load(json.load(fh))
            logger.info(f"Loaded {kind} artifact {key[:24]} from {path}")
            self.hits += 1
            self.set(key, artifact)
            return artifact

        self.misses += 1
        artifact = build()
        logger.info(f"Built {kind} artifact {key[:24]}")
        self.set(key, artifact)

        if path and dump:
            os.makedirs(self.directory, exist_ok=True)
            with open(path, "w") as fh:
                json.dump(dump(artifact), fh, sort_keys=True)
        return artifact

    def clear(self):
        self.cache.clear()
        self.hits = 0
        self.misses = 0

    def get_stats(self) -> Dict[str, Any]:
        return {
            "size": len(self.cache),
            "max_size": self.max_size,
            "hits": self.hits,
            "misses": self.misses,
            "directory": self.directory,
        }


_cache: Optional[ArtifactCache] = None


def get_artifact_cache() -> ArtifactCache:
    """Process-wide cache configured from LabConfig."""
    global _cache
    if _cache is None:
        config = get_config()
        _cache = ArtifactCache(max_size=config.cache_max_size, directory=config.artifact_dir)
    return _cache

"""
Cache layer for issue-tracker responses.

Uses a persistent JSON file so fetched issues survive process restarts
and repeated pipeline runs do not hit the tracker again.
"""

import json
import logging
import threading
from pathlib import Path

logger = logging.getLogger(__name__)

# Default cache file in project root
_CACHE_DIR = Path(__file__).resolve().parent.parent
DEFAULT_CACHE_PATH = _CACHE_DIR / ".issue_cache.json"

_lock = threading.Lock()
# One in-memory dict per cache file
_memory: dict[str, dict] = {}


def _ensure_loaded(cache_path: Path) -> dict:
    """Load cache from disk if not already in memory."""
    key = str(cache_path)
    with _lock:
        if key in _memory:
            return _memory[key]
        data: dict = {}
        if cache_path.exists():
            try:
                with open(cache_path, "r", encoding="utf-8") as f:
                    data = json.load(f)
            except (json.JSONDecodeError, OSError):
                logger.warning("Issue cache %s unreadable, starting empty", cache_path)
                data = {}
        _memory[key] = data
        return data


def _save(cache_path: Path) -> None:
    """Persist in-memory cache to disk."""
    with _lock:
        data = _memory.get(str(cache_path), {})
        try:
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            with open(cache_path, "w", encoding="utf-8") as f:
                json.dump(data, f, indent=0, ensure_ascii=False, sort_keys=True)
        except OSError:
            logger.warning("Could not write issue cache %s", cache_path)


def get_cache(cache_path: Path | str | None = None):
    """
    Return a cache instance. Uses DEFAULT_CACHE_PATH if cache_path is None.
    """
    path = Path(cache_path) if cache_path else DEFAULT_CACHE_PATH
    return IssueCache(path)


class IssueCache:
    """Key-value cache backed by a JSON file, keyed per repository and issue."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def get(self, key: str):
        """Return value for key or None if missing."""
        data = _ensure_loaded(self.path)
        with _lock:
            return data.get(key)

    def set(self, key: str, value) -> None:
        """Store value for key and persist to disk."""
        data = _ensure_loaded(self.path)
        with _lock:
            data[key] = value
        _save(self.path)

    @staticmethod
    def issue_key(repo: str, number: int) -> str:
        return f"{repo.lower()}#{int(number)}"

    def get_issue(self, repo: str, number: int):
        """Return the cached raw issue for ``owner/name`` and number, or None."""
        return self.get(self.issue_key(repo, number))

    def set_issue(self, repo: str, number: int, issue: dict) -> None:
        self.set(self.issue_key(repo, number), issue)

    def clear(self) -> None:
        """Clear all cached entries."""
        with _lock:
            _memory[str(self.path)] = {}
        if self.path.exists():
            try:
                self.path.unlink()
            except OSError:
                pass

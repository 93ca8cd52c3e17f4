"""
Client for the GitHub issues REST API.

Fetches the issues that bug-fix commits reference, normalises them to the
``issues.jsonl`` record shape, and caches raw responses so re-runs stay
offline. Works without a token (lower rate limit); the token comes from the
caller, falling back to the GITHUB_TOKEN environment variable.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable

import requests

from residual_faults.cache import get_cache

logger = logging.getLogger(__name__)

GITHUB_API_BASE = "https://api.github.com"


def normalise_issue(raw: dict[str, Any]) -> dict[str, Any]:
    """Map a GitHub issue payload to the local issue record shape."""
    milestone = raw.get("milestone") or {}
    labels = []
    for label in raw.get("labels") or []:
        name = label.get("name") if isinstance(label, dict) else label
        if name:
            labels.append(str(name))
    return {
        "id": raw.get("number"),
        "created_at": raw.get("created_at"),
        "title": raw.get("title") or "",
        "body": raw.get("body") or "",
        "labels": labels,
        "milestone_state": milestone.get("state"),
        "milestone_title": milestone.get("title"),
        "reporter_login": (raw.get("user") or {}).get("login"),
    }


class IssueTrackerClient:
    """
    Fetches issues for one ``owner/name`` GitHub repository with caching.

    Network and decoding failures never raise: the issue is reported as
    missing and the commit is treated as unlinked downstream.
    """

    def __init__(self, repo: str, token: str | None = None, cache=None):
        if "/" not in (repo or ""):
            raise ValueError(
                f"GitHub repository must be given as 'owner/name', got {repo!r}."
            )
        self.repo = repo.strip().strip("/")
        self.token = token if token is not None else os.environ.get("GITHUB_TOKEN", "").strip()
        self.cache = cache or get_cache()
        self._session = requests.Session()
        self._session.headers["Accept"] = "application/vnd.github+json"
        if self.token:
            self._session.headers["Authorization"] = f"Bearer {self.token}"
        self.api_calls = 0
        self.cache_hits = 0

    def _url(self, number: int) -> str:
        return f"{GITHUB_API_BASE}/repos/{self.repo}/issues/{int(number)}"

    def _get(self, number: int) -> dict[str, Any] | None:
        self.api_calls += 1
        try:
            r = self._session.get(self._url(number), timeout=10)
            r.raise_for_status()
            data = r.json()
        except (requests.RequestException, ValueError):
            logger.warning("Could not fetch issue %s#%s", self.repo, number)
            return None
        if not isinstance(data, dict) or "number" not in data:
            return None
        return data

    def get_issue(self, number: int) -> dict[str, Any] | None:
        """
        Return the normalised issue record. Uses cache; only calls the API
        on a miss. Pull requests share the issue namespace and are skipped.
        """
        cached = self.cache.get_issue(self.repo, number)
        if cached is not None:
            self.cache_hits += 1
            raw = cached
        else:
            raw = self._get(number)
            if raw is None:
                return None
            self.cache.set_issue(self.repo, number, raw)
        if raw.get("pull_request"):
            return None
        return normalise_issue(raw)

    def fetch_many(self, numbers: Iterable[int]) -> list[dict[str, Any]]:
        """Fetch each distinct issue number once, in ascending order."""
        issues = []
        for number in sorted({int(n) for n in numbers}):
            issue = self.get_issue(number)
            if issue is not None:
                issues.append(issue)
        logger.info(
            "Fetched %d issues for %s (%d API calls, %d cache hits)",
            len(issues), self.repo, self.api_calls, self.cache_hits,
        )
        return issues


def append_issues(path: Path | str, issues: list[dict[str, Any]]) -> int:
    """
    Append issues to a JSONL export, skipping ids already present.
    Returns the number of records written.
    """
    path = Path(path)
    seen: set = set()
    if path.exists():
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    try:
                        seen.add(json.loads(line).get("id"))
                    except ValueError:
                        continue
    written = 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        for issue in issues:
            if issue.get("id") in seen:
                continue
            f.write(json.dumps(issue, ensure_ascii=False) + "\n")
            seen.add(issue.get("id"))
            written += 1
    return written


def get_client(
    repo: str,
    cache_path: Path | str | None = None,
    token: str | None = None,
) -> IssueTrackerClient:
    """Return a client for ``owner/name`` backed by the configured cache file."""
    return IssueTrackerClient(repo, token=token, cache=get_cache(cache_path))

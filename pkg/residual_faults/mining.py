"""
Repository mining: bug-fix commits, stable releases and commit records.

Walks the non-merge history of a local git repository with PyDriller,
flags bug-fixing commits by word-boundary keyword matching on the commit
message and reads the tags that mark stable releases.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import git
from pydriller import Repository

from residual_faults.errors import InputError, RepositoryError

logger = logging.getLogger(__name__)

DEFAULT_KEYWORDS = frozenset(
    {"fix", "fixes", "fixed", "bug", "fault", "defect", "crash", "issue", "error", "patch"}
)

# v1, 1.2, v1.2.3; anything with a suffix (rc, beta, dev, -post) is not stable
STABLE_TAG_RE = re.compile(r"^v?\d+(?:\.\d+(?:\.\d+)?)?$", re.IGNORECASE)

ISSUE_REF_RE = re.compile(
    r"(?<![\w/&])#(\d+)\b|\bgh-(\d+)\b|\bissue\s+#?(\d+)\b", re.IGNORECASE
)


@lru_cache(maxsize=64)
def _keyword_pattern(keywords: tuple[str, ...]) -> re.Pattern:
    alternatives = "|".join(re.escape(k) for k in keywords)
    return re.compile(rf"\b(?:{alternatives})\b")


def normalise_keywords(keywords: Iterable[str] | None) -> tuple[str, ...]:
    """Lowercase, strip and sort a keyword collection; empty means invalid."""
    if keywords is None:
        keywords = DEFAULT_KEYWORDS
    cleaned = sorted({k.strip().lower() for k in keywords if k and k.strip()})
    if not cleaned:
        raise InputError("Keyword set must contain at least one non-empty keyword.")
    return tuple(cleaned)


def matches_keywords(message: str, keywords: Iterable[str] | None = None) -> bool:
    """True when the lowercased message contains a keyword as a whole word."""
    pattern = _keyword_pattern(normalise_keywords(keywords))
    return bool(pattern.search((message or "").lower()))


def parse_issue_reference(message: str) -> int | None:
    """Return the first ``#N``, ``gh-N`` or ``issue N`` number in a message."""
    m = ISSUE_REF_RE.search(message or "")
    if not m:
        return None
    return int(next(g for g in m.groups() if g))


def author_key(name: str | None, email: str | None) -> str:
    return f"{(name or '').strip().lower()} <{(email or '').strip().lower()}>"


@dataclass(frozen=True)
class CommitRecord:
    repo_id: str
    commit_id: str
    committed_at: int
    author_id: str
    message: str
    changed_files: tuple[str, ...]
    diff: str
    linked_issue_id: int | None = None

    _KEYS = (
        "repo_id", "commit_id", "committed_at", "author_id", "message",
        "changed_files", "diff", "linked_issue_id",
    )

    def to_dict(self) -> dict:
        data = {}
        for key in self._KEYS:
            value = getattr(self, key)
            data[key] = list(value) if key == "changed_files" else value
        return data

    def to_json(self) -> str:
        """One JSONL line with keys in fixed order."""
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str | dict) -> "CommitRecord":
        data = json.loads(line) if isinstance(line, str) else dict(line)
        return cls(
            repo_id=data["repo_id"],
            commit_id=data["commit_id"],
            committed_at=int(data["committed_at"]),
            author_id=data["author_id"],
            message=data["message"],
            changed_files=tuple(data["changed_files"]),
            diff=data["diff"],
            linked_issue_id=data.get("linked_issue_id"),
        )


@dataclass(frozen=True)
class ReleaseInfo:
    first_stable_release_at: int | None = None
    stable_tags: tuple[tuple[str, int], ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "first_stable_release_at": self.first_stable_release_at,
            "stable_tags": [[name, ts] for name, ts in self.stable_tags],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReleaseInfo":
        tags = tuple((str(n), int(ts)) for n, ts in data.get("stable_tags") or [])
        first = data.get("first_stable_release_at")
        return cls(first_stable_release_at=None if first is None else int(first), stable_tags=tags)


def open_git_repo(repo_path: Path | str) -> git.Repo:
    """Open a repository with GitPython, raising RepositoryError on failure."""
    path = Path(repo_path)
    if not path.is_dir():
        raise RepositoryError(f"Repository path {path} does not exist or is not a directory.")
    try:
        repo = git.Repo(path)
    except (git.InvalidGitRepositoryError, git.NoSuchPathError) as exc:
        raise RepositoryError(f"{path} is not a git repository.") from exc
    try:
        repo.head.commit
    except ValueError as exc:
        raise RepositoryError(f"{path} has no commits.") from exc
    return repo


def _unified_diff(modified_files) -> str:
    parts = []
    for mf in modified_files:
        old = mf.old_path or "/dev/null"
        new = mf.new_path or "/dev/null"
        parts.append(f"--- a/{old}\n+++ b/{new}\n{mf.diff or ''}")
        if parts[-1] and not parts[-1].endswith("\n"):
            parts[-1] += "\n"
    return "".join(parts)


class RepositoryMiner:
    """Scans one repository for bug-fix commits and stable release tags."""

    def __init__(self, repo_path: Path | str, keywords: Iterable[str] | None = None, repo_id: str | None = None):
        self.repo_path = Path(repo_path)
        self.keywords = normalise_keywords(keywords)
        self.repo_id = repo_id or self.repo_path.resolve().name
        self.skipped_commits = 0

    def _record(self, commit) -> CommitRecord | None:
        try:
            modified = list(commit.modified_files)
            diff = _unified_diff(modified)
        except Exception:  # GitPython/PyDriller surface many error types for broken objects
            self.skipped_commits += 1
            logger.warning("Skipping commit %s: diff unreadable", commit.hash)
            return None
        changed = tuple(mf.new_path or mf.old_path for mf in modified)
        if not changed:
            return None
        return CommitRecord(
            repo_id=self.repo_id,
            commit_id=commit.hash,
            committed_at=int(commit.committer_date.timestamp()),
            author_id=author_key(commit.author.name, commit.author.email),
            message=commit.msg,
            changed_files=changed,
            diff=diff,
            linked_issue_id=parse_issue_reference(commit.msg),
        )

    def scan_bugfix_commits(self) -> list[CommitRecord]:
        """Return bug-fix commits ordered by commit time, then id."""
        open_git_repo(self.repo_path)
        pattern = _keyword_pattern(self.keywords)
        records = []
        for commit in Repository(str(self.repo_path), only_no_merge=True).traverse_commits():
            if not pattern.search((commit.msg or "").lower()):
                continue
            record = self._record(commit)
            if record is not None:
                records.append(record)
        records.sort(key=lambda r: (r.committed_at, r.commit_id))
        logger.info(
            "Mined %d bug-fix commits from %s (%d skipped)",
            len(records), self.repo_id, self.skipped_commits,
        )
        return records

    def detect_first_stable_release(self) -> ReleaseInfo:
        """Read stable version tags; the earliest one is the first stable release."""
        repo = open_git_repo(self.repo_path)
        tags = []
        for tag in repo.tags:
            if not STABLE_TAG_RE.match(tag.name):
                continue
            if tag.tag is not None:
                ts = int(tag.tag.tagged_date)
            else:
                ts = int(tag.commit.committed_date)
            tags.append((tag.name, ts))
        tags.sort(key=lambda t: (t[1], t[0]))
        first = tags[0][1] if tags else None
        return ReleaseInfo(first_stable_release_at=first, stable_tags=tuple(tags))


def scan_bugfix_commits(repo_path, keywords=None, repo_id=None) -> list[CommitRecord]:
    return RepositoryMiner(repo_path, keywords, repo_id).scan_bugfix_commits()


def detect_first_stable_release(repo_path) -> ReleaseInfo:
    return RepositoryMiner(repo_path).detect_first_stable_release()


def read_snapshot(repo_path: Path | str, commit_id: str, parent: bool = False) -> dict[str, str]:
    """
    Python sources of one commit's tree (or of its first parent), keyed by
    repository-relative path. A root commit has an empty parent snapshot.
    """
    repo = open_git_repo(repo_path)
    commit = repo.commit(commit_id)
    if parent:
        if not commit.parents:
            return {}
        commit = commit.parents[0]
    sources = {}
    for item in commit.tree.traverse():
        if item.type != "blob" or not item.path.endswith(".py"):
            continue
        sources[item.path] = item.data_stream.read().decode("utf-8", errors="replace")
    return sources


def head_sources(repo_path: Path | str) -> dict[str, str]:
    """Python sources at HEAD."""
    repo = open_git_repo(repo_path)
    return read_snapshot(repo_path, repo.head.commit.hexsha)

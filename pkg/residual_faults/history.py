"""
Process metrics from repository history.

HistoryIndex reads the non-merge history once. A HistorySlice collects the
commits, up to and including a cutoff commit, that changed lines inside
one method, following file renames backwards. The metric families are
computed from the slice alone, so nothing after the cutoff can leak in.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

from pydriller import ModificationType, Repository

from residual_faults.catalog import PROCESS_METRICS
from residual_faults.errors import UnparseableSourceError
from residual_faults.mining import author_key, matches_keywords, normalise_keywords, open_git_repo
from residual_faults.syntax import SyntaxUnit, UnitKind, parse_source

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400.0
EXPERIENCE_WEIGHTS = (0.4, 0.3, 0.3)
RECENCY_DAYS = 365.0


@dataclass(frozen=True)
class FileChange:
    old_path: str | None
    new_path: str | None
    change_type: str
    added: tuple[int, ...]
    deleted: tuple[int, ...]
    added_text: tuple[str, ...]
    deleted_text: tuple[str, ...]
    source_before: str | None
    source_after: str | None


@dataclass(frozen=True)
class CommitInfo:
    commit_id: str
    position: int
    timestamp: int
    author_id: str
    author_name: str
    message: str
    changed_files: tuple[str, ...]
    lines_added: int
    lines_deleted: int
    python_changes: tuple[FileChange, ...]


@dataclass(frozen=True)
class Touch:
    commit_id: str
    timestamp: int
    author_id: str
    author_name: str
    message: str
    lines_added: int
    lines_deleted: int
    statements_modified: int
    method_added: int
    method_deleted: int
    commit_added: int
    commit_deleted: int
    changed_files: tuple[str, ...]

    @property
    def churn(self) -> int:
        return self.lines_added + self.lines_deleted

    @property
    def method_churn(self) -> int:
        return self.method_added + self.method_deleted

    @property
    def commit_churn(self) -> int:
        return self.commit_added + self.commit_deleted


@dataclass
class HistorySlice:
    target: tuple[str, str]
    cutoff: int
    touches: list[Touch] = field(default_factory=list)
    file_commits: int = 0
    loc_at_cutoff: int = 0


@lru_cache(maxsize=2048)
def _parse(source: str) -> SyntaxUnit | None:
    try:
        return parse_source(source)
    except UnparseableSourceError:
        return None


def method_span(source: str | None, qualified_name: str) -> tuple[int, int] | None:
    if not source:
        return None
    root = _parse(source)
    if root is None:
        return None
    unit = root.find(qualified_name, UnitKind.METHOD)
    return unit.source_span if unit is not None else None


def _is_statement_line(text: str) -> bool:
    stripped = text.strip()
    return bool(stripped) and not stripped.startswith("#")


class HistoryIndex:
    """Chronological, read-only view of a repository's non-merge history."""

    def __init__(self, repo_id: str, commits: list[CommitInfo]):
        self.repo_id = repo_id
        self.commits = commits
        self._by_id = {c.commit_id: c for c in commits}

    @classmethod
    def from_repository(cls, repo_path: Path | str, repo_id: str | None = None) -> "HistoryIndex":
        open_git_repo(repo_path)
        commits = []
        for position, commit in enumerate(Repository(str(repo_path), only_no_merge=True).traverse_commits()):
            changes = []
            added_total = deleted_total = 0
            paths = []
            for mf in commit.modified_files:
                added_total += mf.added_lines
                deleted_total += mf.deleted_lines
                paths.append(mf.new_path or mf.old_path)
                if not ((mf.new_path or "").endswith(".py") or (mf.old_path or "").endswith(".py")):
                    continue
                parsed = mf.diff_parsed
                changes.append(FileChange(
                    old_path=mf.old_path,
                    new_path=mf.new_path,
                    change_type=mf.change_type.name,
                    added=tuple(n for n, _ in parsed["added"]),
                    deleted=tuple(n for n, _ in parsed["deleted"]),
                    added_text=tuple(t for _, t in parsed["added"]),
                    deleted_text=tuple(t for _, t in parsed["deleted"]),
                    source_before=mf.source_code_before,
                    source_after=mf.source_code,
                ))
            commits.append(CommitInfo(
                commit_id=commit.hash,
                position=position,
                timestamp=int(commit.committer_date.timestamp()),
                author_id=author_key(commit.author.name, commit.author.email),
                author_name=(commit.author.name or "").strip(),
                message=commit.msg or "",
                changed_files=tuple(sorted(paths)),
                lines_added=added_total,
                lines_deleted=deleted_total,
                python_changes=tuple(changes),
            ))
        name = repo_id or Path(repo_path).resolve().name
        logger.info("Indexed %d commits of %s", len(commits), name)
        return cls(name, commits)

    def commit(self, commit_id: str) -> CommitInfo | None:
        return self._by_id.get(commit_id)

    def build_history_slice(self, target: tuple[str, str], cutoff: int, cutoff_commit: str | None = None) -> HistorySlice:
        """
        Touches of ``target = (path, qualified name)`` up to the cutoff.

        With ``cutoff_commit`` the walk starts at that commit; otherwise at
        the newest commit whose timestamp is <= cutoff.
        """
        path, qualified_name = target
        limit = None
        if cutoff_commit is not None and cutoff_commit in self._by_id:
            limit = self._by_id[cutoff_commit].position
        history = [
            c for c in self.commits
            if c.timestamp <= cutoff and (limit is None or c.position <= limit)
        ]
        result = HistorySlice(target=target, cutoff=cutoff)
        touches: list[Touch] = []
        current = path
        loc_known = False
        for info in reversed(history):
            change = next((fc for fc in info.python_changes if fc.new_path == current), None)
            if change is None:
                continue
            result.file_commits += 1
            after = method_span(change.source_after, qualified_name)
            before = method_span(change.source_before, qualified_name)
            if not loc_known and (after or before):
                span = after or before
                result.loc_at_cutoff = span[1] - span[0] + 1
                loc_known = True
            m_added = sum(1 for n in change.added if after and after[0] <= n <= after[1])
            m_deleted = sum(1 for n in change.deleted if before and before[0] <= n <= before[1])
            if m_added + m_deleted > 0:
                touches.append(Touch(
                    commit_id=info.commit_id,
                    timestamp=info.timestamp,
                    author_id=info.author_id,
                    author_name=info.author_name,
                    message=info.message,
                    lines_added=len(change.added),
                    lines_deleted=len(change.deleted),
                    statements_modified=sum(
                        1 for t in (*change.added_text, *change.deleted_text) if _is_statement_line(t)
                    ),
                    method_added=m_added,
                    method_deleted=m_deleted,
                    commit_added=info.lines_added,
                    commit_deleted=info.lines_deleted,
                    changed_files=info.changed_files,
                ))
            if change.change_type == ModificationType.ADD.name:
                break
            if change.change_type == ModificationType.RENAME.name and change.old_path:
                current = change.old_path
        touches.reverse()
        result.touches = touches
        if not touches:
            logger.warning("No history for %s::%s before cutoff", path, qualified_name)
        return result


def temporal_metrics(history: HistorySlice, keywords: Iterable[str] | None = None) -> tuple[float, float, float]:
    touches = history.touches
    if not touches:
        return 0.0, 0.0, 0.0
    age = (history.cutoff - touches[0].timestamp) / SECONDS_PER_DAY
    kw = normalise_keywords(keywords)
    fc = sum(1 for t in touches if matches_keywords(t.message, kw))
    bd = fc / max(1, history.loc_at_cutoff)
    return float(age), float(bd), float(fc)


def churn_metrics(history: HistorySlice) -> tuple[float, float, float, float]:
    churns = [t.churn for t in history.touches]
    total = sum(churns)
    return (
        total / max(1, len(churns)),
        float(max(churns, default=0)),
        float(total),
        float(sum(t.statements_modified for t in history.touches)),
    )


def commit_metrics(history: HistorySlice) -> tuple[float, ...]:
    touches = history.touches
    commit_churns = [t.commit_churn for t in touches]
    cca = sum(t.commit_added for t in touches)
    ccd = sum(t.commit_deleted for t in touches)
    patterns = {t.changed_files for t in touches}
    return (
        float(len(touches)),
        float(history.file_commits),
        float(max(commit_churns, default=0)),
        sum(commit_churns) / max(1, len(commit_churns)),
        float(cca + ccd),
        float(cca),
        float(ccd),
        float(len(patterns)),
    )


def method_churn(history: HistorySlice) -> tuple[float, ...]:
    touches = history.touches
    mca = sum(t.method_added for t in touches)
    mcd = sum(t.method_deleted for t in touches)
    return (
        float(mca),
        float(mcd),
        float(mca + mcd),
        (mca + mcd) / max(1, len(touches)),
        float(max((t.method_churn for t in touches), default=0)),
    )


def developer_experience(history: HistorySlice, author_id: str, age_days: float) -> float:
    own = [t for t in history.touches if t.author_id == author_id]
    if not own:
        return 0.0
    w_share, w_span, w_recent = EXPERIENCE_WEIGHTS
    share = len(own) / len(history.touches)
    span_days = (own[-1].timestamp - own[0].timestamp) / SECONDS_PER_DAY
    span = span_days / age_days if age_days > 0 else 0.0
    since_last = (history.cutoff - own[-1].timestamp) / SECONDS_PER_DAY
    return w_share * share + w_span * span + w_recent * math.exp(-since_last / RECENCY_DAYS)


def developer_metrics(history: HistorySlice) -> tuple[float, ...]:
    """(DA, ADE, DCN, ACA, ACCA)."""
    touches = history.touches
    authors = sorted({t.author_id for t in touches})
    da = len(authors)
    if da == 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    age = (history.cutoff - touches[0].timestamp) / SECONDS_PER_DAY
    ade = sum(developer_experience(history, a, age) for a in authors) / da
    dcn = len({t.author_name for t in touches})
    tcch = sum(t.churn for t in touches)
    return float(da), ade, float(dcn), len(touches) / da, tcch / da


def process_metrics(history: HistorySlice, keywords: Iterable[str] | None = None) -> dict[str, float]:
    """All process metrics in catalog order."""
    values = (
        *temporal_metrics(history, keywords),
        *churn_metrics(history),
        *commit_metrics(history),
        *method_churn(history),
        *developer_metrics(history),
    )
    return dict(zip(PROCESS_METRICS, (float(v) for v in values)))

"""
Issue evidence: turns raw issue records into the boolean and temporal
signals the commit classifier reads.

Raw issues come from a local ``issues.jsonl`` export (one object per line
with id, created_at, title, body, labels, milestone_state and
reporter_login). The contributor roster is a plain ``contributors.txt``
with one login per line.
"""

import json
import logging
import re
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from residual_faults.errors import InputError, IssueEvidenceError

logger = logging.getLogger(__name__)

VERSION_REF_RE = re.compile(
    r"\bv\d+(?:\.(?:\d+|x))+\b|\b(?:release|version|build)\s+v?\d+(?:\.(?:\d+|x))*\b",
    re.IGNORECASE,
)
AFFECTS_RE = re.compile(
    r"\baffect(?:s|ed)?(?:\s+versions?)?[\s:=\-]*v?\d+(?:\.(?:\d+|x))*", re.IGNORECASE
)
REGRESSION_RE = re.compile(r"\bregress(?:ion|ed)\b", re.IGNORECASE)
PRERELEASE_RE = re.compile(
    r"\b(?:alpha|beta|rc\d*|dev|pre-?release|nightly|unreleased)\b", re.IGNORECASE
)
INTERNAL_TEST_RE = re.compile(
    r"\b(?:failing tests?|test failures?|tests? fail(?:s|ed|ing)?|ci fail(?:s|ed|ure|ing)?"
    r"|flaky|found (?:during|in|while) testing|broken build|build is broken)\b",
    re.IGNORECASE,
)
TEMPLATE_SECTION_RE = re.compile(
    r"^[\s#*>_]*(describe the bug|bug description|expected behaviou?r|actual behaviou?r"
    r"|environment|versions?|system information)\b",
    re.IGNORECASE | re.MULTILINE,
)
REPRO_RE = re.compile(
    r"\b(?:steps to reproduce|to reproduce|how to reproduce|reproduction steps"
    r"|minimal (?:reproducible )?example|mcve|reproducer)\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class IssueEvidence:
    issue_id: int
    created_at: int
    reporter_is_contributor: bool | None = None
    has_version_reference: bool = False
    has_regression_tag: bool = False
    has_affects_label: bool = False
    milestone_closed: bool = False
    has_prerelease_qualifier: bool = False
    has_internal_test_marker: bool = False
    has_bug_template: bool = False
    has_reproduction_steps: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def parse_timestamp(value: Any) -> int | None:
    """ISO-8601 text or epoch seconds to UTC epoch seconds; None if absent."""
    if value is None or value == "":
        return None
    if isinstance(value, (int, float)):
        return int(value)
    text = str(value).strip()
    if re.fullmatch(r"\d+", text):
        return int(text)
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def extract_issue_evidence(raw_issue: dict[str, Any], contributors: set[str] | None = None) -> IssueEvidence:
    """
    Derive evidence markers from one raw issue.

    Raises IssueEvidenceError when the issue has no id or no usable
    creation timestamp; callers treat such commits as unlinked.
    """
    issue_id = raw_issue.get("id")
    if issue_id is None:
        raise IssueEvidenceError("Issue record has no id.")
    created_at = parse_timestamp(raw_issue.get("created_at"))
    if created_at is None or created_at <= 0:
        raise IssueEvidenceError(f"Issue {issue_id} has no usable creation timestamp.")

    title = raw_issue.get("title") or ""
    body = raw_issue.get("body") or ""
    labels = [str(label) for label in raw_issue.get("labels") or []]
    label_text = "\n".join(labels)
    milestone_title = raw_issue.get("milestone_title") or ""
    text = f"{title}\n{body}"

    reporter = (raw_issue.get("reporter_login") or "").strip().lower()
    if contributors is None or not reporter:
        is_contributor = None
    else:
        is_contributor = reporter in contributors

    sections = {m.group(1).lower() for m in TEMPLATE_SECTION_RE.finditer(body)}

    return IssueEvidence(
        issue_id=int(issue_id),
        created_at=created_at,
        reporter_is_contributor=is_contributor,
        has_version_reference=bool(VERSION_REF_RE.search(text)),
        has_regression_tag=bool(REGRESSION_RE.search(label_text) or REGRESSION_RE.search(title)),
        has_affects_label=bool(AFFECTS_RE.search(label_text) or AFFECTS_RE.search(text)),
        milestone_closed=(str(raw_issue.get("milestone_state") or "").lower() == "closed"),
        has_prerelease_qualifier=bool(
            PRERELEASE_RE.search(milestone_title)
            or PRERELEASE_RE.search(label_text)
            or PRERELEASE_RE.search(title)
        ),
        has_internal_test_marker=bool(INTERNAL_TEST_RE.search(text) or INTERNAL_TEST_RE.search(label_text)),
        has_bug_template=len(sections) >= 2,
        has_reproduction_steps=bool(REPRO_RE.search(body)),
    )


def load_issues(path: Path | str | None) -> dict[int, dict[str, Any]]:
    """Read an issues.jsonl export into {issue id: raw issue}. Missing file → {}."""
    if not path:
        return {}
    path = Path(path)
    if not path.exists():
        logger.warning("Issue export %s not found; all commits treated as unlinked", path)
        return {}
    issues: dict[int, dict[str, Any]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc}).") from exc
            if raw.get("id") is None:
                logger.warning("%s:%d: issue without id ignored", path, lineno)
                continue
            issues[int(raw["id"])] = raw
    return issues


def load_contributors(path: Path | str | None) -> set[str] | None:
    """Read contributors.txt into a lowercase login set; None when unavailable."""
    if not path:
        return None
    path = Path(path)
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        return {line.strip().lower() for line in f if line.strip() and not line.startswith("#")}

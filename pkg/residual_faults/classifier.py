"""
Commit classifier: labels each bug-fix commit as a pre-release fault, a
post-release (residual) fault, or unknown.

Precedence is fixed: strong pre-release hints, then strong post-release
hints, then the two unweighted soft scores, then the reporter's role.
Without a linked issue only the release timeline is consulted, and a
timestamp alone never yields PostRelease.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Iterable

from residual_faults.errors import IssueEvidenceError
from residual_faults.issues import IssueEvidence, extract_issue_evidence
from residual_faults.mining import CommitRecord, ReleaseInfo

logger = logging.getLogger(__name__)


class Label(str, enum.Enum):
    PRE_RELEASE = "PreRelease"
    POST_RELEASE = "PostRelease"
    UNKNOWN = "Unknown"

    @property
    def target(self) -> int:
        """Dataset target: 1 = residual, 0 = non-residual, -1 = unknown."""
        return {Label.POST_RELEASE: 1, Label.PRE_RELEASE: 0}.get(self, -1)


class Reason(str, enum.Enum):
    STRONG_PRE = "strong_pre"
    STRONG_POST = "strong_post"
    PRE_SCORE = "pre_score"
    POST_SCORE = "post_score"
    EXTERNAL_REPORTER = "external_reporter"
    INTERNAL_REPORTER = "internal_reporter"
    REPORTER_UNKNOWN = "reporter_unknown"
    BEFORE_FIRST_RELEASE = "before_first_release"
    NO_STABLE_RELEASE = "no_stable_release"
    NO_EVIDENCE = "no_evidence"


@dataclass(frozen=True)
class HintScores:
    strong_pre: bool = False
    strong_post: bool = False
    pre_score: int = 0
    post_score: int = 0


@dataclass(frozen=True)
class ClassificationResult:
    label: Label
    scores: HintScores
    reason_code: Reason

    def to_dict(self, commit: CommitRecord) -> dict:
        return {
            "repo_id": commit.repo_id,
            "commit_id": commit.commit_id,
            "label": self.label.value,
            "strong_pre": self.scores.strong_pre,
            "strong_post": self.scores.strong_post,
            "pre_score": self.scores.pre_score,
            "post_score": self.scores.post_score,
            "reason_code": self.reason_code.value,
        }


def strong_hints(evidence: IssueEvidence, release: ReleaseInfo) -> tuple[bool, bool]:
    frd = release.first_stable_release_at
    strong_pre = frd is not None and evidence.created_at < frd
    strong_post = (
        evidence.has_version_reference
        or evidence.has_affects_label
        or evidence.has_regression_tag
    )
    return strong_pre, bool(strong_post)


def soft_scores(evidence: IssueEvidence) -> tuple[int, int]:
    pre = sum((
        evidence.has_prerelease_qualifier,
        evidence.has_internal_test_marker,
        evidence.reporter_is_contributor is True,
    ))
    post = sum((
        evidence.milestone_closed,
        evidence.has_bug_template,
        evidence.has_reproduction_steps,
        evidence.reporter_is_contributor is False,
    ))
    return int(pre), int(post)


def classify_with_reason(
    commit: CommitRecord, evidence: IssueEvidence | None, release: ReleaseInfo
) -> ClassificationResult:
    """Classify one commit and report which rule decided."""
    if evidence is None:
        frd = release.first_stable_release_at
        if frd is None:
            return ClassificationResult(Label.PRE_RELEASE, HintScores(), Reason.NO_STABLE_RELEASE)
        if commit.committed_at < frd:
            return ClassificationResult(Label.PRE_RELEASE, HintScores(), Reason.BEFORE_FIRST_RELEASE)
        return ClassificationResult(Label.UNKNOWN, HintScores(), Reason.NO_EVIDENCE)

    strong_pre, strong_post = strong_hints(evidence, release)
    pre, post = soft_scores(evidence)
    scores = HintScores(strong_pre, strong_post, pre, post)
    if strong_pre:
        return ClassificationResult(Label.PRE_RELEASE, scores, Reason.STRONG_PRE)
    if strong_post:
        return ClassificationResult(Label.POST_RELEASE, scores, Reason.STRONG_POST)
    if pre > post:
        return ClassificationResult(Label.PRE_RELEASE, scores, Reason.PRE_SCORE)
    if post > pre:
        return ClassificationResult(Label.POST_RELEASE, scores, Reason.POST_SCORE)
    if evidence.reporter_is_contributor is False:
        return ClassificationResult(Label.POST_RELEASE, scores, Reason.EXTERNAL_REPORTER)
    if evidence.reporter_is_contributor is True:
        return ClassificationResult(Label.PRE_RELEASE, scores, Reason.INTERNAL_REPORTER)
    return ClassificationResult(Label.UNKNOWN, scores, Reason.REPORTER_UNKNOWN)


def classify_commit(commit: CommitRecord, evidence: IssueEvidence | None, release: ReleaseInfo) -> Label:
    return classify_with_reason(commit, evidence, release).label


def classify_commits(
    commits: Iterable[CommitRecord],
    issues: dict[int, dict],
    contributors: set[str] | None,
    release: ReleaseInfo,
) -> list[tuple[CommitRecord, ClassificationResult]]:
    """
    Classify a batch. Commits whose linked issue is missing from the export
    or whose evidence is rejected are classified as unlinked.
    """
    results = []
    rejected = 0
    for commit in commits:
        evidence = None
        raw = issues.get(commit.linked_issue_id) if commit.linked_issue_id is not None else None
        if raw is not None:
            try:
                evidence = extract_issue_evidence(raw, contributors)
            except IssueEvidenceError as exc:
                rejected += 1
                logger.warning("Commit %s: %s Treating as unlinked.", commit.commit_id[:10], exc)
        results.append((commit, classify_with_reason(commit, evidence, release)))
    if rejected:
        logger.info("%d issue records rejected during classification", rejected)
    return results

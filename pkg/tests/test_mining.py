"""
Tests for residual_faults.mining: keyword heuristic, commit records and release tags.
"""
import pytest

from conftest import ALICE, BOB, EPOCH
from residual_faults.errors import InputError, RepositoryError
from residual_faults.mining import (
    CommitRecord,
    ReleaseInfo,
    RepositoryMiner,
    author_key,
    detect_first_stable_release,
    head_sources,
    matches_keywords,
    normalise_keywords,
    parse_issue_reference,
    read_snapshot,
    scan_bugfix_commits,
)


@pytest.fixture
def five_commit_repo(repo_builder):
    """Five commits, two of them bug fixes ("bug" and "defect")."""
    b = repo_builder()
    b.commit("Initial import", {"pkg/core.py": "def f():\n    return 1\n", "README.md": "hi\n"})
    b.commit("Update README", {"README.md": "hello\n"})
    b.commit("Resolve bug in f, see #12", {"pkg/core.py": "def f():\n    return 2\n"}, author=BOB)
    b.commit("Add prefix handling", {"pkg/util.py": "def g():\n    return 0\n"})
    b.commit("Defect in g corrected", {"pkg/util.py": "def g():\n    return 3\n"})
    return b


class TestKeywords:
    """Tests for keyword matching helpers."""

    def test_fix_message_is_flagged(self):
        assert matches_keywords("Fix crash in parser")

    def test_readme_update_is_not_flagged(self):
        assert not matches_keywords("Update README")

    def test_word_boundary_only(self):
        assert not matches_keywords("Add prefix handling")
        assert not matches_keywords("debugging output")

    def test_custom_keywords(self):
        assert matches_keywords("Repair the thing", ["repair"])
        assert not matches_keywords("Fix the thing", ["repair"])

    def test_normalise_keywords_sorts_and_lowers(self):
        assert normalise_keywords([" Fix", "BUG", "fix"]) == ("bug", "fix")

    def test_empty_keyword_set_rejected(self):
        with pytest.raises(InputError):
            normalise_keywords(["", "  "])


class TestParsing:
    """Tests for issue references and author keys."""

    @pytest.mark.parametrize("message,expected", [
        ("Fix crash (#123)", 123),
        ("fixes gh-45", 45),
        ("Fix issue 7 in parser", 7),
        ("Fix issue #8", 8),
        ("Fix crash", None),
        ("See https://x.org/a#12", None),
    ])
    def test_parse_issue_reference(self, message, expected):
        assert parse_issue_reference(message) == expected

    def test_author_key(self):
        assert author_key(" Alice ", "Alice@Example.com") == "alice <alice@example.com>"


class TestCommitRecord:
    """Tests for CommitRecord serialisation."""

    def test_json_has_fixed_key_order(self):
        record = CommitRecord("r", "abc", 10, "a <a@b>", "fix", ("x.py",), "diff", 3)
        line = record.to_json()
        assert line.startswith('{"repo_id": "r", "commit_id": "abc", "committed_at": 10')
        assert CommitRecord.from_json(line) == record

    def test_release_info_dict(self):
        info = ReleaseInfo(100, (("v1.0", 100), ("v1.1", 200)))
        assert ReleaseInfo.from_dict(info.to_dict()) == info


class TestScanBugfixCommits:
    """Tests for scan_bugfix_commits on scripted repositories."""

    def test_exactly_the_two_fixes(self, five_commit_repo):
        records = scan_bugfix_commits(five_commit_repo.path, repo_id="demo")
        assert [r.message for r in records] == ["Resolve bug in f, see #12", "Defect in g corrected"]

    def test_record_fields(self, five_commit_repo):
        first = scan_bugfix_commits(five_commit_repo.path, repo_id="demo")[0]
        assert first.repo_id == "demo"
        assert first.committed_at == EPOCH + 3 * 86400
        assert first.author_id == author_key(*BOB)
        assert first.changed_files == ("pkg/core.py",)
        assert first.linked_issue_id == 12
        assert "-    return 1" in first.diff and "+    return 2" in first.diff

    def test_ordered_by_time(self, five_commit_repo):
        records = scan_bugfix_commits(five_commit_repo.path)
        assert [r.committed_at for r in records] == sorted(r.committed_at for r in records)

    def test_deterministic(self, five_commit_repo):
        a = [r.to_json() for r in scan_bugfix_commits(five_commit_repo.path)]
        b = [r.to_json() for r in scan_bugfix_commits(five_commit_repo.path)]
        assert a == b

    def test_keyword_sets_are_monotone(self, five_commit_repo):
        small = {r.commit_id for r in scan_bugfix_commits(five_commit_repo.path, ["bug"])}
        large = {r.commit_id for r in scan_bugfix_commits(five_commit_repo.path, ["bug", "defect"])}
        assert small <= large
        assert len(small) == 1 and len(large) == 2

    def test_missing_repository(self, tmp_path):
        with pytest.raises(RepositoryError):
            scan_bugfix_commits(tmp_path / "nope")

    def test_not_a_repository(self, tmp_path):
        with pytest.raises(RepositoryError):
            scan_bugfix_commits(tmp_path)

    def test_miner_counts_no_skips_on_clean_history(self, five_commit_repo):
        miner = RepositoryMiner(five_commit_repo.path)
        miner.scan_bugfix_commits()
        assert miner.skipped_commits == 0
        assert miner.repo_id == five_commit_repo.path.name


class TestDetectFirstStableRelease:
    """Tests for detect_first_stable_release with scripted tags."""

    def test_rc_excluded_earliest_stable_wins(self, repo_builder):
        b = repo_builder()
        c1 = b.commit("one", {"a.py": "x = 1\n"}, when=EPOCH + 100)
        c2 = b.commit("two", {"a.py": "x = 2\n"}, when=EPOCH + 200)
        c3 = b.commit("three", {"a.py": "x = 3\n"}, when=EPOCH + 300)
        b.tag("v0.9-rc1", c1)
        b.tag("v1.0", c2)
        b.tag("v1.1", c3)
        info = detect_first_stable_release(b.path)
        assert info.first_stable_release_at == EPOCH + 200
        assert [name for name, _ in info.stable_tags] == ["v1.0", "v1.1"]

    def test_no_tags(self, repo_builder):
        b = repo_builder()
        b.commit("one", {"a.py": "x = 1\n"})
        assert detect_first_stable_release(b.path).first_stable_release_at is None

    def test_prerelease_only(self, repo_builder):
        b = repo_builder()
        b.commit("one", {"a.py": "x = 1\n"})
        b.tag("1.0.0-beta")
        info = detect_first_stable_release(b.path)
        assert info.first_stable_release_at is None
        assert info.stable_tags == ()


class TestSnapshots:
    """Tests for read_snapshot and head_sources."""

    def test_parent_snapshot(self, five_commit_repo):
        fix = scan_bugfix_commits(five_commit_repo.path)[0]
        before = read_snapshot(five_commit_repo.path, fix.commit_id, parent=True)
        after = read_snapshot(five_commit_repo.path, fix.commit_id)
        assert before["pkg/core.py"].endswith("return 1\n")
        assert after["pkg/core.py"].endswith("return 2\n")
        assert "README.md" not in after

    def test_head_sources(self, five_commit_repo):
        assert set(head_sources(five_commit_repo.path)) == {"pkg/core.py", "pkg/util.py"}

    def test_root_commit_has_empty_parent(self, repo_builder):
        b = repo_builder()
        sha = b.commit("one", {"a.py": "x = 1\n"}, author=ALICE)
        assert read_snapshot(b.path, sha, parent=True) == {}

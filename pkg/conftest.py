"""
Pytest configuration and shared fixtures.
"""
from pathlib import Path

import git
import pytest

from residual_faults import cache as cache_module

DAY = 86400
EPOCH = 1_600_000_000  # 2020-09-13
ALICE = ("Alice", "alice@example.com")
BOB = ("Bob", "bob@example.com")


class RepoBuilder:
    """Scripted git repository with explicit authors and timestamps."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.repo = git.Repo.init(self.path)
        self.clock = EPOCH

    def commit(self, message, files=None, author=ALICE, when=None, renames=(), deletes=()):
        """Write ``files`` (path -> text), apply renames/deletes, commit at ``when``."""
        for old, new in renames:
            self.repo.git.mv(old, new)
        index = self.repo.index
        for rel, text in (files or {}).items():
            full = self.path / rel
            full.parent.mkdir(parents=True, exist_ok=True)
            full.write_text(text, encoding="utf-8")
            index.add([rel])
        if deletes:
            index.remove(list(deletes), working_tree=True)
        if when is None:
            self.clock += DAY
            when = self.clock
        else:
            self.clock = max(self.clock, when)
        actor = git.Actor(*author)
        stamp = f"{int(when)} +0000"
        c = index.commit(message, author=actor, committer=actor, author_date=stamp, commit_date=stamp)
        return c.hexsha

    def tag(self, name, ref="HEAD"):
        """Lightweight tag; its date is the tagged commit's date."""
        self.repo.create_tag(name, ref=ref)


@pytest.fixture
def repo_builder(tmp_path):
    """Factory for scripted repositories under tmp_path."""
    def make(name="repo"):
        return RepoBuilder(tmp_path / name)
    return make


@pytest.fixture
def temp_cache_path(tmp_path):
    """Unique temp path for file cache tests (avoids touching real cache)."""
    return tmp_path / "test_cache.json"


@pytest.fixture(autouse=True)
def fresh_cache_memory(monkeypatch):
    """Each test starts with no cache files loaded in memory."""
    monkeypatch.setattr(cache_module, "_memory", {})

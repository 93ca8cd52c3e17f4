"""
Tests for residual_faults.issue_client: GitHub issue fetcher with requests-mock.
"""
import json

import pytest
import requests
import requests_mock

from residual_faults.cache import get_cache
from residual_faults.issue_client import (
    GITHUB_API_BASE,
    IssueTrackerClient,
    append_issues,
    get_client,
    normalise_issue,
)

RAW_ISSUE = {
    "number": 42,
    "created_at": "2021-03-01T10:00:00Z",
    "title": "Crash in parser",
    "body": "Steps to reproduce:\n1. run it",
    "labels": [{"name": "bug"}, {"name": "affects-1.2"}],
    "milestone": {"state": "closed", "title": "1.2.1"},
    "user": {"login": "Outsider"},
}


def issue_url(repo, number):
    return f"{GITHUB_API_BASE}/repos/{repo}/issues/{number}"


class TestNormaliseIssue:
    """Tests for normalise_issue."""

    def test_maps_fields(self):
        issue = normalise_issue(RAW_ISSUE)
        assert issue == {
            "id": 42,
            "created_at": "2021-03-01T10:00:00Z",
            "title": "Crash in parser",
            "body": "Steps to reproduce:\n1. run it",
            "labels": ["bug", "affects-1.2"],
            "milestone_state": "closed",
            "milestone_title": "1.2.1",
            "reporter_login": "Outsider",
        }

    def test_missing_optional_fields(self):
        issue = normalise_issue({"number": 1, "created_at": "2021-01-01T00:00:00Z"})
        assert issue["labels"] == []
        assert issue["milestone_state"] is None
        assert issue["reporter_login"] is None
        assert issue["body"] == ""


class TestIssueTrackerClient:
    """Tests for IssueTrackerClient with mocked HTTP and a temp cache."""

    def test_rejects_bad_repo_name(self, temp_cache_path):
        with pytest.raises(ValueError, match="owner/name"):
            get_client("requests", temp_cache_path)

    def test_token_sets_authorization_header(self, temp_cache_path):
        client = IssueTrackerClient("psf/requests", token="abc", cache=get_cache(temp_cache_path))
        assert client._session.headers["Authorization"] == "Bearer abc"

    def test_token_read_from_environment(self, temp_cache_path, monkeypatch):
        monkeypatch.setenv("GITHUB_TOKEN", "from-env")
        client = get_client("psf/requests", temp_cache_path)
        assert client.token == "from-env"

    def test_no_token_no_header(self, temp_cache_path, monkeypatch):
        monkeypatch.delenv("GITHUB_TOKEN", raising=False)
        client = get_client("psf/requests", temp_cache_path)
        assert "Authorization" not in client._session.headers

    def test_get_issue_fetches_and_caches(self, temp_cache_path):
        client = get_client("psf/requests", temp_cache_path)
        with requests_mock.Mocker() as m:
            m.get(issue_url("psf/requests", 42), json=RAW_ISSUE)
            first = client.get_issue(42)
            second = client.get_issue(42)
            assert m.call_count == 1
        assert first == second
        assert first["id"] == 42
        assert client.api_calls == 1
        assert client.cache_hits == 1
        assert json.loads(temp_cache_path.read_text(encoding="utf-8"))["psf/requests#42"]["number"] == 42

    def test_http_error_returns_none(self, temp_cache_path):
        client = get_client("psf/requests", temp_cache_path)
        with requests_mock.Mocker() as m:
            m.get(issue_url("psf/requests", 5), status_code=404)
            assert client.get_issue(5) is None

    def test_connection_error_returns_none(self, temp_cache_path):
        client = get_client("psf/requests", temp_cache_path)
        with requests_mock.Mocker() as m:
            m.get(issue_url("psf/requests", 5), exc=requests.exceptions.ConnectTimeout)
            assert client.get_issue(5) is None

    def test_invalid_json_returns_none(self, temp_cache_path):
        client = get_client("psf/requests", temp_cache_path)
        with requests_mock.Mocker() as m:
            m.get(issue_url("psf/requests", 5), text="not json")
            assert client.get_issue(5) is None

    def test_pull_request_is_skipped(self, temp_cache_path):
        client = get_client("psf/requests", temp_cache_path)
        with requests_mock.Mocker() as m:
            m.get(issue_url("psf/requests", 9), json={**RAW_ISSUE, "number": 9, "pull_request": {"url": "x"}})
            assert client.get_issue(9) is None

    def test_fetch_many_dedupes_and_sorts(self, temp_cache_path):
        client = get_client("psf/requests", temp_cache_path)
        with requests_mock.Mocker() as m:
            for n in (3, 1):
                m.get(issue_url("psf/requests", n), json={**RAW_ISSUE, "number": n})
            m.get(issue_url("psf/requests", 2), status_code=500)
            issues = client.fetch_many([3, 1, 3, 2])
        assert [i["id"] for i in issues] == [1, 3]


class TestAppendIssues:
    """Tests for append_issues."""

    def test_appends_only_new_ids(self, tmp_path):
        path = tmp_path / "issues.jsonl"
        assert append_issues(path, [{"id": 1}, {"id": 2}]) == 2
        assert append_issues(path, [{"id": 2}, {"id": 3}]) == 1
        ids = [json.loads(line)["id"] for line in path.read_text(encoding="utf-8").splitlines()]
        assert ids == [1, 2, 3]

    def test_ignores_corrupt_lines(self, tmp_path):
        path = tmp_path / "issues.jsonl"
        path.write_text("garbage\n", encoding="utf-8")
        assert append_issues(path, [{"id": 1}]) == 1

"""
Tests for the workflow plumbing: config layering, artifact I/O and stage timing.
"""
import json
import logging

import pandas as pd
import pytest

from residual_faults.errors import InputError
from workflow.artifacts import (
    STAGES_FILE,
    StageState,
    artifact_meta,
    atomic_write_text,
    file_digest,
    fingerprint,
    read_csv,
    read_json,
    read_jsonl,
    require_artifact,
    sidecar_path,
    write_csv,
    write_json,
    write_jsonl,
)
from workflow.pipeline_config import load_config
from workflow.timing import stage_timer

CONFIG_YAML = """\
repos:
  - id: demo
    path: repos/demo
    issues: data/issues.jsonl
  - path: /abs/other
    holdout: true
keywords: [Fix, BUG]
split_ratio: 0.8
seed: 7
models:
  random_forest:
    n_trees: 25
evaluation:
  bootstrap_resamples: 100
repr:
  embeddings: emb.csv
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "pipeline.yaml"
    path.write_text(CONFIG_YAML)
    return path


class TestLoadConfig:
    """Tests for settings -> YAML -> flag layering."""

    def test_defaults_come_from_settings(self, settings):
        settings.RESIDUALS_SEED = 11
        settings.RESIDUALS_OUT_DIR = "elsewhere"
        settings.RESIDUALS_KEYWORDS = ["Crash"]
        cfg = load_config()
        assert cfg.seed == 11
        assert cfg.out_dir == "elsewhere"
        assert cfg.keywords == ["crash"]
        assert cfg.repos == []

    def test_yaml_values(self, config_file, tmp_path):
        cfg = load_config(config_file)
        demo, other = cfg.repos
        assert demo.path == str(tmp_path.resolve() / "repos/demo")
        assert demo.issues == str(tmp_path.resolve() / "data/issues.jsonl")
        assert other.id == "other"
        assert other.holdout is True
        assert cfg.keywords == ["bug", "fix"]
        assert cfg.split_ratio == 0.8
        assert cfg.seed == 7
        assert cfg.repr["embeddings"] == str(tmp_path.resolve() / "emb.csv")

    def test_sections_merge_over_defaults(self, config_file):
        cfg = load_config(config_file)
        assert cfg.models["random_forest"]["n_trees"] == 25
        assert "min_leaf" in cfg.models["random_forest"]
        assert cfg.evaluation["bootstrap_resamples"] == 100
        assert cfg.evaluation["permutation_repeats"] == 5

    def test_flags_override_file(self, config_file, tmp_path):
        cfg = load_config(config_file, seed=3, out=tmp_path / "run")
        assert cfg.seed == 3
        assert cfg.out == tmp_path / "run"

    def test_hash_ignores_output_directory(self, config_file, tmp_path):
        a = load_config(config_file, out=tmp_path / "a")
        b = load_config(config_file, out=tmp_path / "b")
        assert a.config_hash == b.config_hash
        assert load_config(config_file, seed=8).config_hash != a.config_hash

    def test_unknown_repo(self, config_file):
        with pytest.raises(InputError):
            load_config(config_file).repo("missing")

    @pytest.mark.parametrize(
        "text",
        [
            "split_ratio: 1.5\n",
            "- just\n- a list\n",
            "repos: {demo: here}\n",
            "repos:\n  - id: x\n",
            "repos:\n  - {id: a, path: p}\n  - {id: a, path: q}\n",
            "models: [rf]\n",
            "keywords: []\n",
            "split_ratio: [\n",
        ],
    )
    def test_invalid_files(self, tmp_path, text):
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(InputError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_config(tmp_path / "nope.yaml")


class TestArtifacts:
    """Tests for artifact writers and readers."""

    META = artifact_meta(5, "abc")

    def test_json_embeds_meta(self, tmp_path):
        path = write_json(tmp_path / "report.json", {"rows": [1, 2]}, self.META)
        data = read_json(path)
        assert data["meta"]["seed"] == 5
        assert data["meta"]["config_hash"] == "abc"
        assert "tool_version" in data["meta"]
        assert data["rows"] == [1, 2]

    def test_csv_has_sidecar(self, tmp_path):
        frame = pd.DataFrame({"repo_id": ["r"], "commit_id": ["0123"], "method": ["m"], "x": [1.5]})
        path = write_csv(tmp_path / "table.csv", frame, self.META)
        assert path.read_text().splitlines()[0] == "repo_id,commit_id,method,x"
        assert json.loads(sidecar_path(path).read_text())["seed"] == 5
        assert read_csv(path)["commit_id"].tolist() == ["0123"]

    def test_jsonl_round_trip(self, tmp_path):
        path = write_jsonl(tmp_path / "rows.jsonl", [{"a": 1}, {"a": 2}], self.META)
        assert read_jsonl(path) == [{"a": 1}, {"a": 2}]
        assert sidecar_path(path).exists()

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        atomic_write_text(tmp_path / "out" / "a.txt", "one")
        atomic_write_text(tmp_path / "out" / "a.txt", "two")
        assert [p.name for p in (tmp_path / "out").iterdir()] == ["a.txt"]
        assert (tmp_path / "out" / "a.txt").read_text() == "two"

    def test_missing_artifact(self, tmp_path):
        with pytest.raises(InputError) as excinfo:
            require_artifact(tmp_path / "dataset.csv")
        assert "dataset.csv" in str(excinfo.value)

    def test_invalid_json(self, tmp_path):
        (tmp_path / "broken.json").write_text("{")
        with pytest.raises(InputError):
            read_json(tmp_path / "broken.json")
        (tmp_path / "broken.jsonl").write_text('{"a": 1}\nnope\n')
        with pytest.raises(InputError):
            read_jsonl(tmp_path / "broken.jsonl")

    def test_digest_and_fingerprint(self, tmp_path):
        path = tmp_path / "f.txt"
        assert file_digest(path) == "missing"
        path.write_text("x")
        assert file_digest(path) != "missing"
        assert fingerprint(["a", "b"]) != fingerprint(["b", "a"])
        assert fingerprint(["ab"]) != fingerprint(["a", "b"])


class TestStageState:
    """Tests for persisted stage fingerprints."""

    def test_record_and_reload(self, tmp_path):
        StageState(tmp_path).record("mine", "f1")
        state = StageState(tmp_path)
        assert state.get("mine") == "f1"
        state.forget("mine")
        assert StageState(tmp_path).get("mine") is None

    def test_unreadable_file_is_ignored(self, tmp_path):
        (tmp_path / STAGES_FILE).write_text("not json")
        assert StageState(tmp_path).get("mine") is None


class TestStageTimer:
    """Tests for stage timing logs."""

    @pytest.fixture(autouse=True)
    def propagate(self, monkeypatch):
        monkeypatch.setattr(logging.getLogger("workflow"), "propagate", True)

    def test_logs_success(self, caplog):
        with caplog.at_level(logging.INFO, logger="workflow.timing"):
            with stage_timer("mine"):
                pass
        assert "stage mine ok" in caplog.text

    def test_logs_failure_and_reraises(self, caplog):
        with caplog.at_level(logging.INFO, logger="workflow.timing"):
            with pytest.raises(RuntimeError):
                with stage_timer("train"):
                    raise RuntimeError("boom")
        assert "stage train failed" in caplog.text

"""
Artifact I/O for the pipeline output directory.

Every write goes to a temp file in the target directory and is moved into
place with os.replace. JSON artifacts embed a ``meta`` object; CSV and
JSONL artifacts get a ``<name>.meta.json`` sidecar so their headers stay
fixed.
"""
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable

import pandas as pd

from residual_faults import __version__
from residual_faults.errors import InputError

logger = logging.getLogger(__name__)

STAGES_FILE = ".stages.json"


def artifact_meta(seed: int, config_hash: str) -> dict:
    return {"seed": int(seed), "config_hash": config_hash, "tool_version": __version__}


def atomic_write_text(path: Path | str, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _dumps(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def sidecar_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_json(path: Path | str, data: dict, meta: dict) -> Path:
    return atomic_write_text(path, _dumps({"meta": meta, **data}))


def write_jsonl(path: Path | str, rows: Iterable[dict], meta: dict) -> Path:
    text = "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
    atomic_write_text(sidecar_path(path), _dumps(meta))
    return atomic_write_text(path, text)


def write_csv(path: Path | str, frame: pd.DataFrame, meta: dict) -> Path:
    atomic_write_text(sidecar_path(path), _dumps(meta))
    return atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def write_text(path: Path | str, text: str, meta: dict) -> Path:
    atomic_write_text(sidecar_path(path), _dumps(meta))
    return atomic_write_text(path, text)


def require_artifact(path: Path | str) -> Path:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing artifact {path}; run the stage that produces it first")
    return path


def read_json(path: Path | str) -> dict:
    try:
        return json.loads(require_artifact(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def read_jsonl(path: Path | str) -> list[dict]:
    rows = []
    for n, line in enumerate(require_artifact(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{n} is not valid JSON: {exc}") from exc
    return rows


def read_csv(path: Path | str) -> pd.DataFrame:
    path = require_artifact(path)
    try:
        return pd.read_csv(path, dtype={"repo_id": str, "commit_id": str, "method": str}, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path} is not a readable CSV: {exc}") from exc


def file_digest(path: Path | str) -> str:
    path = Path(path)
    if not path.exists():
        return "missing"
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class StageState:
    """Fingerprints of completed stages, stored in ``<out>/.stages.json``."""

    def __init__(self, out_dir: Path | str):
        self.path = Path(out_dir) / STAGES_FILE
        self._data: dict[str, str] = {}
        if self.path.exists():
            try:
                self._data = json.loads(self.path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                logger.warning("Ignoring unreadable %s", self.path)

    def get(self, stage: str) -> str | None:
        return self._data.get(stage)

    def record(self, stage: str, fingerprint: str) -> None:
        self._data[stage] = fingerprint
        atomic_write_text(self.path, json.dumps(self._data, indent=2, sort_keys=True) + "\n")

    def forget(self, stage: str) -> None:
        if self._data.pop(stage, None) is not None:
            atomic_write_text(self.path, json.dumps(self._data, indent=2, sort_keys=True) + "\n")


def fingerprint(parts: Iterable[str]) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()

"""
Dataset assembly, commit-grouped splitting and statement-level statistics.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from residual_faults.catalog import FEATURE_COLUMNS, KEY_COLUMNS, PROCESS_METRICS, PRODUCT_METRICS
from residual_faults.errors import DuplicateKeyError, InputError, LeakageError
from residual_faults.learners.base import FeatureMatrix
from residual_faults.naturalness import BOS, EOS, tokenize_source

logger = logging.getLogger(__name__)

COMMIT_KEY = ["repo_id", "commit_id"]
DATASET_COLUMNS = [*KEY_COLUMNS, *FEATURE_COLUMNS, "label"]
LABEL_TARGETS = {"PostRelease": 1, "PreRelease": 0, "Unknown": -1}


@dataclass
class Dataset:
    frame: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in DATASET_COLUMNS if c not in self.frame.columns]
        if missing:
            raise InputError(f"dataset is missing columns: {', '.join(missing[:10])}")
        self.frame = self.frame[DATASET_COLUMNS].reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def labelled(self) -> "Dataset":
        """Rows with a binary label (Unknown rows removed)."""
        return Dataset(self.frame[self.frame["label"].isin([0, 1])])

    def commit_keys(self) -> set[tuple[str, str]]:
        return set(zip(self.frame["repo_id"], self.frame["commit_id"]))

    def features(self) -> FeatureMatrix:
        data = self.labelled.frame
        return FeatureMatrix(
            values=data[list(FEATURE_COLUMNS)].to_numpy(dtype=float),
            columns=FEATURE_COLUMNS,
            labels=data["label"].to_numpy(dtype=int),
        )


def _check_unique(frame: pd.DataFrame, keys: Sequence[str], name: str) -> None:
    dup = frame.duplicated(subset=list(keys), keep=False)
    if dup.any():
        collisions = sorted({tuple(str(v) for v in row) for row in frame.loc[dup, list(keys)].itertuples(index=False)})
        logger.error("%d duplicate keys in %s", len(collisions), name)
        raise DuplicateKeyError(collisions)


def assemble_dataset(
    labels: pd.DataFrame,
    product: pd.DataFrame,
    process: pd.DataFrame,
    entropy: pd.DataFrame,
    include_unknown: bool = False,
    zero_fill: bool = False,
) -> Dataset:
    """
    Join commit labels with the per-method metric tables on
    (repo_id, commit_id, method). Product rows define the methods; rows
    missing process or entropy values are dropped, or zero-filled when
    ``zero_fill`` is set.
    """
    keys = list(KEY_COLUMNS)
    _check_unique(labels, COMMIT_KEY, "labels")
    _check_unique(product, keys, "product metrics")
    _check_unique(process, keys, "process metrics")
    _check_unique(entropy, keys, "entropy")

    targets = labels[COMMIT_KEY].copy()
    targets["label"] = labels["label"].map(lambda v: LABEL_TARGETS.get(v, v)).astype(int)
    if not include_unknown:
        targets = targets[targets["label"] != -1]

    frame = product[keys + list(PRODUCT_METRICS)].merge(targets, on=COMMIT_KEY, how="inner")
    frame = frame.merge(entropy[keys + ["ENT"]], on=keys, how="left", indicator="_ent")
    frame = frame.merge(process[keys + list(PROCESS_METRICS)], on=keys, how="left", indicator="_proc")
    incomplete = (frame["_ent"] != "both") | (frame["_proc"] != "both")
    if incomplete.any():
        if zero_fill:
            logger.warning("Zero-filling %d rows with missing process or entropy values", int(incomplete.sum()))
            frame[list(FEATURE_COLUMNS)] = frame[list(FEATURE_COLUMNS)].fillna(0.0)
        else:
            for row in frame.loc[incomplete, keys].itertuples(index=False):
                logger.warning("Dropping %s/%s %s: missing process or entropy values", row.repo_id, row.commit_id[:10], row.method)
            frame = frame[~incomplete]
    frame = frame.drop(columns=["_ent", "_proc"])
    frame[list(FEATURE_COLUMNS)] = frame[list(FEATURE_COLUMNS)].astype(float)
    if not np.all(np.isfinite(frame[list(FEATURE_COLUMNS)].to_numpy())):
        raise InputError("assembled features contain NaN or infinite values")
    frame = frame.sort_values(keys, kind="mergesort")
    logger.info("Assembled %d rows from %d labelled commits", len(frame), len(targets))
    return Dataset(frame)


def check_leakage(train: Dataset, test: Dataset) -> None:
    shared = train.commit_keys() & test.commit_keys()
    if shared:
        raise LeakageError(f"{len(shared)} commits appear in both splits, e.g. {sorted(shared)[0]}")


def split_dataset(
    dataset: Dataset,
    ratio: float = 0.9,
    seed: int = 0,
    holdout_repos: Iterable[str] = (),
) -> tuple[Dataset, Dataset]:
    """
    Commit-grouped split. Rows of hold-out repositories all go to test;
    the remaining commits are shuffled by ``seed`` and taken into train
    until it holds at least ``ratio`` of those rows.
    """
    if not 0 < ratio < 1:
        raise InputError(f"split ratio must be in (0, 1), got {ratio}")
    frame = dataset.labelled.frame
    holdout = set(holdout_repos)
    held = frame["repo_id"].isin(holdout)
    pool = frame[~held]
    if len(pool) < 2:
        raise InputError("need at least two rows outside hold-out repositories to split")

    sizes = pool.groupby(COMMIT_KEY, sort=True).size()
    groups = list(sizes.index)
    if len(groups) < 2:
        raise InputError("need at least two commits to split")
    order = np.random.default_rng(seed).permutation(len(groups))
    target = ratio * len(pool)
    train_keys, test_keys = [], []
    taken = 0
    for i in order:
        key = groups[i]
        if taken < target:
            train_keys.append(key)
            taken += int(sizes[key])
        else:
            test_keys.append(key)
    if not test_keys:
        test_keys.append(train_keys.pop())

    index = pool.set_index(COMMIT_KEY).index
    train_frame = pool[index.isin(train_keys)]
    test_frame = pd.concat([pool[index.isin(test_keys)], frame[held]])
    train, test = Dataset(train_frame), Dataset(test_frame.sort_values(list(KEY_COLUMNS), kind="mergesort"))
    check_leakage(train, test)
    logger.info("Split %d rows into %d train / %d test (seed %d)", len(frame), len(train), len(test), seed)
    return train, test


def _code_tokens(text: str) -> list[str]:
    return [t for t in tokenize_source(text) if t not in (BOS, EOS)]


def dataset_stats(
    rows: Iterable[dict],
    split: str | None = None,
    label: int | None = None,
    bins: int = 20,
) -> dict:
    """
    Statement-level statistics over method sources. Each row carries
    ``source`` and optionally ``split`` and ``label`` used by the filters;
    identical sources are counted once.
    """
    sources = []
    seen = set()
    for row in rows:
        if split is not None and row.get("split") != split:
            continue
        if label is not None and row.get("label") != label:
            continue
        text = row["source"]
        if text in seen:
            continue
        seen.add(text)
        sources.append(text)

    statements = set()
    tokens = set()
    per_method = []
    for text in sources:
        count = 0
        for line in text.splitlines():
            stmt = line.strip()
            if not stmt:
                continue
            statements.add(stmt)
            toks = _code_tokens(stmt)
            tokens.update(toks)
            count += len(toks)
        per_method.append(count)
    per_statement = [len(_code_tokens(s)) for s in sorted(statements)]
    avg = float(np.mean(per_statement)) if per_statement else 0.0
    if per_method:
        counts, edges = np.histogram(per_method, bins=bins)
    else:
        counts, edges = np.zeros(0, dtype=int), np.zeros(0)
    return {
        "split": split,
        "label": label,
        "methods": len(sources),
        "unique_statements": len(statements),
        "unique_tokens": len(tokens),
        "avg_tokens_per_statement": avg,
        "histogram": {"counts": counts.tolist(), "edges": [float(e) for e in edges]},
    }

"""
Pipeline stages. Each stage reads artifacts from the output directory,
calls into residual_faults and writes its own artifacts atomically.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from django.conf import settings

from residual_faults.catalog import FEATURE_COLUMNS, KEY_COLUMNS, PROCESS_METRICS, PRODUCT_METRICS
from residual_faults.classifier import Label, classify_commits
from residual_faults.errors import InputError, UnparseableSourceError
from residual_faults.evaluation import evaluate_model, mcnemar_matrix, render_eval_table
from residual_faults.explain import (
    impurity_importance,
    permutation_importance,
    shapley_direction_summary,
    top_features,
)
from residual_faults.history import HistoryIndex, process_metrics
from residual_faults.issue_client import append_issues, get_client
from residual_faults.issues import load_contributors, load_issues
from residual_faults.learners import load_model, predict
from residual_faults.learners.anomaly import fit_isolation_forest, fit_lof
from residual_faults.learners.boosting import train_gbt
from residual_faults.learners.forest import train_random_forest
from residual_faults.learners.scaling import ScalerParams, apply_scaler, fit_scaler
from residual_faults.mining import CommitRecord, ReleaseInfo, RepositoryMiner, head_sources, open_git_repo, read_snapshot
from residual_faults.naturalness import NgramModel, cross_entropy, tokenize_source, train_ngram
from residual_faults.normalize import normalize_code
from residual_faults.product_metrics import ProjectIndex, changed_methods, product_metrics_row
from residual_faults.representation import load_embeddings, orthogonality_report
from residual_faults.syntax import UnitKind, parse_source
from workflow import artifacts
from workflow.dataset import Dataset, assemble_dataset, dataset_stats, split_dataset
from workflow.pipeline_config import PipelineConfig

logger = logging.getLogger(__name__)

SUPERVISED_MODELS = ("random_forest", "gbt")
ANOMALY_MODELS = ("isolation_forest", "lof")
MODEL_NAMES = SUPERVISED_MODELS + ANOMALY_MODELS


def _meta(cfg: PipelineConfig) -> dict:
    return artifacts.artifact_meta(cfg.seed, cfg.config_hash)


def _path(cfg: PipelineConfig, name: str) -> Path:
    return cfg.out / name


def _repo_state(cfg: PipelineConfig) -> list[str]:
    parts = []
    for repo in cfg.repos:
        git_repo = open_git_repo(repo.path)
        refs = sorted(f"{t.name}={t.commit.hexsha}" for t in git_repo.tags)
        parts.append(f"{repo.id}:{git_repo.head.commit.hexsha}:{','.join(refs)}")
    return parts


def _labelled_commits(cfg: PipelineConfig) -> list[dict]:
    rows = artifacts.read_jsonl(_path(cfg, "labels.jsonl"))
    keep = {Label.PRE_RELEASE.value, Label.POST_RELEASE.value}
    if cfg.include_unknown:
        keep.add(Label.UNKNOWN.value)
    return [r for r in rows if r["label"] in keep]


# ---------------------------------------------------------------------------
# mine / classify


def mine(cfg: PipelineConfig, fetch_issues: bool = False) -> None:
    if not cfg.repos:
        raise InputError("no repositories configured")
    commits: list[CommitRecord] = []
    releases = {}
    for repo in cfg.repos:
        miner = RepositoryMiner(repo.path, cfg.keywords, repo.id)
        found = miner.scan_bugfix_commits()
        commits.extend(found)
        releases[repo.id] = miner.detect_first_stable_release().to_dict()
        if fetch_issues and repo.github:
            numbers = [c.linked_issue_id for c in found if c.linked_issue_id is not None]
            client = get_client(repo.github, settings.RESIDUALS_ISSUE_CACHE, token=settings.GITHUB_TOKEN)
            target = repo.issues or str(_path(cfg, f"issues/{repo.id}.jsonl"))
            written = append_issues(target, client.fetch_many(numbers))
            logger.info("Appended %d issues to %s", written, target)
    artifacts.write_jsonl(_path(cfg, "commits.jsonl"), (c.to_dict() for c in commits), _meta(cfg))
    artifacts.write_json(_path(cfg, "releases.json"), {"releases": releases}, _meta(cfg))


def _issues_path(cfg: PipelineConfig, repo) -> str | None:
    if repo.issues:
        return repo.issues
    fetched = _path(cfg, f"issues/{repo.id}.jsonl")
    return str(fetched) if fetched.exists() else None


def classify(cfg: PipelineConfig) -> None:
    commits = [CommitRecord.from_json(r) for r in artifacts.read_jsonl(_path(cfg, "commits.jsonl"))]
    releases = artifacts.read_json(_path(cfg, "releases.json"))["releases"]
    rows = []
    counts: dict[str, int] = {}
    for repo in cfg.repos:
        repo_commits = [c for c in commits if c.repo_id == repo.id]
        release = ReleaseInfo.from_dict(releases.get(repo.id, {}))
        issues = load_issues(_issues_path(cfg, repo))
        contributors = load_contributors(repo.contributors)
        for commit, result in classify_commits(repo_commits, issues, contributors, release):
            rows.append(result.to_dict(commit))
            counts[result.label.value] = counts.get(result.label.value, 0) + 1
    logger.info("Classified %d commits: %s", len(rows), ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    artifacts.write_jsonl(_path(cfg, "labels.jsonl"), rows, _meta(cfg))


# ---------------------------------------------------------------------------
# metrics / entropy


@dataclass
class ExtractionCounters:
    commits: int = 0
    missing_commits: int = 0
    unparseable_files: int = 0
    methods: int = 0


def _extract_repo(cfg: PipelineConfig, repo, commits: list[dict], counters: ExtractionCounters):
    index = HistoryIndex.from_repository(repo.path, repo.id)
    product_rows, process_rows, method_rows = [], [], []
    for row in commits:
        info = index.commit(row["commit_id"])
        if info is None:
            counters.missing_commits += 1
            logger.warning("Commit %s not found in %s history", row["commit_id"][:10], repo.id)
            continue
        counters.commits += 1
        project = ProjectIndex.build(read_snapshot(repo.path, info.commit_id, parent=True))
        for change in info.python_changes:
            if not change.source_before or not change.old_path:
                continue
            names = changed_methods(change.source_before, change.source_after, change.deleted, change.added)
            if not names:
                continue
            try:
                root = parse_source(change.source_before)
            except UnparseableSourceError:
                counters.unparseable_files += 1
                logger.warning("Skipping unparseable %s at %s", change.old_path, info.commit_id[:10])
                continue
            target_path = change.new_path or change.old_path
            for qname in names:
                method = f"{change.old_path}::{qname}"
                key = {"repo_id": repo.id, "commit_id": info.commit_id, "method": method}
                product, presence = product_metrics_row(root, qname, project, change.old_path)
                product_rows.append({**key, **product, "presence": presence})
                history = index.build_history_slice((target_path, qname), info.timestamp, info.commit_id)
                process_rows.append({**key, **process_metrics(history, cfg.keywords)})
                unit = root.find(qname, UnitKind.METHOD)
                method_rows.append({
                    **key,
                    "path": change.old_path,
                    "qualified_name": qname,
                    "label": row["label"],
                    "source": unit.body_text if unit is not None else "",
                })
                counters.methods += 1
    return product_rows, process_rows, method_rows


def metrics(cfg: PipelineConfig) -> None:
    commits = _labelled_commits(cfg)
    counters = ExtractionCounters()
    product_rows, process_rows, method_rows = [], [], []
    for repo in cfg.repos:
        repo_commits = [c for c in commits if c["repo_id"] == repo.id]
        if not repo_commits:
            continue
        p, q, m = _extract_repo(cfg, repo, repo_commits, counters)
        product_rows += p
        process_rows += q
        method_rows += m
    logger.info(
        "Extracted %d methods from %d commits (%d missing, %d unparseable files)",
        counters.methods, counters.commits, counters.missing_commits, counters.unparseable_files,
    )
    keys = list(KEY_COLUMNS)
    product = pd.DataFrame(product_rows, columns=[*keys, *PRODUCT_METRICS, "presence"])
    process = pd.DataFrame(process_rows, columns=[*keys, *PROCESS_METRICS])
    artifacts.write_csv(_path(cfg, "product_metrics.csv"), product, _meta(cfg))
    artifacts.write_csv(_path(cfg, "process_metrics.csv"), process, _meta(cfg))
    artifacts.write_jsonl(_path(cfg, "methods.jsonl"), method_rows, _meta(cfg))


def _entropy_corpus(cfg: PipelineConfig) -> list[list[str]]:
    corpus_dir = cfg.entropy.get("corpus")
    if corpus_dir:
        root = Path(corpus_dir)
        if not root.is_dir():
            raise InputError(f"entropy corpus directory not found: {root}")
        files = sorted(root.rglob("*.py"))
        return [tokenize_source(f.read_text(encoding="utf-8", errors="replace")) for f in files]
    fault_ids = {(r["repo_id"], r["commit_id"]) for r in artifacts.read_jsonl(_path(cfg, "labels.jsonl"))}
    touched: dict[str, set[str]] = {}
    for c in artifacts.read_jsonl(_path(cfg, "commits.jsonl")):
        if (c["repo_id"], c["commit_id"]) in fault_ids:
            touched.setdefault(c["repo_id"], set()).update(c["changed_files"])
    corpus = []
    for repo in cfg.repos:
        sources = head_sources(repo.path)
        kept = {p: s for p, s in sources.items() if p not in touched.get(repo.id, set())}
        if not kept:
            logger.warning("Every file of %s was touched by a fault; training on all HEAD files", repo.id)
            kept = sources
        corpus.extend(tokenize_source(kept[p]) for p in sorted(kept))
    return corpus


def entropy(cfg: PipelineConfig) -> None:
    model = train_ngram(_entropy_corpus(cfg), int(cfg.entropy["order"]), float(cfg.entropy["k"]))
    rows = []
    for m in artifacts.read_jsonl(_path(cfg, "methods.jsonl")):
        ent = cross_entropy(model, tokenize_source(m["source"]))
        rows.append({"repo_id": m["repo_id"], "commit_id": m["commit_id"], "method": m["method"], "ENT": ent})
    artifacts.write_text(_path(cfg, "ngram.txt"), model.dumps(), _meta(cfg))
    artifacts.write_csv(_path(cfg, "entropy.csv"), pd.DataFrame(rows, columns=[*KEY_COLUMNS, "ENT"]), _meta(cfg))


def load_ngram(cfg: PipelineConfig) -> NgramModel:
    return NgramModel.loads(artifacts.require_artifact(_path(cfg, "ngram.txt")).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# assemble / split


def assemble(cfg: PipelineConfig) -> None:
    labels = pd.DataFrame(artifacts.read_jsonl(_path(cfg, "labels.jsonl")), columns=["repo_id", "commit_id", "label"])
    dataset = assemble_dataset(
        labels,
        artifacts.read_csv(_path(cfg, "product_metrics.csv")),
        artifacts.read_csv(_path(cfg, "process_metrics.csv")),
        artifacts.read_csv(_path(cfg, "entropy.csv")),
        include_unknown=cfg.include_unknown,
        zero_fill=cfg.zero_fill_missing,
    )
    artifacts.write_csv(_path(cfg, "dataset.csv"), dataset.frame, _meta(cfg))
    methods = {(m["repo_id"], m["commit_id"], m["method"]): m["source"] for m in artifacts.read_jsonl(_path(cfg, "methods.jsonl"))}
    sources = []
    for row in dataset.frame[[*KEY_COLUMNS, "label"]].itertuples(index=False):
        text = methods.get((row.repo_id, row.commit_id, row.method), "")
        normalized = normalize_code(text)
        sources.append({
            "repo_id": row.repo_id,
            "commit_id": row.commit_id,
            "method": row.method,
            "label": int(row.label),
            "parsed": normalized.parsed,
            "source": normalized.text,
        })
    artifacts.write_jsonl(_path(cfg, "sources.jsonl"), sources, _meta(cfg))


def load_dataset(path: Path) -> Dataset:
    return Dataset(artifacts.read_csv(path))


def split(cfg: PipelineConfig) -> None:
    dataset = load_dataset(_path(cfg, "dataset.csv"))
    holdout = [r.id for r in cfg.repos if r.holdout]
    train, test = split_dataset(dataset, cfg.split_ratio, cfg.seed, holdout)
    artifacts.write_csv(_path(cfg, "train.csv"), train.frame, _meta(cfg))
    artifacts.write_csv(_path(cfg, "test.csv"), test.frame, _meta(cfg))


# ---------------------------------------------------------------------------
# train / evaluate / mcnemar / explain


def _load_scaler(cfg: PipelineConfig) -> ScalerParams:
    return ScalerParams.from_dict(artifacts.read_json(_path(cfg, "models/scaler.json"))["scaler"])


def _load_models(cfg: PipelineConfig) -> dict:
    models = {}
    for name in MODEL_NAMES:
        path = artifacts.require_artifact(_path(cfg, f"models/{name}.json"))
        models[name] = load_model(path.read_text(encoding="utf-8"))
    return models


def train(cfg: PipelineConfig) -> None:
    fm = load_dataset(_path(cfg, "train.csv")).features()
    scaler = fit_scaler(fm.values)
    X = apply_scaler(scaler, fm.values)
    y = fm.labels
    columns = FEATURE_COLUMNS
    lof_cfg = dict(cfg.models["lof"])
    if int(lof_cfg["k"]) >= len(X):
        lof_cfg["k"] = max(1, len(X) - 1)
        logger.warning("LOF k reduced to %d for %d training rows", lof_cfg["k"], len(X))
    models = {
        "random_forest": train_random_forest(X, y, cfg.models["random_forest"], cfg.seed, columns),
        "gbt": train_gbt(X, y, cfg.models["gbt"], cfg.seed, columns),
        "isolation_forest": fit_isolation_forest(X, cfg.models["isolation_forest"], cfg.seed, columns),
        "lof": fit_lof(X, config=lof_cfg, columns=columns),
    }
    artifacts.write_json(_path(cfg, "models/scaler.json"), {"scaler": scaler.to_dict(), "columns": list(columns)}, _meta(cfg))
    for name, model in models.items():
        artifacts.write_text(_path(cfg, f"models/{name}.json"), model.dumps() + "\n", _meta(cfg))


def _scaled_test(cfg: PipelineConfig) -> tuple[Dataset, np.ndarray, np.ndarray]:
    test = load_dataset(_path(cfg, "test.csv")).labelled
    fm = test.features()
    return test, apply_scaler(_load_scaler(cfg), fm.values), fm.labels


def evaluate(cfg: PipelineConfig) -> None:
    test, X, y = _scaled_test(cfg)
    models = _load_models(cfg)
    resamples = int(cfg.evaluation["bootstrap_resamples"])
    predictions = test.frame[list(KEY_COLUMNS)].copy()
    predictions["label"] = y
    reports = []
    for i, name in enumerate(MODEL_NAMES):
        preds = predict(models[name], X)
        predictions[name] = preds
        reports.append(evaluate_model(name, preds, y, resamples, cfg.seed + 100 * i))
    artifacts.write_csv(_path(cfg, "predictions.csv"), predictions, _meta(cfg))
    artifacts.write_json(_path(cfg, "evaluation.json"), {"reports": [r.to_dict() for r in reports]}, _meta(cfg))
    artifacts.write_text(_path(cfg, "evaluation.txt"), render_eval_table(reports), _meta(cfg))


def mcnemar(cfg: PipelineConfig) -> None:
    frame = artifacts.read_csv(_path(cfg, "predictions.csv"))
    predictions = {name: frame[name].to_numpy(dtype=int) for name in MODEL_NAMES if name in frame.columns}
    pairs = mcnemar_matrix(predictions, frame["label"].to_numpy(dtype=int))
    artifacts.write_json(_path(cfg, "mcnemar.json"), {"pairs": pairs}, _meta(cfg))


def _render_explain(report: dict) -> str:
    lines = []
    for name, data in report.items():
        lines.append(f"{name}: top features")
        for rank, item in enumerate(data["top"], start=1):
            lines.append(
                f"  {rank:2d}. {item['feature']:<8} impurity={item['impurity']:.4f} "
                f"permutation={item['permutation_drop']:+.4f} shapley={item['shapley_mean']:+.4f}"
            )
    return "\n".join(lines) + "\n"


def explain(cfg: PipelineConfig) -> None:
    _, X_test, y_test = _scaled_test(cfg)
    train_fm = load_dataset(_path(cfg, "train.csv")).features()
    X_train = apply_scaler(_load_scaler(cfg), train_fm.values)
    models = _load_models(cfg)
    ev = cfg.evaluation
    rng = np.random.default_rng(cfg.seed)
    n_bg = min(int(ev["shapley_background"]), len(X_train))
    background = X_train[np.sort(rng.choice(len(X_train), size=n_bg, replace=False))]
    rows = X_test[: int(ev["shapley_rows"])]
    report = {}
    for name in SUPERVISED_MODELS:
        model = models[name]
        impurity = impurity_importance(model)
        drops = permutation_importance(model, X_test, y_test, "f1", cfg.seed, int(ev["permutation_repeats"]))
        shapley = shapley_direction_summary(model, rows, background, int(ev["shapley_samples"]), cfg.seed)
        features = {
            col: {"impurity": float(impurity[j]), "permutation_drop": float(drops[j]), "shapley_mean": float(shapley[j])}
            for j, col in enumerate(FEATURE_COLUMNS)
        }
        report[name] = {
            "features": features,
            "top": [{"feature": f, **features[f]} for f, _ in top_features(impurity, FEATURE_COLUMNS, 10)],
        }
    artifacts.write_json(_path(cfg, "explain.json"), {"models": report}, _meta(cfg))
    artifacts.write_text(_path(cfg, "explain.txt"), _render_explain(report), _meta(cfg))


# ---------------------------------------------------------------------------
# repr / stats


def embedding_id(repo_id: str, commit_id: str, method: str) -> str:
    return f"{repo_id}|{commit_id}|{method}"


def repr_analysis(cfg: PipelineConfig) -> None:
    if not cfg.repr.get("embeddings"):
        raise InputError("repr needs 'repr.embeddings' pointing at an embeddings CSV")
    embeddings = load_embeddings(cfg.repr["embeddings"])
    data = load_dataset(_path(cfg, "dataset.csv")).labelled.frame
    ids = [embedding_id(*k) for k in data[list(KEY_COLUMNS)].itertuples(index=False)]
    present = [i for i in ids if i in embeddings.index]
    if len(present) < len(ids):
        logger.warning("%d dataset rows have no embedding and are left out", len(ids) - len(present))
    if len(present) < 3:
        raise InputError("fewer than three dataset rows have embeddings")
    mask = np.isin(ids, present)
    summary, projection = orthogonality_report(
        data.loc[mask, list(FEATURE_COLUMNS)].to_numpy(dtype=float),
        embeddings.loc[present].to_numpy(dtype=float),
        float(cfg.repr["variance_threshold"]),
        int(cfg.repr["cca_components"]),
    )
    artifacts.write_json(_path(cfg, "repr_report.json"), {"summary": summary}, _meta(cfg))
    artifacts.write_csv(_path(cfg, "projection.csv"), pd.DataFrame(projection, columns=["group", "kind", "index", "x", "y"]), _meta(cfg))


def stats(cfg: PipelineConfig) -> None:
    sides = {}
    for side in ("train", "test"):
        frame = artifacts.read_csv(_path(cfg, f"{side}.csv"))
        sides.update({(r.repo_id, r.commit_id, r.method): side for r in frame[list(KEY_COLUMNS)].itertuples(index=False)})
    rows = []
    for s in artifacts.read_jsonl(_path(cfg, "sources.jsonl")):
        rows.append({**s, "split": sides.get((s["repo_id"], s["commit_id"], s["method"]))})
    tables = [
        dataset_stats(rows, split=side, label=label)
        for side in (None, "train", "test")
        for label in (None, 0, 1)
    ]
    artifacts.write_json(_path(cfg, "stats.json"), {"tables": tables}, _meta(cfg))


# ---------------------------------------------------------------------------
# registry


def _no_extra_inputs(cfg: PipelineConfig) -> list[str]:
    return []


@dataclass(frozen=True)
class Stage:
    name: str
    func: Callable[..., None]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    reads_repos: bool = False
    extra_inputs: Callable[[PipelineConfig], list[str]] = _no_extra_inputs


def _issue_files(cfg: PipelineConfig) -> list[str]:
    parts = []
    for repo in cfg.repos:
        for p in (_issues_path(cfg, repo), repo.contributors):
            parts.append(artifacts.file_digest(p) if p else "none")
    return parts


def _corpus_files(cfg: PipelineConfig) -> list[str]:
    corpus = cfg.entropy.get("corpus")
    if not corpus:
        return _repo_state(cfg)
    return [f"{p}:{artifacts.file_digest(p)}" for p in sorted(Path(corpus).rglob("*.py"))]


def _embedding_file(cfg: PipelineConfig) -> list[str]:
    path = cfg.repr.get("embeddings")
    return [artifacts.file_digest(path)] if path else ["none"]


MODEL_FILES = ("models/scaler.json", *(f"models/{n}.json" for n in MODEL_NAMES))

STAGES: dict[str, Stage] = {s.name: s for s in (
    Stage("mine", mine, (), ("commits.jsonl", "releases.json"), reads_repos=True),
    Stage("classify", classify, ("commits.jsonl", "releases.json"), ("labels.jsonl",), extra_inputs=_issue_files),
    Stage("metrics", metrics, ("labels.jsonl",), ("product_metrics.csv", "process_metrics.csv", "methods.jsonl"), reads_repos=True),
    Stage("entropy", entropy, ("methods.jsonl", "commits.jsonl", "labels.jsonl"), ("ngram.txt", "entropy.csv"), extra_inputs=_corpus_files),
    Stage("assemble", assemble, ("labels.jsonl", "product_metrics.csv", "process_metrics.csv", "entropy.csv", "methods.jsonl"), ("dataset.csv", "sources.jsonl")),
    Stage("split", split, ("dataset.csv",), ("train.csv", "test.csv")),
    Stage("train", train, ("train.csv",), MODEL_FILES),
    Stage("evaluate", evaluate, ("test.csv", *MODEL_FILES), ("predictions.csv", "evaluation.json", "evaluation.txt")),
    Stage("mcnemar", mcnemar, ("predictions.csv",), ("mcnemar.json",)),
    Stage("explain", explain, ("train.csv", "test.csv", *MODEL_FILES), ("explain.json", "explain.txt")),
    Stage("repr", repr_analysis, ("dataset.csv",), ("repr_report.json", "projection.csv"), extra_inputs=_embedding_file),
    Stage("stats", stats, ("sources.jsonl", "train.csv", "test.csv"), ("stats.json",)),
)}


def stage_fingerprint(cfg: PipelineConfig, stage: Stage) -> str:
    parts = [stage.name, cfg.config_hash, str(cfg.seed)]
    parts += [f"{name}:{artifacts.file_digest(_path(cfg, name))}" for name in stage.inputs]
    if stage.reads_repos:
        parts += _repo_state(cfg)
    parts += stage.extra_inputs(cfg)
    return artifacts.fingerprint(parts)


def outputs_exist(cfg: PipelineConfig, stage: Stage) -> bool:
    return all(_path(cfg, name).exists() for name in stage.outputs)

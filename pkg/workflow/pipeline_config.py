"""
Pipeline configuration: YAML file values layered over Django settings
defaults, with CLI flags on top.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml
from django.conf import settings

from residual_faults.errors import InputError
from residual_faults.learners.anomaly import DEFAULT_IF_CONFIG, DEFAULT_LOF_CONFIG
from residual_faults.learners.boosting import DEFAULT_GBT_CONFIG
from residual_faults.learners.forest import DEFAULT_FOREST_CONFIG
from residual_faults.mining import DEFAULT_KEYWORDS, normalise_keywords
from residual_faults.naturalness import DEFAULT_K, DEFAULT_ORDER

logger = logging.getLogger(__name__)


@dataclass
class RepoConfig:
    id: str
    path: str
    issues: str | None = None
    contributors: str | None = None
    github: str | None = None
    holdout: bool = False


@dataclass
class PipelineConfig:
    repos: list[RepoConfig] = field(default_factory=list)
    keywords: list[str] = field(default_factory=lambda: sorted(DEFAULT_KEYWORDS))
    split_ratio: float = 0.9
    seed: int = 42
    include_unknown: bool = False
    zero_fill_missing: bool = False
    entropy: dict = field(default_factory=lambda: {"order": DEFAULT_ORDER, "k": DEFAULT_K, "corpus": None})
    models: dict = field(default_factory=lambda: {
        "random_forest": dict(DEFAULT_FOREST_CONFIG),
        "gbt": dict(DEFAULT_GBT_CONFIG),
        "isolation_forest": dict(DEFAULT_IF_CONFIG),
        "lof": dict(DEFAULT_LOF_CONFIG),
    })
    evaluation: dict = field(default_factory=lambda: {
        "bootstrap_resamples": 10_000,
        "permutation_repeats": 5,
        "shapley_samples": 200,
        "shapley_background": 50,
        "shapley_rows": 50,
    })
    repr: dict = field(default_factory=lambda: {
        "embeddings": None,
        "variance_threshold": 0.95,
        "cca_components": 20,
    })
    out_dir: str = "out"

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical config, independent of the output directory."""
        data = self.to_dict()
        data.pop("out_dir", None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def repo(self, repo_id: str) -> RepoConfig:
        for r in self.repos:
            if r.id == repo_id:
                return r
        raise InputError(f"unknown repository id {repo_id!r}")


def _merge(defaults: dict, values: Any, name: str) -> dict:
    if values is None:
        return dict(defaults)
    if not isinstance(values, dict):
        raise InputError(f"config section {name!r} must be a mapping")
    return {**defaults, **values}


def _repos(raw: Any, base: Path) -> list[RepoConfig]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise InputError("config 'repos' must be a list")
    repos = []
    for item in raw:
        if not isinstance(item, dict) or "path" not in item:
            raise InputError(f"repository entry needs a 'path': {item!r}")

        def resolve(value):
            if value is None:
                return None
            p = Path(value)
            return str(p if p.is_absolute() else (base / p))

        path = resolve(item["path"])
        repos.append(RepoConfig(
            id=str(item.get("id") or Path(path).name),
            path=path,
            issues=resolve(item.get("issues")),
            contributors=resolve(item.get("contributors")),
            github=item.get("github"),
            holdout=bool(item.get("holdout", False)),
        ))
    ids = [r.id for r in repos]
    if len(set(ids)) != len(ids):
        raise InputError("repository ids must be unique")
    return repos


def load_config(path: str | Path | None = None, seed: int | None = None, out: str | Path | None = None) -> PipelineConfig:
    """
    Build the config: settings defaults, then the YAML file, then flags.
    Relative paths in the file resolve against the file's directory.
    """
    cfg = PipelineConfig(seed=settings.RESIDUALS_SEED, out_dir=settings.RESIDUALS_OUT_DIR)
    if settings.RESIDUALS_KEYWORDS:
        cfg.keywords = list(settings.RESIDUALS_KEYWORDS)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise InputError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise InputError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError(f"config file {path} must contain a mapping")
        base = path.resolve().parent
        cfg.repos = _repos(raw.get("repos"), base)
        if raw.get("keywords") is not None:
            cfg.keywords = list(raw["keywords"])
        cfg.split_ratio = float(raw.get("split_ratio", cfg.split_ratio))
        cfg.seed = int(raw.get("seed", cfg.seed))
        cfg.include_unknown = bool(raw.get("include_unknown", cfg.include_unknown))
        cfg.zero_fill_missing = bool(raw.get("zero_fill_missing", cfg.zero_fill_missing))
        cfg.entropy = _merge(cfg.entropy, raw.get("entropy"), "entropy")
        if cfg.entropy.get("corpus"):
            corpus = Path(cfg.entropy["corpus"])
            cfg.entropy["corpus"] = str(corpus if corpus.is_absolute() else base / corpus)
        models = raw.get("models") or {}
        if not isinstance(models, dict):
            raise InputError("config section 'models' must be a mapping")
        cfg.models = {name: _merge(defaults, models.get(name), name) for name, defaults in cfg.models.items()}
        cfg.evaluation = _merge(cfg.evaluation, raw.get("evaluation"), "evaluation")
        cfg.repr = _merge(cfg.repr, raw.get("repr"), "repr")
        if cfg.repr.get("embeddings"):
            emb = Path(cfg.repr["embeddings"])
            cfg.repr["embeddings"] = str(emb if emb.is_absolute() else base / emb)
        if raw.get("out_dir"):
            cfg.out_dir = str(raw["out_dir"])
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.out_dir = str(out)
    cfg.keywords = list(normalise_keywords(cfg.keywords))
    if not 0 < cfg.split_ratio < 1:
        raise InputError(f"split_ratio must be in (0, 1), got {cfg.split_ratio}")
    logger.debug("Loaded config %s (hash %s)", path, cfg.config_hash[:12])
    return cfg

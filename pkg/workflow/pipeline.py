"""
Stage orchestration: runs stages in order, skipping those whose inputs,
config and seed are unchanged since their outputs were written.
"""
import logging

from workflow.artifacts import StageState
from workflow.pipeline_config import PipelineConfig
from workflow.stages import STAGES, outputs_exist, stage_fingerprint
from workflow.timing import stage_timer

logger = logging.getLogger(__name__)

PIPELINE_ORDER = (
    "mine", "classify", "metrics", "entropy", "assemble", "split",
    "train", "evaluate", "mcnemar", "explain", "repr", "stats",
)


def run_stage(cfg: PipelineConfig, name: str, force: bool = True, **options) -> bool:
    """
    Run one stage. Returns False when it was skipped as up to date
    (only possible with ``force=False``).
    """
    stage = STAGES[name]
    cfg.out.mkdir(parents=True, exist_ok=True)
    state = StageState(cfg.out)
    before = stage_fingerprint(cfg, stage)
    if not force and state.get(name) == before and outputs_exist(cfg, stage):
        logger.info("stage %s up to date, skipping", name)
        return False
    state.forget(name)
    with stage_timer(name):
        stage.func(cfg, **options)
    state.record(name, before)
    return True


def run_pipeline(cfg: PipelineConfig, force: bool = False, fetch_issues: bool = False) -> list[str]:
    """Run every stage in order; returns the names of the stages that ran."""
    ran = []
    for name in PIPELINE_ORDER:
        if name == "repr" and not cfg.repr.get("embeddings"):
            logger.info("No embeddings configured, skipping repr")
            continue
        options = {"fetch_issues": fetch_issues} if name == "mine" else {}
        if run_stage(cfg, name, force=force, **options):
            ran.append(name)
    logger.info("Pipeline finished: %d stages ran", len(ran))
    return ran

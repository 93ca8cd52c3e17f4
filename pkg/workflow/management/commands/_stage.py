"""
Shared base for the pipeline management commands.

Every command accepts --config, --seed and --out. Input errors exit with
status 1, anything else with status 2.
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from residual_faults.errors import InputError
from workflow.pipeline import run_stage
from workflow.pipeline_config import PipelineConfig, load_config

logger = logging.getLogger(__name__)


class StageCommand(BaseCommand):
    stage: str = ""
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--config", default=None, help="Pipeline config file (YAML).")
        parser.add_argument("--seed", type=int, default=None, help="Override the configured seed.")
        parser.add_argument("--out", default=None, help="Output directory for artifacts.")

    def load(self, options) -> PipelineConfig:
        return load_config(options.get("config"), seed=options.get("seed"), out=options.get("out"))

    def execute_stage(self, cfg: PipelineConfig, options) -> None:
        run_stage(cfg, self.stage)

    def handle(self, *args, **options):
        try:
            cfg = self.load(options)
            self.execute_stage(cfg, options)
        except InputError as exc:
            raise CommandError(str(exc), returncode=1) from exc
        except CommandError:
            raise
        except Exception as exc:
            logger.exception("%s failed", self.stage or "command")
            raise CommandError(f"internal error: {exc}", returncode=2) from exc
        self.stdout.write(f"{self.stage}: done ({cfg.out})")

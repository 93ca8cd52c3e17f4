from workflow.management.commands._stage import StageCommand
from workflow.pipeline import run_pipeline


class Command(StageCommand):
    help = "Run every pipeline stage, skipping stages that are up to date."
    stage = "run"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--force", action="store_true", help="Re-run stages even when up to date.")
        parser.add_argument("--fetch-issues", action="store_true", help="Fetch linked GitHub issues while mining.")

    def execute_stage(self, cfg, options):
        ran = run_pipeline(cfg, force=options.get("force", False), fetch_issues=options.get("fetch_issues", False))
        self.stdout.write(f"ran: {', '.join(ran) or 'nothing'}")

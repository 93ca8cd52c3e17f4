from workflow.management.commands._stage import StageCommand
from workflow.pipeline import run_stage


class Command(StageCommand):
    help = "Scan repositories for bug-fix commits and stable release tags."
    stage = "mine"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--fetch-issues",
            action="store_true",
            help="Fetch linked GitHub issues into the issues export before classifying.",
        )

    def execute_stage(self, cfg, options):
        run_stage(cfg, self.stage, fetch_issues=options.get("fetch_issues", False))

from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Extract product and process metrics for each fault method."
    stage = "metrics"

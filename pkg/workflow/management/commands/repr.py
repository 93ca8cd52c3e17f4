from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Compare the metric space with an external embedding space."
    stage = "repr"

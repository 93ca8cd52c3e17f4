from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Evaluate every model on the test split with bootstrap CIs."
    stage = "evaluate"

from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Train the n-gram model and score each fault method's cross-entropy."
    stage = "entropy"

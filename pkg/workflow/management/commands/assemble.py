from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Join labels and metric tables into the dataset CSV."
    stage = "assemble"

from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Split the dataset into commit-disjoint train and test sets."
    stage = "split"

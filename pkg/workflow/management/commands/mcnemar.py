from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Run McNemar's test for every pair of models."
    stage = "mcnemar"

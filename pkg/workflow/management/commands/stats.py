from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Statement-level statistics of the normalized fault sources."
    stage = "stats"

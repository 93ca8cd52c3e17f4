from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Rank features by impurity, permutation drop and Shapley values."
    stage = "explain"

from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Train the scaler, supervised models and anomaly detectors."
    stage = "train"

from workflow.management.commands._stage import StageCommand


class Command(StageCommand):
    help = "Label mined bug-fix commits as pre- or post-release."
    stage = "classify"

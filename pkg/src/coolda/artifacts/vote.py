"""Vote tool artifact."""

from coolda.tools.vote import VoteToolFactory


def create_tool():
    return VoteToolFactory()

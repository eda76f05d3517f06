"""Forum tool artifact."""

from coolda.tools.forum import ForumToolFactory


def create_tool():
    return ForumToolFactory()

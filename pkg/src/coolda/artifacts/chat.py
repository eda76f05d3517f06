"""Chat tool artifact."""

from coolda.tools.chat import ChatToolFactory


def create_tool():
    return ChatToolFactory()

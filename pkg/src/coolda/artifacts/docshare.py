"""Shared-document tool artifact."""

from coolda.tools.docshare import DocShareToolFactory


def create_tool():
    return DocShareToolFactory()

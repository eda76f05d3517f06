"""Packaged tool artifacts, servable as plain files over HTTP.

Every artifact is a self-contained module exposing create_tool(); fetching
one of these files and executing it is the whole discovery story.
"""

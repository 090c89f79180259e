"""Timed-opacity checking and timing-parameter synthesis for timed automata."""

__version__ = "0.1.0"

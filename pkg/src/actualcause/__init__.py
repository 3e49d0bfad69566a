"""Actual causality and responsibility attribution in Dec-POMDPs."""

__version__ = "0.1.0"

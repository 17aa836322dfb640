"""Weakly supervised detection of code-search intent in programming web queries."""

__version__ = "0.1.0"

"""Compiler bug isolation: coverage-based file ranking refined by a chat model."""

__version__ = "0.1.0"

"""Conditional gradient and proximal gradient methods for composite multiobjective problems."""

__version__ = "0.1.0"

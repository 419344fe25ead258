"""Differentiable active-learning query-strategy search at desk scale."""

__version__ = "0.1.0"

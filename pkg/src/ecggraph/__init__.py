"""Arrhythmia classification with a GraphSAGE model over a feature-correlation graph."""

__version__ = "0.1.0"

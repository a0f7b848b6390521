"""Streaming concept-drift detection with threshold autoregressive models."""

__version__ = "0.1.0"

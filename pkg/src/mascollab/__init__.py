"""Sequential multi-agent reasoning with expert specialization."""

__version__ = "0.1.0"

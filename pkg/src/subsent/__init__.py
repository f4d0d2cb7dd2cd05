"""Sub-sentential extraction units for extractive summarization."""

__version__ = "0.1.0"

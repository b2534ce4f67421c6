"""Plain-language summarization engine with simulated reader feedback."""

__version__ = "0.1.0"

"""LLM-authored reward programs, refined with training and preference feedback."""

__version__ = "0.1.0"

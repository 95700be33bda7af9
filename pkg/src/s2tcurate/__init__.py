"""Curation tools for heterogeneous speech-to-text training corpora."""

__version__ = "0.1.0"

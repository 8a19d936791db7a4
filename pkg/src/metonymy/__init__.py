"""Metonymy resolution for common nouns: data model, mining, prompting, evaluation."""

__version__ = "0.1.0"

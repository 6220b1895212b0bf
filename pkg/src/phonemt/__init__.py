"""Phoneme-level versus text-level machine translation toolkit."""

__version__ = "0.1.0"

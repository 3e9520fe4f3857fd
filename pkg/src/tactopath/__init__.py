"""Desk-scale tactile polyp sensing pipeline."""

__version__ = "0.1.0"

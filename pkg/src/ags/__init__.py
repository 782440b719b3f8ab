"""Attribute-guided graph sampling toolkit."""

__version__ = "0.1.0"

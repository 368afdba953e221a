"""Covert active sensing and communication over bosonic thermal-loss channels."""

__version__ = "0.1.0"

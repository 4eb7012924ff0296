"""Deterministic discrete-event simulator of a small TCP/IP laboratory network."""

__version__ = "0.1.0"

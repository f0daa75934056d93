"""Behavioral simulator of RF analogue boundary modules on a mixed-signal test bus."""

__version__ = "0.1.0"

"""Garment digitization: single catalog image -> UV texture atlas."""

__version__ = "0.1.0"

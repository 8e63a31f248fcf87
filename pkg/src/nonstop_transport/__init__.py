"""Cooperative transport of a cable-suspended load by non-stopping aerial carriers."""

__version__ = "0.1.0"

"""Verification toolkit for truly concurrent process algebra and its actor model."""

__version__ = "0.1.0"

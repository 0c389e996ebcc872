"""Multisensor fusion navigation library and scenario simulator."""

__version__ = "0.1.0"

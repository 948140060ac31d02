"""Modeling toolkit for resonator-loaded superconducting metamaterial waveguides."""

__version__ = "0.1.0"

"""Numerical workbench for Møller maps of Dirac fields in U(1) backgrounds."""

__version__ = "0.1.0"

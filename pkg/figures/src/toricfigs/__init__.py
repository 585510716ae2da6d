"""Panels rendered from toricmc result CSVs.

This package reads only the documented CSV column contract; it never imports
the simulation code. Rendering is a pure function of the CSV bytes: fixed
style, no timestamps, so the same input yields the same image byte for byte.
"""

from .io import SchemaError, read_rows

__all__ = ["SchemaError", "read_rows"]

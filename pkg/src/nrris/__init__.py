"""Physically consistent non-reciprocal RIS modeling, design and simulation."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402,F401

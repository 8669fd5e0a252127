"""Finite-section laboratory for operator ideals between l_p spaces."""

__version__ = "0.1.0"

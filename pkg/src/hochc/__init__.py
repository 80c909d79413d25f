"""Encode higher-order recursion schemes as coinductive Horn clause programs
over rational trees, and check scheme (in)equivalence."""

__version__ = "0.1.0"

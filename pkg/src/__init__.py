"""
Synchronous Correlation Slices

Synchronous correlation sets, their tracial-model realizations, and exact
support values of y-slices of D_loc(n) and D_q(3).
"""

__version__ = "1.0.0"

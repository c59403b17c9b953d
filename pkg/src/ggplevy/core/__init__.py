"""Numerical core: special functions, random streams and the GGP law"""

__all__ = []

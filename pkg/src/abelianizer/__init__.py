"""Abelianization of SL(2,R) interval cocycles over interval exchange transformations."""

__version__ = "0.1.0"

"""Numerical toolkit for U(2,1), the complex hyperbolic plane and GL(3) Hecke algebras."""

__version__ = "0.1.0"

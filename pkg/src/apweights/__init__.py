"""Numerical checks for Muckenhoupt distance weights and weighted
Hardy-Sobolev inequalities near fractal sets in R^n."""

__version__ = "0.1.0"

"""Prolongation of conformal Killing tensor equations and symmetries of the
conformal Laplacian, computed with an abstract-index tensor engine."""

__version__ = "0.1.0"

"""Sample-free synthetic population synthesis from census marginals."""

__version__ = "0.1.0"

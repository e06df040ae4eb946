"""Green's functions of random matrix-valued Schrödinger operators on a strip."""

__version__ = "1.0.0"

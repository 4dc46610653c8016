"""Block Toeplitz and Hankel operators on the vector-valued Hardy space."""

__version__ = "0.1.0"

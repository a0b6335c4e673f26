"""Critical points of random band-limited fields and Gaussian random matrices."""
__version__ = "0.1.0"

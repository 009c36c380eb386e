"""Random bounded-degree coboundary expanders: generation and certification."""

__version__ = "0.1.0"

"""Three-factor certification of ML-based applications."""

__version__ = "0.1.0"

"""Gaussian low-frequency modules for domain adaptation, on a small numpy CNN."""

__version__ = "0.1.0"

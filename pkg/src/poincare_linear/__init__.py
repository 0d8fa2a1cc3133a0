"""Linear classifiers in the Poincaré ball and hyperboloid models."""

__version__ = "0.1.0"

"""Classical predictive surrogates for noisy parametric quantum circuits."""

__version__ = "0.1.0"

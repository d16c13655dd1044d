"""CFAR detection of sinusoids in colored noise with training-set standardized periodograms."""

__version__ = "0.1.0"

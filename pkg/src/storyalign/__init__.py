"""Story video/text alignment: Drop-DTW, evaluation metrics and dataset tooling."""

__version__ = "0.1.0"

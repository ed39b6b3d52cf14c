"""Bell nonlocality and nonclassical correlations in hybrid homodyne schemes."""

__version__ = "0.1.0"

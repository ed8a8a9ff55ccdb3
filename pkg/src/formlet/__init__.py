"""formlet: an interpreter for a subset of the FORM symbolic language."""

__version__ = "0.1.0"

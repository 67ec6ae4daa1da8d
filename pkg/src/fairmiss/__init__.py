"""Audit how rows with missing values shape group fairness in tabular classification."""

__version__ = "0.1.0"

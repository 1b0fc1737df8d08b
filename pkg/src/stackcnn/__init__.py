"""Stacked ensembles of shallow word-embedding CNNs for three-class tweet classification."""

__version__ = "0.1.0"

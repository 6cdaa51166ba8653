"""Dynamics of regular surface homeomorphisms: invariants, classification, conjugacies."""

__version__ = "0.1.0"

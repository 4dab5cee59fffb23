"""Unsupervised subspace alignment for cross-domain deception classification."""

__version__ = "0.1.0"

"""Computational companion to Ornstein's L1 non-inequality for 2x2 gradients."""

__version__ = "0.1.0"

"""Overlap-based cross-attention metrics, guidance losses and latent nursing."""

__version__ = "0.1.0"

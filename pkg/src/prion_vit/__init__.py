"""Prion-ViT: a Vision Transformer with gated persistent memory, for specklegram temperature regression."""

__version__ = "0.1.0"

"""Segmentation metrics and dual-memory reference machinery for semi-supervised VOS."""

__version__ = "0.1.0"

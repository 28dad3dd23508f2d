"""Certified fixed-point proximal gradient method for box-constrained QPs."""

"""Adaptive importance sampling for finite-sum SGD and SGLD."""
__version__ = "0.1.0"

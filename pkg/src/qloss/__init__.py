"""Exact simulation of loss distributions in rectangular and triangular multiport interferometers."""

__version__ = "0.1.0"

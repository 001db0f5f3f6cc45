"""Temporal logic policy search: TLTL specs, smoothed robustness, and a
trajectory-improvement policy search over time-varying linear-Gaussian policies."""

__version__ = "0.1.0"

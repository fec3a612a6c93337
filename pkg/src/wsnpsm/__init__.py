"""Simulated CSMA medium access with delay decomposition, sweep harness and
linear performance models for packet sending delay and packet loss."""

__version__ = "0.1.0"

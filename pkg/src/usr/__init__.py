"""Blind super-resolution with uncertainty-suppressed degradation representations."""

__version__ = "0.1.0"

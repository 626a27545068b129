"""Moment-guided Monte Carlo for the Boltzmann equation in one space dimension."""

__version__ = "0.1.0"

"""Simulation and parameter-estimation toolkit for domain-wall non-unitary quantum walks."""

__version__ = "0.1.0"

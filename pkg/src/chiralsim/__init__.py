"""Simulation toolkit for a parametrically pumped chiral waveguide coupler."""
__version__ = "0.1.0"

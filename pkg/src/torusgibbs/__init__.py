"""Numerical workbench for equilibrium states of toral center isometries."""

__version__ = "0.1.0"

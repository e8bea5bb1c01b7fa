"""Cube-complex geometry, gate projections, quasilines and windowed Bass-Serre trees."""

__version__ = "0.1.0"

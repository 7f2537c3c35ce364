"""Equilibrium measures for complex polynomial external fields."""
from .poly_core import Potential, EndpointSet

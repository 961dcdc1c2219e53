"""Hyperbolic graphs over convex planar domains: cone profiles, solvers and corner asymptotics."""

__version__ = "0.1.0"

"""Impersonation detection in line-of-sight underwater acoustic networks.

Simulation engine and analytics for a two-step, fingerprint-based
authentication scheme at an acoustic sink: distance bounding against a
trusted zone, nearest-neighbour outlier tests on distance/AoA/position
fingerprints with decision fusion, ML round-trip-time ranging in colored
noise, closed-form error probabilities, and Monte Carlo cross-validation.
"""

__version__ = "0.1.0"

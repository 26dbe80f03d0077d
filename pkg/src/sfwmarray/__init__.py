"""Heralded photon-pair source design in coupled silicon waveguide arrays.

Units throughout: lengths in um, propagation constants in rad/um, angular
frequencies in rad/fs.
"""

__version__ = "0.1.0"

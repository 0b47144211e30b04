"""
TWINDOT
Two dipole-dipole coupled quantum dots in a driven lossy cavity
"""

__version__ = "1.0.0"

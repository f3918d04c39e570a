"""
Nodal Lab - numerical laboratory for nodal-set lower bounds.

Frequency functions, doubling indices, plateau windows, cube-subdivision
censuses, the tunnel construction and nodal-measure experiments for explicit
harmonic functions and flat-torus Laplace eigenfunctions.
"""

__version__ = "1.0.0"

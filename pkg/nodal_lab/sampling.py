"""
Deterministic sample sets on spheres, balls and cubes.

Every set is a pure function of (dimension, resolution) and is cached, so
two calls with the same arguments return the same nodes in the same order.
"""
import math
from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from nodal_lab.errors import PreconditionError, UnsupportedDimension

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def sphere_quadrature(dim: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes on the unit sphere and weights summing to its area.

    n=2: trapezoid rule with ``order`` equispaced angles.
    n=3: Gauss-Legendre in cos(theta) with ``order`` nodes times the trapezoid
    rule in phi with ``2 * order`` nodes.
    """
    if order < 8:
        raise PreconditionError(f"quadrature order must be >= 8, got {order}")
    if dim == 2:
        theta = 2.0 * math.pi * np.arange(order) / order
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(order, 2.0 * math.pi / order)
    elif dim == 3:
        t, wt = leggauss(order)
        n_phi = 2 * order
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        ct, ph = np.meshgrid(t, phi, indexing="ij")
        st = np.sqrt(1.0 - ct**2)
        nodes = np.column_stack([
            (st * np.cos(ph)).ravel(),
            (st * np.sin(ph)).ravel(),
            ct.ravel(),
        ])
        weights = np.repeat(wt, n_phi) * (2.0 * math.pi / n_phi)
    else:
        raise UnsupportedDimension(f"spherical quadrature supports n in {{2, 3}}, got {dim}")
    return _frozen(nodes), _frozen(weights)


def unit_sphere_area(dim: int) -> float:
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


@lru_cache(maxsize=64)
def sphere_directions(dim: int, resolution: int) -> np.ndarray:
    """Unit directions: equispaced angles (n=2) or a Fibonacci sphere (n=3).

    ``resolution`` is the number of points per great circle; the first
    direction is always e_1.
    """
    if dim == 2:
        theta = 2.0 * math.pi * np.arange(resolution) / resolution
        return _frozen(np.column_stack([np.cos(theta), np.sin(theta)]))
    if dim == 3:
        count = max(8, int(round(resolution * resolution / math.pi)))
        i = np.arange(count)
        z = 1.0 - (2.0 * i + 1.0) / count
        rad = np.sqrt(1.0 - z * z)
        phi = GOLDEN_ANGLE * i
        fib = np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
        return _frozen(np.vstack([[1.0, 0.0, 0.0], fib]))
    raise UnsupportedDimension(f"sphere sampling supports n in {{2, 3}}, got {dim}")


@lru_cache(maxsize=64)
def ball_points(dim: int, resolution: int) -> np.ndarray:
    """Points of the closed unit ball: the center plus concentric shells."""
    shells = max(2, resolution // 8)
    dirs = sphere_directions(dim, resolution)
    layers = [np.zeros((1, dim))]
    for j in range(1, shells + 1):
        layers.append(dirs * (j / shells))
    return _frozen(np.vstack(layers))


@lru_cache(maxsize=64)
def cube_lattice(dim: int, per_side: int) -> np.ndarray:
    """Regular lattice of the closed unit cube, first coordinate varying fastest."""
    if per_side < 2:
        raise PreconditionError("cube lattice needs at least two points per side")
    ticks = np.linspace(0.0, 1.0, per_side)
    grids = np.meshgrid(*([ticks] * dim), indexing="ij")
    pts = np.column_stack([g.ravel(order="F") for g in grids])
    return _frozen(pts)

"""
Solid-harmonic bases with analytic gradients.

n=2 uses Re/Im (x1 + i x2)^d. n=3 uses real solid harmonics r^l Y_l^m,
orthonormal on the unit sphere, generated by the normalized associated
Legendre recurrence written in Cartesian form:

    r^l Y_l^m = Pi_l^m(z, rho) * Re/Im (x + i y)^m,   rho = x^2 + y^2 + z^2

with Pi_m^m constant, Pi_{m+1}^m = sqrt(2m+3) z Pi_m^m and
Pi_l^m = a_lm z Pi_{l-1}^m - b_lm rho Pi_{l-2}^m.
"""
import math
from collections import defaultdict
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from nodal_lab.models.field import HarmonicTerm


def planar_harmonics(
    points: np.ndarray, terms: Iterable[HarmonicTerm], with_gradient: bool = False
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Evaluate sum of w * Re/Im z^d at points of shape (m, 2)."""
    terms = list(terms)
    z = points[:, 0] + 1j * points[:, 1]
    max_degree = max(t.degree for t in terms)

    # cos/sin weight per degree
    weights = np.zeros((max_degree + 1, 2))
    for t in terms:
        weights[t.degree, 0 if t.part == "cos" else 1] += t.weight

    values = np.zeros(len(points))
    grads = np.zeros((len(points), 2)) if with_gradient else None
    power = np.ones_like(z)
    previous = np.zeros_like(z)
    for d in range(max_degree + 1):
        if d > 0:
            previous = power
            power = power * z
        wc, ws = weights[d]
        if wc == 0.0 and ws == 0.0:
            continue
        values += wc * power.real + ws * power.imag
        if grads is not None and d > 0:
            # d/dx z^d = d z^(d-1), d/dy z^d = i d z^(d-1)
            grads[:, 0] += d * (wc * previous.real + ws * previous.imag)
            grads[:, 1] += d * (-wc * previous.imag + ws * previous.real)
    return values, grads


def _recurrence_coefficients(l: int, m: int) -> Tuple[float, float]:
    a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
    b = math.sqrt(((l - 1) ** 2 - m * m) * (2 * l + 1) / ((2 * l - 3) * (l * l - m * m)))
    return a, b


def _sectoral_constant(m: int) -> float:
    value = 1.0 / math.sqrt(4.0 * math.pi)
    for j in range(1, m + 1):
        value *= math.sqrt((2 * j + 1) / (2 * j))
    return value


def solid_harmonics(
    points: np.ndarray, terms: Iterable[HarmonicTerm], with_gradient: bool = False
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Evaluate a combination of real solid harmonics at points of shape (m, 3)."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    rho = x * x + y * y + z * z
    w = x + 1j * y

    by_order: Dict[int, Dict[int, np.ndarray]] = defaultdict(dict)
    for t in terms:
        m = t.order or 0
        slot = by_order[m].setdefault(t.degree, np.zeros(2))
        slot[0 if t.part == "cos" else 1] += t.weight

    values = np.zeros(len(points))
    grads = np.zeros((len(points), 3)) if with_gradient else None
    ones = np.ones(len(points))
    zeros = np.zeros(len(points))

    for m, per_degree in sorted(by_order.items()):
        lmax = max(per_degree)
        scale = math.sqrt(2.0) if m > 0 else 1.0
        wm = w**m
        dwm = m * w ** (m - 1) if m > 0 else np.zeros_like(w)

        # (Pi, dPi/dz, dPi/drho) for l-1 and l-2
        pmm = _sectoral_constant(m)
        cur = (pmm * ones, zeros, zeros)
        prev = None
        for l in range(m, lmax + 1):
            if l == m + 1:
                c = math.sqrt(2 * m + 3)
                prev, cur = cur, (c * z * cur[0], c * cur[0], zeros)
            elif l >= m + 2:
                a, b = _recurrence_coefficients(l, m)
                p1, pz1, pr1 = cur
                p2, pz2, pr2 = prev
                nxt = (
                    a * z * p1 - b * rho * p2,
                    a * p1 + a * z * pz1 - b * rho * pz2,
                    a * z * pr1 - b * p2 - b * rho * pr2,
                )
                prev, cur = cur, nxt
            if l not in per_degree:
                continue
            wc, ws = per_degree[l]
            pi, dpi_dz, dpi_drho = cur
            angular = wc * wm.real + ws * wm.imag
            values += scale * pi * angular
            if grads is not None:
                dang_dx = wc * dwm.real + ws * dwm.imag
                dang_dy = -wc * dwm.imag + ws * dwm.real
                grads[:, 0] += scale * (2 * x * dpi_drho * angular + pi * dang_dx)
                grads[:, 1] += scale * (2 * y * dpi_drho * angular + pi * dang_dy)
                grads[:, 2] += scale * (dpi_dz + 2 * z * dpi_drho) * angular
    return values, grads

"""
Growth of a field around a point.

H(x, r) is the unnormalized surface integral of u^2 over the sphere of radius r,
beta(x, r) = r H'(x, r) / (2 H(x, r)) is computed through the flux identity, and
doubling indices compare sup norms on concentric balls.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from nodal_lab.config import settings
from nodal_lab.errors import ConvergenceError, DomainViolation, PreconditionError, QuadratureFloorError
from nodal_lab.field import FieldOracle
from nodal_lab.models.field import BallSpec, CubeSpec
from nodal_lab.models.growth import DoublingProfile, FrequencyProfile, ProfileSample
from nodal_lab.sampling import (
    ball_points,
    cube_lattice,
    sphere_directions,
    sphere_quadrature,
    unit_sphere_area,
)

logger = logging.getLogger(__name__)

Region = Union[BallSpec, CubeSpec]

ASCENT_IMPROVEMENT = 1e-13
ASCENT_MAX_STEPS = 400
MAX_LATTICE_POINTS = 1 << 21
SUP_FLOOR = 1e-300


def default_order(dim: int) -> int:
    return settings.QUADRATURE_ORDER_2D if dim == 2 else settings.QUADRATURE_ORDER_3D


def _sphere_integrals(f: FieldOracle, x: np.ndarray, r: float, order: int) -> Tuple[float, float]:
    """(H, flux) on the sphere of radius r about x, with the floor check."""
    if r <= 0:
        raise PreconditionError(f"radius must be positive, got {r}")
    if order < 8:
        raise PreconditionError(f"quadrature order must be >= 8, got {order}")
    n = f.dim
    f.check_ball(x, r, "sphere")
    nodes, weights = sphere_quadrature(n, order)
    scale = r ** (n - 1)
    u, grad = f.values_and_gradients(x + r * nodes, check=False)
    H = scale * float(np.dot(weights, u * u))
    flux = scale * float(np.dot(weights, u * np.einsum("ij,ij->i", grad, nodes)))

    inner = np.abs(f.values(x + 0.5 * r * nodes, check=False))
    sup_scale = max(float(np.abs(u).max()), float(inner.max()))
    floor = max(settings.H_FLOOR_ABS, (settings.H_FLOOR_REL * sup_scale) ** 2 * unit_sphere_area(n) * scale)
    if H <= floor:
        raise QuadratureFloorError(
            f"H(x, {r:.6g}) = {H:.3e} is at the quadrature floor {floor:.3e}"
        )
    return H, flux


def surface_H(f: FieldOracle, x: Sequence[float], r: float, order: Optional[int] = None) -> float:
    """Quadrature value of the integral of u^2 over the sphere of radius r about x."""
    x = np.asarray(x, dtype=float)
    return _sphere_integrals(f, x, r, order or default_order(f.dim))[0]


def frequency_beta(f: FieldOracle, x: Sequence[float], r: float, order: Optional[int] = None) -> float:
    """beta = (n-1)/2 + r * (integral of u du/dnu) / (integral of u^2)."""
    x = np.asarray(x, dtype=float)
    H, flux = _sphere_integrals(f, x, r, order or default_order(f.dim))
    return 0.5 * (f.dim - 1) + r * flux / H


def parallel_map(fn, items: Sequence) -> List:
    if settings.threads == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(fn, items))


def _identity_residual(
    f: FieldOracle, x: np.ndarray, radii: np.ndarray, logH: np.ndarray, order: int, points: int
) -> float:
    """max_j |log(H(r_j)/H(r_0)) - 2 int_{r_0}^{r_j} beta dlog r| with Gauss-Legendre per interval."""
    nodes, weights = leggauss(points)
    logs = np.log(radii)
    tasks = []
    for lo, hi in zip(logs[:-1], logs[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        tasks.extend(math.exp(mid + half * t) for t in nodes)
    betas = np.array(parallel_map(lambda rr: frequency_beta(f, x, rr, order), tasks))
    betas = betas.reshape(len(radii) - 1, points)
    halves = 0.5 * np.diff(logs)
    integrals = 2.0 * halves * (betas @ weights)
    residuals = np.abs((logH[1:] - logH[0]) - np.cumsum(integrals))
    return float(residuals.max())


def frequency_profile(
    f: FieldOracle,
    x: Sequence[float],
    r_min: float,
    r_max: float,
    count: int,
    order: Optional[int] = None,
) -> FrequencyProfile:
    """Sample H and beta on a geometric radius grid; quadrature order doubles until
    the log-H / beta integral identity holds to IDENTITY_TOLERANCE."""
    if not 0 < r_min < r_max:
        raise PreconditionError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    if count < 2:
        raise PreconditionError(f"need at least two samples, got {count}")
    x = np.asarray(x, dtype=float)
    f.check_ball(x, r_max, "profile")
    radii = np.geomspace(r_min, r_max, count)

    order = order or default_order(f.dim)
    points = 3
    while True:
        integrals = parallel_map(lambda rr: _sphere_integrals(f, x, rr, order), list(radii))
        H = np.array([h for h, _ in integrals])
        betas = 0.5 * (f.dim - 1) + radii * np.array([q for _, q in integrals]) / H
        residual = _identity_residual(f, x, radii, np.log(H), order, points)
        if residual <= settings.IDENTITY_TOLERANCE:
            break
        if 2 * order > settings.QUADRATURE_MAX_ORDER:
            raise ConvergenceError(
                f"integral identity residual {residual:.3e} above {settings.IDENTITY_TOLERANCE:.1e} "
                f"at maximum quadrature order {order}"
            )
        order *= 2
        points += 2
        logger.info(f"Identity residual {residual:.3e}; raising quadrature order to {order}")

    samples = [ProfileSample(r=float(rr), H=float(h), beta=float(b)) for rr, h, b in zip(radii, H, betas)]
    return FrequencyProfile(
        center=x.tolist(), samples=samples, quadrature_order=order, identity_residual=residual
    )


# ---- sup norms ------------------------------------------------------


class _RegionGeometry:
    """Sample points and projection for a ball or (possibly rotated) cube."""

    def __init__(self, f: FieldOracle, region: Region):
        self.f = f
        self.region = region
        self.n = region.dim
        if self.n != f.dim:
            raise PreconditionError(f"region has dimension {self.n}, field has {f.dim}")
        if isinstance(region, BallSpec):
            self.center = np.asarray(region.center, dtype=float)
            self.scale = region.radius
            f.check_ball(self.center, region.radius, "ball")
        else:
            self.corner = np.asarray(region.min_corner, dtype=float)
            self.axes = np.eye(self.n) if region.axes is None else np.asarray(region.axes, dtype=float)
            self.scale = region.side
            f.check_points(self.corner + region.side * (cube_lattice(self.n, 2) @ self.axes), "cube")

    @property
    def is_ball(self) -> bool:
        return isinstance(self.region, BallSpec)

    def samples(self, resolution: int) -> np.ndarray:
        if self.is_ball:
            base = sphere_directions(self.n, resolution) if self.f.is_harmonic else ball_points(self.n, resolution)
            return self.center + self.scale * base
        # resolution + 1 ticks per side nest under doubling
        return self.corner + self.scale * (cube_lattice(self.n, resolution + 1) @ self.axes)

    def saturated(self, resolution: int) -> bool:
        if self.is_ball:
            return False
        return (2 * resolution + 1) ** self.n > MAX_LATTICE_POINTS

    def project(self, p: np.ndarray) -> np.ndarray:
        if self.is_ball:
            d = p - self.center
            dist = float(np.linalg.norm(d))
            if dist > self.scale:
                return self.center + d * (self.scale / dist)
            return p
        t = np.clip((p - self.corner) @ self.axes.T, 0.0, self.scale)
        return self.corner + t @ self.axes


def ascend(
    score: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    step: float,
    project: Callable[[np.ndarray], np.ndarray],
    floor_step: float,
) -> Tuple[float, np.ndarray]:
    """Coordinate ascent of a score over points, halving the step when no coordinate move improves."""
    n = len(start)
    best = start.copy()
    best_val = float(score(best[None, :])[0])
    moves = np.vstack([np.eye(n), -np.eye(n)])
    for _ in range(ASCENT_MAX_STEPS):
        if step < floor_step:
            break
        cands = np.array([project(best + step * m) for m in moves])
        vals = score(cands)
        k = int(np.argmax(vals))
        if vals[k] > best_val * (1 + ASCENT_IMPROVEMENT):
            best, best_val = cands[k], float(vals[k])
        else:
            step *= 0.5
    return best_val, best


def sup_with_argmax(
    f: FieldOracle, region: Region, resolution: Optional[int] = None
) -> Tuple[float, np.ndarray]:
    """Grid maximum of |u| refined by coordinate ascent; resolution doubles until
    the relative change drops below SUP_RELATIVE_TOLERANCE."""
    geom = _RegionGeometry(f, region)
    res = resolution or settings.SUP_RESOLUTION
    floor_step = 1e-12 * geom.scale

    def at(res_: int) -> Tuple[float, np.ndarray]:
        pts = geom.samples(res_)
        vals = np.abs(f.values(pts, check=False))
        k = int(np.argmax(vals))
        val, arg = ascend(lambda q: np.abs(f.values(q, check=False)), pts[k], geom.scale / res_, geom.project, floor_step)
        return max(val, float(vals[k])), arg

    best, arg = at(res)
    while 2 * res <= settings.SUP_MAX_RESOLUTION and not geom.saturated(res):
        res *= 2
        val, cand = at(res)
        previous = best
        if val > best:
            best, arg = val, cand
        if best <= SUP_FLOOR or (best - previous) <= settings.SUP_RELATIVE_TOLERANCE * best:
            break
        logger.debug(f"sup_norm changed by {(best - previous) / best:.2e}; resolution {res}")
    return best, arg


def sup_norm(f: FieldOracle, region: Region, resolution: Optional[int] = None) -> float:
    """Estimate of sup |u| over a ball or cube; never below the sampled maximum."""
    return sup_with_argmax(f, region, resolution)[0]


# ---- doubling indices -----------------------------------------------


def doubling_index_ball(f: FieldOracle, x: Sequence[float], r: float, resolution: Optional[int] = None) -> float:
    """log2(sup over B(x, 2r) / sup over B(x, r))."""
    x = np.asarray(x, dtype=float)
    f.check_ball(x, 2 * r, "doubled ball")
    inner = sup_norm(f, BallSpec(center=x.tolist(), radius=r), resolution)
    if inner <= SUP_FLOOR:
        raise QuadratureFloorError(f"sup of |u| on B(x, {r:.6g}) is zero to working precision")
    outer = sup_norm(f, BallSpec(center=x.tolist(), radius=2 * r), resolution)
    return math.log2(max(outer, inner) / inner)


def doubling_profile(
    f: FieldOracle, x: Sequence[float], r_max: float, count: int, resolution: Optional[int] = None
) -> DoublingProfile:
    """Ball doubling index along r_max 2^-j, j = count-1..0, with the monotonicity defect."""
    if count < 2:
        raise PreconditionError(f"need at least two radii, got {count}")
    x = np.asarray(x, dtype=float)
    radii = [r_max * 2.0 ** (-j) for j in range(count - 1, -1, -1)]
    indices = parallel_map(lambda rr: doubling_index_ball(f, x, rr, resolution), radii)
    tail_min = np.minimum.accumulate(np.array(indices)[::-1])[::-1]
    defect = max(indices[i] - tail_min[i + 1] for i in range(count - 1))
    return DoublingProfile(center=x.tolist(), radii=radii, indices=indices, monotonicity_defect=float(defect))


class CandidateTable:
    """log(sup B(x, 10n r) / sup B(x, r)) on a center lattice of a cube times dyadic radii.

    The lattice has (centers_per_side - 1) * align + 1 points per side and the radii
    are diam(Q) 2^-j together with diam(Q)/align 2^-j, so the candidate set of every
    subcube of the align^n partition is a block of this table.
    """

    def __init__(
        self,
        f: FieldOracle,
        cube: CubeSpec,
        centers_per_side: int,
        radii_count: int,
        align: int = 1,
        resolution: Optional[int] = None,
    ):
        if centers_per_side < 2 or radii_count < 1 or align < 1:
            raise PreconditionError("need centers_per_side >= 2, radii_count >= 1, align >= 1")
        self.f = f
        self.cube = cube
        self.n = cube.dim
        self.centers_per_side = centers_per_side
        self.radii_count = radii_count
        self.align = align
        self.per_side = (centers_per_side - 1) * align + 1
        self.inflation = 10 * self.n
        self.resolution = resolution or settings.CUBE_SUP_RESOLUTION

        axes = np.eye(self.n) if cube.axes is None else np.asarray(cube.axes, dtype=float)
        corner = np.asarray(cube.min_corner, dtype=float)
        self.centers = corner + cube.side * (cube_lattice(self.n, self.per_side) @ axes)

        parent_radii = [cube.diameter * 2.0 ** (-j) for j in range(radii_count)]
        child_radii = [cube.diameter / align * 2.0 ** (-j) for j in range(radii_count)]
        self.radii = parent_radii + [r for r in child_radii if r not in parent_radii]
        self.child_columns = [self.radii.index(r) for r in child_radii]

        reach = float(np.linalg.norm(self.centers, axis=1).max()) + self.inflation * max(self.radii)
        if reach > f.domain_radius * (1 + 1e-12):
            raise DomainViolation(reach, f.domain_radius, "inflated candidate ball")
        self.log_ratios = self._build()

    def _sups(self, radius: float) -> np.ndarray:
        if self.f.is_harmonic:
            base = sphere_directions(self.n, self.resolution)
        else:
            base = ball_points(self.n, self.resolution)
        out = np.empty(len(self.centers))
        rows = max(1, MAX_LATTICE_POINTS // len(base))
        for i in range(0, len(self.centers), rows):
            block = self.centers[i:i + rows]
            pts = (block[:, None, :] + radius * base[None, :, :]).reshape(-1, self.n)
            vals = np.abs(self.f.values(pts, check=False)).reshape(len(block), len(base))
            out[i:i + rows] = vals.max(axis=1)
        return out

    def _build(self) -> np.ndarray:
        def column(radius: float) -> np.ndarray:
            inner = self._sups(radius)
            if inner.min() <= SUP_FLOOR:
                raise QuadratureFloorError(f"sup of |u| vanishes on a candidate ball of radius {radius:.3g}")
            outer = self._sups(self.inflation * radius)
            return np.log(np.maximum(outer, inner) / inner)

        return np.column_stack(parallel_map(column, self.radii))

    def index(self) -> float:
        """Doubling index of the whole cube on this table."""
        return float(self.log_ratios.max())

    def block(self, multi_index: Sequence[int]) -> np.ndarray:
        """Flat row indices of the centers belonging to the subcube at ``multi_index``."""
        step = self.centers_per_side - 1
        ranges = [np.arange(m * step, m * step + self.centers_per_side) for m in multi_index]
        grids = np.meshgrid(*ranges, indexing="ij")
        flat = np.zeros(grids[0].shape, dtype=int)
        stride = 1
        for g in grids:
            flat += g * stride
            stride *= self.per_side
        return flat.ravel()

    def subcube_index(self, multi_index: Sequence[int]) -> float:
        """Doubling index of one subcube of the align^n partition."""
        rows = self.block(multi_index)
        return float(self.log_ratios[np.ix_(rows, self.child_columns)].max())


def doubling_index_cube(
    f: FieldOracle,
    Q: CubeSpec,
    centers_per_side: Optional[int] = None,
    radii_count: Optional[int] = None,
    resolution: Optional[int] = None,
) -> float:
    """Lower estimate of N(Q): the candidate-set max of log(sup B(x, 10n r) / sup B(x, r))."""
    table = CandidateTable(
        f,
        Q,
        centers_per_side or settings.CUBE_CENTERS_PER_SIDE,
        radii_count or settings.CUBE_RADII_COUNT,
        resolution=resolution,
    )
    return table.index()

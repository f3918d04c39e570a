"""
Nodal-set measurement and the experiments built on it.

H^(n-1)(Z(u) cap B) is measured with marching squares (n=2) or marching cubes
(n=3) on an offset lattice, clipping segments exactly against the disk and
triangles against the linearized sphere, and refined by halving the cell size.
"""
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from skimage import measure as skmeasure

from nodal_lab.config import settings
from nodal_lab.errors import BudgetExceeded, NotAZero, PreconditionError, UnsupportedDimension
from nodal_lab.field import FieldOracle, lift, make_torus_eigenfunction, random_harmonic_polynomial, sine_product_modes
from nodal_lab.growth import ascend, frequency_beta, sup_norm
from nodal_lab.models.field import BallSpec, TorusMode
from nodal_lab.models.nodal import (
    DensityReport,
    FRatioRow,
    FRatioTable,
    NaiveBoundRecord,
    NodalEstimate,
    YauRow,
    YauTable,
)
from nodal_lab.sampling import ball_points, cube_lattice

logger = logging.getLogger(__name__)

LATTICE_OFFSET = 0.5 * (math.sqrt(2.0) - 1.0)
ZERO_TOLERANCE = 1e-10
YAU_BAND = 4.0
SIGN_BALL_DIRECTIONS = 16
SIGN_BALL_HALVINGS = 20
YAU_PATTERNS = ("sine", "sine-product")


# ---- lattice measurement --------------------------------------------


def _lattice_values(f: FieldOracle, origin: np.ndarray, h: float, count: int) -> np.ndarray:
    """Field values on origin + h * (i_0, ..., i_{n-1}), evaluated one slab of axis 0 at a time."""
    n = f.dim
    ticks = np.arange(count) * h
    rest = np.meshgrid(*([ticks] * (n - 1)), indexing="ij")
    rest = np.column_stack([g.ravel() for g in rest]) + origin[1:]
    values = np.empty((count,) * n)
    slab = np.empty((len(rest), n))
    slab[:, 1:] = rest
    for i in range(count):
        slab[:, 0] = origin[0] + ticks[i]
        values[i] = f.values(slab, check=False).reshape((count,) * (n - 1))
    return values


def _segment_length_in_disk(a: np.ndarray, b: np.ndarray, c: np.ndarray, R: float) -> np.ndarray:
    """Length of each segment [a_i, b_i] inside the disk B(c, R)."""
    d = b - a
    f0 = a - c
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2 * np.einsum("ij,ij->i", f0, d)
    qc = np.einsum("ij,ij->i", f0, f0) - R * R
    disc = qb * qb - 4 * qa * qc
    out = np.zeros(len(a))
    ok = (disc > 0) & (qa > 0)
    root = np.sqrt(np.where(ok, disc, 0.0))
    safe = np.where(ok, qa, 1.0)
    t1 = np.clip((-qb - root) / (2 * safe), 0.0, 1.0)
    t2 = np.clip((-qb + root) / (2 * safe), 0.0, 1.0)
    out[ok] = ((t2 - t1) * np.sqrt(qa))[ok]
    return out


def _clipped_triangle_areas(tri: np.ndarray, c: np.ndarray, R: float) -> np.ndarray:
    """Area of each triangle on the side phi <= 0 of phi = |v - c| - R, linear in the triangle."""
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    phi = np.linalg.norm(tri - c, axis=2) - R
    inside = phi <= 0
    n_in = inside.sum(axis=1)
    frac = np.where(n_in == 3, 1.0, 0.0)

    one = n_in == 1
    if np.any(one):
        idx = np.argmax(inside[one], axis=1)
        ph = phi[one]
        pa = ph[np.arange(len(idx)), idx]
        rows = np.arange(len(idx))
        pb = ph[rows, (idx + 1) % 3]
        pc = ph[rows, (idx + 2) % 3]
        frac[one] = (pa / (pa - pb)) * (pa / (pa - pc))

    two = n_in == 2
    if np.any(two):
        idx = np.argmin(inside[two], axis=1)
        ph = phi[two]
        rows = np.arange(len(idx))
        pc = ph[rows, idx]
        pa = ph[rows, (idx + 1) % 3]
        pb = ph[rows, (idx + 2) % 3]
        frac[two] = 1.0 - (pc / (pc - pa)) * (pc / (pc - pb))
    return area * frac


def _measure_at(f: FieldOracle, region: BallSpec, h: float) -> float:
    n = f.dim
    c = np.asarray(region.center, dtype=float)
    R = region.radius
    origin = c - R - h + LATTICE_OFFSET * h
    count = int(math.ceil((2 * R + 2 * h) / h)) + 1
    values = _lattice_values(f, origin, h, count)
    if values.min() > 0 or values.max() < 0:
        return 0.0
    if n == 2:
        pieces = []
        for contour in skmeasure.find_contours(values, 0.0):
            pts = origin + h * contour
            pieces.append(_segment_length_in_disk(pts[:-1], pts[1:], c, R))
        return math.fsum(float(v) for piece in pieces for v in piece)
    verts, faces, _, _ = skmeasure.marching_cubes(values, level=0.0, spacing=(h, h, h), method="lewiner")
    tri = (verts + origin)[faces]
    return math.fsum(_clipped_triangle_areas(tri, c, R).tolist())


def nodal_measure(
    f: FieldOracle,
    region: BallSpec,
    cell_size: Optional[float] = None,
    max_cells: Optional[int] = None,
) -> NodalEstimate:
    """H^(n-1) of the zero set inside ``region``, halving the cell until two passes agree to 1%."""
    n = f.dim
    if n not in (2, 3):
        raise UnsupportedDimension(f"nodal measure supports n in {{2, 3}}, got {n}")
    if region.dim != n:
        raise PreconditionError(f"region has dimension {region.dim}, field has {n}")
    R = region.radius
    f.check_ball(region.center, 1.5 * R, "nodal lattice")
    h = cell_size or R / settings.NODAL_INITIAL_CELLS
    if h >= R / 4:
        raise PreconditionError(f"cell size {h:.3g} must be below radius/4 = {R / 4:.3g}")
    limit = max_cells or (settings.NODAL_MAX_CELLS_2D if n == 2 else settings.NODAL_MAX_CELLS_3D)
    if 2 * R / h > limit:
        raise BudgetExceeded(f"initial lattice of {2 * R / h:.0f} cells per axis exceeds {limit}")

    history: List[Tuple[float, float]] = []
    converged = False
    while True:
        value = _measure_at(f, region, h)
        history.append((h, value))
        logger.debug(f"Nodal measure at cell {h:.4g}: {value:.8g}")
        if len(history) >= 2:
            previous = history[-2][1]
            if abs(value - previous) <= settings.NODAL_CONVERGENCE * max(abs(value), abs(previous)):
                converged = True
                break
        if 2 * R / (h / 2) > limit:
            break
        h /= 2
    if not converged:
        logger.warning(f"Nodal measure did not converge within {limit} cells per axis")
    return NodalEstimate(
        region=region, measure=history[-1][1], cell_size=history[-1][0], refinement_history=history, converged=converged
    )


def hyperplane_nodal_measure(pattern: str, k: int, region: BallSpec) -> float:
    """Exact H^(n-1) of the zero set of sin(k x_1) or prod sin(k x_i) inside a ball."""
    if pattern not in YAU_PATTERNS:
        raise PreconditionError(f"unknown pattern {pattern!r}; expected one of {YAU_PATTERNS}")
    n = region.dim
    if n not in (2, 3):
        raise UnsupportedDimension(f"closed-form nodal geometry supports n in {{2, 3}}, got {n}")
    c, R = region.center, region.radius
    spacing = math.pi / k
    axes = [0] if pattern == "sine" else list(range(n))
    total = []
    for i in axes:
        lo = math.ceil((c[i] - R) / spacing)
        hi = math.floor((c[i] + R) / spacing)
        for j in range(lo, hi + 1):
            t = j * spacing - c[i]
            if abs(t) >= R:
                continue
            total.append(2 * math.sqrt(R * R - t * t) if n == 2 else math.pi * (R * R - t * t))
    return math.fsum(total)


# ---- naive bound and F(N) -------------------------------------------


def _sign_ball(f: FieldOracle, x: np.ndarray, rho: float, radius: float, sign: int) -> Optional[BallSpec]:
    """A ball of the given radius inside B(x, rho) on which sampled u has the given sign."""
    n = f.dim
    directions = ball_points(n, SIGN_BALL_DIRECTIONS)
    for _ in range(SIGN_BALL_HALVINGS):
        if radius >= rho:
            radius *= 0.5
            continue
        centers = x + (rho - radius) * directions
        vals = sign * f.values(centers, check=False)
        for i in np.argsort(-vals)[:8]:
            if vals[i] <= 0:
                break
            inner = sign * f.values(centers[i] + radius * directions, check=False)
            if np.all(inner > 0):
                return BallSpec(center=centers[i].tolist(), radius=radius)
        radius *= 0.5
    return None


def naive_lower_bound_check(
    f: FieldOracle, x: Sequence[float], rho: float, cell_size: Optional[float] = None
) -> NaiveBoundRecord:
    """Ratio H^(n-1)(Z cap B(x, rho)) / rho^(n-1) against beta(x, rho/2) at a zero x."""
    x = np.asarray(x, dtype=float)
    f.check_ball(x, rho, "B(x, rho)")
    scale = sup_norm(f, BallSpec(center=x.tolist(), radius=rho))
    value = f(x)
    if abs(value) >= ZERO_TOLERANCE * scale:
        raise NotAZero(f"|u(x)| = {abs(value):.3e} is not below {ZERO_TOLERANCE:.0e} * sup = {ZERO_TOLERANCE * scale:.3e}")
    ball = BallSpec(center=x.tolist(), radius=rho)
    estimate = nodal_measure(f, ball, cell_size)
    ratio = estimate.measure / rho ** (f.dim - 1)
    beta = frequency_beta(f, x, 0.5 * rho)
    return NaiveBoundRecord(
        x=x.tolist(),
        rho=rho,
        measure=estimate.measure,
        ratio=ratio,
        beta=beta,
        implied_c1=ratio * beta ** (f.dim - 1),
        positive_ball=_sign_ball(f, x, rho, rho / beta, 1),
        negative_ball=_sign_ball(f, x, rho, rho / beta, -1),
    )


def f_ratio_experiment(
    n: int,
    degrees: Iterable[int],
    seeds: Iterable[int],
    rho: float = 1.0,
    cell_size: Optional[float] = None,
) -> FRatioTable:
    """Tabulate beta(0, rho/2) and the normalized nodal measure for seeded harmonic polynomials vanishing at 0."""
    degrees = sorted(set(degrees))
    seeds = list(seeds)
    rows = []
    center = [0.0] * n
    for degree in degrees:
        for seed in seeds:
            f = random_harmonic_polynomial(n, degree, seed, min_degree=1)
            estimate = nodal_measure(f, BallSpec(center=center, radius=rho), cell_size)
            beta = frequency_beta(f, center, 0.5 * rho)
            abscissa = None
            if beta > math.e:
                abscissa = math.log(beta) / math.log(math.log(beta))
            rows.append(FRatioRow(
                degree=degree, seed=seed, beta=beta, ratio=estimate.measure / rho ** (n - 1), trend_abscissa=abscissa
            ))
            logger.info(f"F-ratio degree {degree} seed {seed}: beta={beta:.4g}, ratio={rows[-1].ratio:.4g}")
    if not rows:
        return FRatioTable(rows=[])

    low = min(r.ratio for r in rows if r.degree == degrees[0])
    lowest = min(r.ratio for r in rows)
    fit = [(r.trend_abscissa, math.log2(r.ratio)) for r in rows if r.trend_abscissa is not None and r.ratio > 0]
    slope = None
    if len({a for a, _ in fit}) >= 2:
        slope = float(np.polyfit([a for a, _ in fit], [b for _, b in fit], 1)[0])
    if lowest < low:
        logger.warning(f"F-ratio floor fails: minimum ratio {lowest:.6g} below the degree-{degrees[0]} minimum {low:.6g}")
    return FRatioTable(
        rows=rows, min_ratio=lowest, low_degree_min=low, floor_holds=lowest >= low, trend_slope=slope
    )


# ---- density and Yau ------------------------------------------------


def nearest_sign_change(f: FieldOracle, y: np.ndarray, length: float, samples: Optional[int] = None) -> Tuple[float, Optional[np.ndarray]]:
    """Distance from y to the nearest sign change along the 2n coordinate segments of ``length``."""
    n = len(y)
    samples = samples or settings.DENSITY_SEGMENT_SAMPLES
    u0 = f(y)
    if u0 == 0.0:
        return 0.0, y.copy()
    ts = np.linspace(0.0, length, samples + 1)[1:]
    best, where = math.inf, None
    for direction in np.vstack([np.eye(n), -np.eye(n)]):
        vals = f.values(y + ts[:, None] * direction)
        flips = np.flatnonzero(np.sign(vals) != np.sign(u0))
        if not len(flips):
            continue
        j = int(flips[0])
        lo = ts[j - 1] if j > 0 else 0.0
        if vals[j] == 0.0:
            t = ts[j]
        else:
            t = optimize.bisect(lambda s: f(y + s * direction), lo, ts[j], xtol=1e-12 * length)
        if t < best:
            best, where = t, y + t * direction
    return best, where


def _inside_lattice(region: BallSpec, per_side: int) -> Tuple[np.ndarray, float]:
    """Cell centers of a per_side^n lattice over the bounding cube that lie in the ball."""
    n = region.dim
    c = np.asarray(region.center, dtype=float)
    R = region.radius
    spacing = 2 * R / per_side
    if per_side == 1:
        return c[None, :], 0.0
    centers = c - R + spacing * (0.5 + (per_side - 1) * cube_lattice(n, per_side))
    keep = np.linalg.norm(centers - c, axis=1) <= R
    return centers[keep], spacing


def density_check(u: FieldOracle, region: BallSpec, probes: int, segment_samples: Optional[int] = None) -> DensityReport:
    """Largest distance from a point of B to a detected sign change, and max_gap * sqrt(lambda)."""
    if u.eigenvalue is None or u.kind != "torus-eigenfunction":
        raise PreconditionError("density check needs a torus eigenfunction")
    if probes < 1:
        raise PreconditionError(f"need at least one sample point, got {probes}")
    root = math.sqrt(u.eigenvalue)
    length = 4.0 / root
    c = np.asarray(region.center, dtype=float)
    u.check_ball(c, region.radius + length, "density segments")
    per_side = max(1, int(round(probes ** (1.0 / region.dim))))
    points, spacing = _inside_lattice(region, per_side)

    def gap(y: np.ndarray) -> float:
        d, _ = nearest_sign_change(u, y, length, segment_samples)
        return min(d, length)

    gaps = np.array([gap(y) for y in points])
    k = int(np.argmax(gaps))
    best, argmax = float(gaps[k]), points[k]
    if spacing > 0:

        def into_ball(q: np.ndarray) -> np.ndarray:
            d = q - c
            dist = float(np.linalg.norm(d))
            return q if dist <= region.radius else c + d * (region.radius / dist)

        value, point = ascend(
            lambda qs: np.array([gap(q) for q in qs]), argmax, spacing, into_ball, 1e-6 * spacing
        )
        if value > best:
            best, argmax = value, point
    logger.info(f"Density check: max gap {best:.6g}, implied C1 {best * root:.6g}")
    return DensityReport(
        eigenvalue=u.eigenvalue, max_gap=best, probe_count=len(points), implied_C1=best * root, argmax=argmax.tolist()
    )


def pattern_modes(pattern: str, n: int, k: int) -> List[TorusMode]:
    if pattern == "sine":
        return [TorusMode(k=[k] + [0] * (n - 1), part="sin", weight=1.0)]
    if pattern == "sine-product":
        return sine_product_modes(n, k)
    raise PreconditionError(f"unknown pattern {pattern!r}; expected one of {YAU_PATTERNS}")


def zero_ball_packing(f: FieldOracle, region: BallSpec, radius: float) -> List[BallSpec]:
    """Greedy disjoint balls of ``radius`` inside the region, each centered at a detected zero."""
    c = np.asarray(region.center, dtype=float)
    per_side = max(1, int(math.ceil(2 * region.radius / radius)))
    points, _ = _inside_lattice(region, per_side)
    accepted: List[np.ndarray] = []
    for y in points:
        _, z = nearest_sign_change(f, y, 2 * radius)
        if z is None or np.linalg.norm(z - c) + radius > region.radius:
            continue
        if any(np.linalg.norm(z - a) <= 2 * radius for a in accepted):
            continue
        accepted.append(z)
    return [BallSpec(center=z.tolist(), radius=radius) for z in accepted]


def yau_experiment(ks: Iterable[int], pattern: str, region: BallSpec) -> YauTable:
    """Nodal measure of torus eigenfunctions against sqrt(lambda), with a zero-ball decomposition."""
    ks = list(ks)
    n = region.dim
    rows = []
    reach = float(np.linalg.norm(region.center)) + 2 * region.radius
    for k in ks:
        if k < 1:
            raise PreconditionError(f"mode frequency must be positive, got {k}")
        f = make_torus_eigenfunction(n, pattern_modes(pattern, n, k), domain_radius=max(settings.DOMAIN_RADIUS, reach))
        root = math.sqrt(f.eigenvalue)
        cell = min(region.radius / settings.NODAL_INITIAL_CELLS, math.pi / k / 16)
        estimate = nodal_measure(f, region, cell)
        balls = zero_ball_packing(f, region, 2.0 / root)
        rows.append(YauRow(
            k=k,
            eigenvalue=f.eigenvalue,
            sqrt_lambda=root,
            measure=estimate.measure,
            ratio=estimate.measure / root,
            exact=hyperplane_nodal_measure(pattern, k, region),
            ball_count=len(balls),
            ball_density=len(balls) / f.eigenvalue ** (n / 2),
        ))
        logger.info(f"Yau k={k}: measure {estimate.measure:.6g}, ratio {rows[-1].ratio:.4g}, balls {len(balls)}")
    if not rows:
        return YauTable(rows=[])

    ratios = [r.ratio for r in rows]
    fitted = rows[0].ball_density
    return YauTable(
        rows=rows,
        ratio_min=min(ratios),
        ratio_max=max(ratios),
        band_holds=min(ratios) > 0 and max(ratios) / min(ratios) <= YAU_BAND,
        decomposition_constant=fitted,
        decomposition_holds=all(r.ball_density >= 0.5 * fitted for r in rows),
    )


def lift_zero_slices(u: FieldOracle, region: BallSpec, ts: Sequence[float], per_side: int = 32) -> int:
    """Number of lattice points where sign h(x, t) differs from sign u(x) on the given slices."""
    h = lift(u)
    c = np.asarray(region.center, dtype=float)
    pts = c - region.radius + 2 * region.radius * cube_lattice(u.dim, per_side)
    pts = pts[np.linalg.norm(pts - c, axis=1) <= region.radius]
    base = np.sign(u.values(pts))
    mismatches = 0
    for t in ts:
        lifted = np.sign(h.values(np.column_stack([pts, np.full(len(pts), t)])))
        mismatches += int(np.count_nonzero(lifted != base))
    return mismatches

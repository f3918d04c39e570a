"""
Tunnel construction near the sphere maximum.

Pipeline: frequency window -> maximum x of |u| on the sphere of radius s ->
box T between x_tilde = p + (1 - delta)(x - p) and x -> tunnels and their cells
-> good-tunnel classification -> sign changes per cell -> disjoint zero balls.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from nodal_lab.config import settings
from nodal_lab.errors import BudgetExceeded, PreconditionError, QuadratureFloorError
from nodal_lab.field import FieldOracle, make_harmonic_polynomial
from nodal_lab.growth import (
    SUP_FLOOR,
    CandidateTable,
    ascend,
    doubling_index_ball,
    parallel_map,
    sup_norm,
    surface_H,
)
from nodal_lab.models.experiment import ConstantsBlock, ResolutionBlock
from nodal_lab.models.field import BallSpec, CubeSpec
from nodal_lab.models.tunnels import (
    LayerDiagnostics,
    OrientedBox,
    SignChangeCertificate,
    TunnelGeometry,
    TunnelParams,
    TunnelReport,
    TunnelScalingReport,
    TunnelScalingRow,
)
from nodal_lab.models.windows import LayerWindow
from nodal_lab.sampling import cube_lattice, sphere_directions
from nodal_lab.windows import find_frequency_window

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
ADMISSIBLE_A = 1e6
PROOF_DELTA_SCALE = 1e8


def max_on_sphere(
    f: FieldOracle, p: Sequence[float], s: float, resolution: Optional[int] = None
) -> Tuple[np.ndarray, float]:
    """(x, K): a maximizer of |u| on the sphere of radius s about p and K = |u(x)|.

    Ties among samples go to the smallest sample index; the winner is then
    refined by coordinate ascent projected back to the sphere.
    """
    p = np.asarray(p, dtype=float)
    f.check_ball(p, s, "sphere")
    res = resolution or settings.SUP_RESOLUTION
    pts = p + s * sphere_directions(f.dim, res)
    vals = np.abs(f.values(pts, check=False))
    top = float(vals.max())
    if top <= SUP_FLOOR:
        raise QuadratureFloorError(f"|u| vanishes on the sphere of radius {s:.6g} to working precision")
    first = int(np.flatnonzero(vals >= top * (1 - TIE_TOLERANCE))[0])

    def to_sphere(q: np.ndarray) -> np.ndarray:
        d = q - p
        return p + d * (s / np.linalg.norm(d))

    K, x = ascend(lambda q: np.abs(f.values(q, check=False)), pts[first], s / res, to_sphere, 1e-12 * s)
    return x, K


def transverse_axes(nu: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the hyperplane orthogonal to the unit vector nu."""
    n = len(nu)
    if n == 2:
        return np.array([[-nu[1], nu[0]]])
    if n == 3:
        e = np.zeros(3)
        e[int(np.argmin(np.abs(nu)))] = 1.0
        t1 = e - np.dot(e, nu) * nu
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(nu, t1)
        return np.vstack([t1, t2 / np.linalg.norm(t2)])
    raise PreconditionError(f"tunnels support n in {{2, 3}}, got {n}")


def good_threshold(N: float, c1: Optional[float] = None, N0: Optional[float] = None) -> float:
    """max(N 2^(-c1 ln N / ln ln N), N0), with ln ln N floored at 1."""
    c1 = settings.SUBDIVISION_C1 if c1 is None else c1
    N0 = settings.SUBDIVISION_N0 if N0 is None else N0
    log_n = math.log(N)
    return max(N * 2.0 ** (-c1 * log_n / max(math.log(log_n), 1.0)), N0)


def tunnel_params(
    s: float,
    N: float,
    r: float,
    n: int,
    constants: Optional[ConstantsBlock] = None,
    paper_constants: bool = False,
    tunnels_per_side: Optional[int] = None,
    cubes_per_tunnel: Optional[int] = None,
    threshold: Optional[float] = None,
) -> TunnelParams:
    """Resolve delta, box width and the tunnel/cell counts for one layer."""
    constants = constants or ConstantsBlock()
    if N <= math.e:
        raise PreconditionError(f"degenerate window: N = {N:.6g} is too small for a tunnel layer")
    log_n = math.log(N)
    if paper_constants:
        delta = 1.0 / (PROOF_DELTA_SCALE * n * n * log_n * log_n)
        d = delta * s
        section = max(int(math.floor(log_n)), 1) ** 4
        tps = tunnels_per_side or max(int(math.floor(N**constants.alpha)), 1)
        cpt = cubes_per_tunnel or tps * section
        width = d / section
    else:
        delta = constants.delta_scale / (log_n * log_n)
        d = delta * s
        base_cpt = int(math.ceil(log_n))
        h = d / base_cpt
        base_tps = max(1, int(round(constants.width_factor * r / h)))
        width = base_tps * h
        tps = tunnels_per_side or base_tps
        cpt = cubes_per_tunnel or base_cpt
    if threshold is None:
        threshold = good_threshold(N, constants.c1, constants.N0)
    return TunnelParams(
        s=s,
        N=N,
        delta=delta,
        tunnels_per_side=tps,
        cubes_per_tunnel=cpt,
        paper_constants=paper_constants,
        alpha=constants.alpha,
        box_width=width,
        ball_radius=r / N**constants.alpha,
        good_threshold=threshold,
    )


def build_tunnels(
    f: FieldOracle,
    p: Sequence[float],
    r: float,
    window: LayerWindow,
    params: TunnelParams,
    resolution: Optional[int] = None,
    cell_budget: Optional[int] = None,
) -> TunnelGeometry:
    """Box T, its tunnels and their cells ordered from the x_tilde end toward x."""
    p = np.asarray(p, dtype=float)
    n = f.dim
    f.check_ball(p, 2 * r, "B(p, 2r)")
    s = window.s
    x, K = max_on_sphere(f, p, s, resolution)
    nu = (x - p) / np.linalg.norm(x - p)
    x_tilde = p + (1 - params.delta) * (x - p)
    d = float(np.linalg.norm(x - x_tilde))

    axes = np.vstack([nu, transverse_axes(nu)])
    width = params.box_width
    box = OrientedBox(
        center=(x_tilde + 0.5 * d * nu).tolist(),
        axes=axes.tolist(),
        half_extents=[0.5 * d] + [0.5 * width] * (n - 1),
    )
    corners = np.asarray(box.center) + ((cube_lattice(n, 2) - 0.5) * 2 * np.asarray(box.half_extents)) @ axes
    f.check_points(corners, "tunnel box T")

    tps, cpt = params.tunnels_per_side, params.cubes_per_tunnel
    w = width / tps
    long_side = d / cpt
    infeasible = min(long_side, w) < settings.TUNNEL_RESOLUTION_FLOOR * s
    tunnel_count = tps ** (n - 1)
    budget = cell_budget or settings.TUNNEL_CELL_BUDGET
    if infeasible:
        logger.warning(
            f"Tunnel cells of side {min(long_side, w):.3e} are below the resolution floor "
            f"{settings.TUNNEL_RESOLUTION_FLOOR:.0e} * s; classification and detection are skipped"
        )
    elif tunnel_count * cpt > budget:
        raise BudgetExceeded(f"{tunnel_count} tunnels x {cpt} cells exceeds cell budget {budget}")

    tunnels, cells = [], []
    for flat in range(tunnel_count):
        idx = np.unravel_index(flat, (tps,) * (n - 1), order="F")
        shift = sum((-0.5 * width + (i + 0.5) * w) * axes[k + 1] for k, i in enumerate(idx))
        tunnels.append(OrientedBox(
            center=(x_tilde + 0.5 * d * nu + shift).tolist(),
            axes=axes.tolist(),
            half_extents=[0.5 * d] + [0.5 * w] * (n - 1),
        ))
        if infeasible:
            continue
        cells.append([
            OrientedBox(
                center=(x_tilde + (t + 0.5) * long_side * nu + shift).tolist(),
                axes=axes.tolist(),
                half_extents=[0.5 * long_side] + [0.5 * w] * (n - 1),
            )
            for t in range(cpt)
        ])
    logger.info(
        f"Tunnel box: d={d:.3e}, width={width:.3e}, {tunnel_count} tunnels x {cpt} cells"
        + (" (resolution infeasible)" if infeasible else "")
    )
    return TunnelGeometry(
        params=params,
        x=x.tolist(),
        x_tilde=x_tilde.tolist(),
        K=K,
        box=box,
        tunnels=tunnels,
        cells=cells,
        resolution_infeasible=infeasible,
    )


def cube_proxy(cell: OrientedBox) -> CubeSpec:
    """Oriented cube sharing the cell's center and axes, with side the largest extent."""
    side = 2.0 * max(cell.half_extents)
    axes = np.asarray(cell.axes)
    corner = np.asarray(cell.center) - 0.5 * side * axes.sum(axis=0)
    return CubeSpec(min_corner=corner.tolist(), side=side, axes=cell.axes)


def classify_good_tunnels(
    f: FieldOracle,
    cells: List[List[OrientedBox]],
    threshold: float,
    centers_per_side: Optional[int] = None,
    radii_count: Optional[int] = None,
    resolution: Optional[int] = None,
) -> List[int]:
    """Indices of tunnels whose every cell has doubling index at most ``threshold``."""
    if math.isinf(threshold) and threshold > 0:
        return list(range(len(cells)))
    cps = centers_per_side or settings.TUNNEL_CENTERS_PER_SIDE
    radii = radii_count or settings.TUNNEL_RADII_COUNT

    def is_good(tunnel: List[OrientedBox]) -> bool:
        for cell in tunnel:
            if CandidateTable(f, cube_proxy(cell), cps, radii, resolution=resolution).index() > threshold:
                return False
        return True

    flags = parallel_map(is_good, cells)
    return [i for i, good in enumerate(flags) if good]


def _cell_samples(cell: OrientedBox, per_axis: int) -> np.ndarray:
    """Closed regular grid of the cell; shared faces are sampled by both neighbours."""
    n = len(cell.center)
    local = (cube_lattice(n, per_axis) - 0.5) * 2 * np.asarray(cell.half_extents)
    return np.asarray(cell.center) + local @ np.asarray(cell.axes)


def detect_sign_changes(
    f: FieldOracle,
    tunnel_cells: List[OrientedBox],
    samples_per_cube: Optional[int] = None,
    tunnel: int = 0,
) -> List[SignChangeCertificate]:
    """Certificates for the cells of one tunnel where sampled values take both signs."""
    per_axis = samples_per_cube or settings.TUNNEL_SAMPLES_PER_CUBE
    if per_axis < 2:
        raise PreconditionError("need at least two samples per cell axis")
    certificates = []
    for t, cell in enumerate(tunnel_cells):
        pts = _cell_samples(cell, per_axis)
        f.check_points(pts, "tunnel cell")
        vals = f.values(pts, check=False)
        hi, lo = int(np.argmax(vals)), int(np.argmin(vals))
        if not (vals[hi] > 0 > vals[lo]):
            continue
        p_plus, p_minus = pts[hi], pts[lo]
        seg = p_plus - p_minus
        length = float(np.linalg.norm(seg))
        side = 2.0 * min(cell.half_extents)

        def along(lam: float) -> float:
            return f(p_minus + lam * seg)

        lam = optimize.bisect(along, 0.0, 1.0, xtol=1e-12 * side / length)
        zero = p_minus + lam * seg
        certificates.append(SignChangeCertificate(
            tunnel=tunnel,
            cell=t,
            cube=cell,
            p_plus=p_plus.tolist(),
            p_minus=p_minus.tolist(),
            values=(float(vals[hi]), float(vals[lo])),
            zero=zero.tolist(),
            zero_value=f(zero),
        ))
    return certificates


def pack_disjoint_balls(
    certificates: List[SignChangeCertificate], radius: float, container: BallSpec
) -> List[BallSpec]:
    """Greedy maximal packing in certificate order; each ball covers its certificate segment."""
    if radius <= 0:
        raise PreconditionError(f"packing radius must be positive, got {radius}")
    center_c = np.asarray(container.center, dtype=float)
    accepted: List[np.ndarray] = []
    balls = []
    for cert in certificates:
        a, b = np.asarray(cert.p_plus), np.asarray(cert.p_minus)
        mid = 0.5 * (a + b)
        if 0.5 * np.linalg.norm(a - b) > radius:
            continue
        if np.linalg.norm(mid - center_c) + radius > container.radius:
            continue
        if any(np.linalg.norm(mid - c) <= 2 * radius for c in accepted):
            continue
        accepted.append(mid)
        balls.append(BallSpec(center=mid.tolist(), radius=radius))
    return balls


def run_tunnel_construction(
    f: FieldOracle,
    p: Sequence[float],
    r: float,
    constants: Optional[ConstantsBlock] = None,
    resolution: Optional[ResolutionBlock] = None,
    paper_constants: bool = False,
    tunnels_per_side: Optional[int] = None,
    cubes_per_tunnel: Optional[int] = None,
    threshold: Optional[float] = None,
    window: Optional[LayerWindow] = None,
) -> TunnelReport:
    """Window, maximum, tunnels, good tunnels, certificates and packed balls."""
    constants = constants or ConstantsBlock()
    resolution = resolution or ResolutionBlock()
    p = np.asarray(p, dtype=float)
    if window is None:
        window = find_frequency_window(
            f,
            p,
            r,
            gate=constants.frequency_gate,
            order=resolution.quadrature_order(f.dim),
            verification_samples=resolution.window_samples,
        )
    params = tunnel_params(
        window.s, window.N, r, f.dim, constants, paper_constants, tunnels_per_side, cubes_per_tunnel, threshold
    )
    geometry = build_tunnels(
        f, p, r, window, params, resolution.sup_resolution, resolution.tunnel_cell_budget
    )
    report = dict(
        window=window,
        params=params,
        box=geometry.box,
        x=geometry.x,
        x_tilde=geometry.x_tilde,
        K=geometry.K,
        tunnel_count=len(geometry.tunnels),
        bracket_holds=window.bracket_holds,
        resolution_infeasible=geometry.resolution_infeasible,
    )
    if geometry.resolution_infeasible:
        return TunnelReport(
            **report,
            good_tunnels=[],
            certificates=[],
            balls=[],
            note="cells below the resolution floor; classification and detection skipped",
        )

    good = classify_good_tunnels(f, geometry.cells, params.good_threshold)
    per_tunnel = parallel_map(
        lambda i: detect_sign_changes(f, geometry.cells[i], resolution.samples_per_cube, tunnel=i), good
    )
    certificates = [c for certs in per_tunnel for c in certs]
    balls = pack_disjoint_balls(certificates, params.ball_radius, BallSpec(center=p.tolist(), radius=2 * r))
    logger.info(
        f"Tunnels: {len(good)}/{len(geometry.tunnels)} good, {len(certificates)} certificates, "
        f"{len(balls)} disjoint balls of radius {params.ball_radius:.4g}"
    )
    return TunnelReport(**report, good_tunnels=good, certificates=certificates, balls=balls)


def tunnel_scaling(
    degrees: Sequence[int],
    r: float = 0.5,
    constants: Optional[ConstantsBlock] = None,
    resolution: Optional[ResolutionBlock] = None,
    threshold: Optional[float] = None,
    domain_radius: Optional[float] = None,
) -> TunnelScalingReport:
    """Run the construction for Re z^d at the origin and fit log(ball count) against log N.

    The planar fields have N = (d + 1/2)/2 at every scale; the fitted slope is
    compared with (n - 1)/2 - 0.15.
    """
    if not degrees:
        raise PreconditionError("tunnel scaling needs at least one degree")
    constants = constants or ConstantsBlock()
    n = 2
    rows = []
    for d in degrees:
        f = make_harmonic_polynomial(
            n, [{"degree": int(d), "part": "cos", "weight": 1.0}], domain_radius=domain_radius
        )
        report = run_tunnel_construction(f, [0.0] * n, r, constants, resolution, threshold=threshold)
        rows.append(TunnelScalingRow(
            degree=int(d),
            N=report.window.N,
            ball_count=len(report.balls),
            certificate_count=len(report.certificates),
            good_tunnels=len(report.good_tunnels),
        ))

    required = (n - 1) / 2 - 0.15
    slope = None
    if len(rows) >= 2 and all(row.ball_count > 0 for row in rows):
        log_n = np.log([row.N for row in rows])
        log_count = np.log([row.ball_count for row in rows])
        slope = float(np.polyfit(log_n, log_count, 1)[0])
    holds = slope is not None and slope >= required
    if holds:
        logger.info(f"Tunnel scaling slope {slope:.3f} >= {required:.3f} over degrees {list(degrees)}")
    else:
        logger.warning(f"Tunnel scaling slope {slope} below {required:.3f} over degrees {list(degrees)}")
    return TunnelScalingReport(dim=n, r=r, rows=rows, slope=slope, required_slope=required, slope_holds=holds)


def _smallest_prefactor_constant(log2_ratio: float, delta_n: float) -> float:
    """Smallest C > 0 with log2(C) + C delta N >= log2_ratio."""
    def gap(c: float) -> float:
        return math.log2(c) + c * delta_n - log2_ratio

    lo, hi = 1e-300, 1.0
    while gap(hi) < 0:
        hi *= 2.0
    return optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=1e-12)


def layer_growth_report(
    f: FieldOracle,
    p: Sequence[float],
    window: LayerWindow,
    delta: Optional[float] = None,
    resolution: Optional[int] = None,
    order: Optional[int] = None,
) -> LayerDiagnostics:
    """Measured sides of the layer growth estimates and their implied constants."""
    p = np.asarray(p, dtype=float)
    s, N = window.s, window.N
    log_n = math.log(N)
    delta = settings.DELTA_SCALE / log_n**2 if delta is None else delta
    if not 0 < delta < 1:
        raise PreconditionError(f"delta must lie in (0, 1), got {delta}")
    f.check_ball(p, s * (1 + delta), "outer layer ball")
    dn = delta * N

    x, K = max_on_sphere(f, p, s, resolution)
    nu = (x - p) / s
    _, K_inner = max_on_sphere(f, p, s * (1 - delta), resolution)
    sup_inner = sup_norm(f, BallSpec(center=p.tolist(), radius=s * (1 - delta)), resolution)
    sup_outer = sup_norm(f, BallSpec(center=p.tolist(), radius=s * (1 + delta)), resolution)
    sup_near = sup_norm(f, BallSpec(center=x.tolist(), radius=delta * s), resolution)

    x_near = p + (s - 0.25 * delta * s) * nu
    doubling = doubling_index_ball(f, x_near, 0.25 * delta * s, resolution)
    sup_small = sup_norm(f, BallSpec(center=x_near.tolist(), radius=delta * s / (10 * N)), resolution)

    t1 = s * (1 - window.rel_halfwidth)
    t2 = s * (1 + window.rel_halfwidth)
    log_h = math.log(surface_H(f, p, t2, order) / surface_H(f, p, t1, order))
    log_t = math.log(t2 / t1)

    return LayerDiagnostics(
        s=s,
        N=N,
        delta=delta,
        K=K,
        K_inner=K_inner,
        sup_inner=sup_inner,
        sup_outer=sup_outer,
        sup_near_max=sup_near,
        doubling_near_max=doubling,
        sup_small_ball=sup_small,
        t1t2_lower_margin=log_h - 2 * N * log_t,
        t1t2_upper_margin=4 * math.e * N * log_t - log_h,
        implied_c_inner=math.log2(K / sup_inner) / dn,
        implied_C_outer=_smallest_prefactor_constant(math.log2(sup_outer / K), dn),
        implied_C_near_max=max(0.0, math.log2(sup_near / K) / (dn + 1)),
        implied_C_doubling=max(0.0, doubling / (dn + 1)),
        implied_C_small_ball=max(0.0, math.log2(K / sup_small) / (dn * log_n + 1)),
        implied_C4=K**2 / (delta ** f.dim * (1 + delta / 2) ** (2 * N) * K_inner**2),
        delta_in_admissible_range=1 / (ADMISSIBLE_A * log_n**100) <= delta <= 1 / (ADMISSIBLE_A * log_n**2),
    )

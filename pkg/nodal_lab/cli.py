"""
nodal-lab command-line entry point.

Usage:
    nodal-lab frequency --field field.json --center 0,0 --rmin 0.1 --rmax 1 --count 64
    nodal-lab window --field field.json --center 0,0 --r 0.5 --diagnostics
    nodal-lab subdivide-count --field field.json --corner 0,0 --side 1 --B 4
    nodal-lab tail-check --p 1/2 --epsilon 0.5 --sigma 0.1 --kmax 200
    nodal-lab tunnels --field field.json --center 0,0 --r 0.5 --format csv
    nodal-lab tunnels --degrees 8,16,32,64 --gate 4
    nodal-lab selftest

Configuration is resolved from settings, then ``--config`` (an ExperimentConfig
JSON document), then flags. JSON results embed the resolved configuration.
"""
import argparse
import contextlib
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from nodal_lab import __version__
from nodal_lab.config import settings
from nodal_lab.errors import (
    EXIT_COMPUTATION,
    EXIT_OK,
    EXIT_PRECONDITION,
    EXIT_USAGE,
    ClaimSearchError,
    ComputationError,
    LowFrequencyError,
    NodalLabError,
    NotAZero,
    PreconditionError,
    exit_code_for,
)
from nodal_lab.field import (
    FieldOracle,
    eigen_residual,
    evaluate,
    field_from_json,
    lift,
    make_harmonic_polynomial,
    make_torus_eigenfunction,
    random_harmonic_polynomial,
)
from nodal_lab.growth import (
    doubling_index_ball,
    doubling_index_cube,
    doubling_profile,
    frequency_beta,
    frequency_profile,
    sup_norm,
    surface_H,
)
from nodal_lab.models.experiment import ExperimentConfig
from nodal_lab.models.field import BallSpec, CubeSpec
from nodal_lab.models.tunnels import OrientedBox, SignChangeCertificate
from nodal_lab.nodal import (
    YAU_PATTERNS,
    density_check,
    f_ratio_experiment,
    hyperplane_nodal_measure,
    lift_zero_slices,
    naive_lower_bound_check,
    nodal_measure,
    pattern_modes,
    yau_experiment,
)
from nodal_lab.subdivision import (
    THRESHOLD_RULES,
    as_fraction,
    binomial_tail_exact,
    census_high_index,
    claim_k0_search,
    exact_reduction_distribution,
    iterated_census,
    iteration_keep_probability,
    partition_cube,
    reduction_tail,
    simulate_iteration_process,
)
from nodal_lab.tunnels import (
    build_tunnels,
    classify_good_tunnels,
    detect_sign_changes,
    layer_growth_report,
    max_on_sphere,
    pack_disjoint_balls,
    run_tunnel_construction,
    tunnel_params,
    tunnel_scaling,
)
from nodal_lab.windows import find_frequency_window, find_plateau

logger = logging.getLogger(__name__)

# flag dest -> (config block, field)
CONSTANT_FLAGS = {
    "A": ("constants", "A"),
    "c": ("constants", "c"),
    "N0": ("constants", "N0"),
    "c1": ("constants", "c1"),
    "kappa": ("constants", "kappa"),
    "delta_scale": ("constants", "delta_scale"),
    "width_factor": ("constants", "width_factor"),
    "alpha": ("constants", "alpha"),
    "gate": ("constants", "frequency_gate"),
    "order_2d": ("resolution", "quadrature_order_2d"),
    "order_3d": ("resolution", "quadrature_order_3d"),
    "sup_resolution": ("resolution", "sup_resolution"),
    "cube_centers": ("resolution", "cube_centers_per_side"),
    "cube_radii": ("resolution", "cube_radii_count"),
    "cube_sup_resolution": ("resolution", "cube_sup_resolution"),
    "partition_budget": ("resolution", "partition_budget"),
    "cell_budget": ("resolution", "tunnel_cell_budget"),
    "samples_per_cube": ("resolution", "samples_per_cube"),
    "window_samples": ("resolution", "window_samples"),
    "nodal_cells": ("resolution", "nodal_initial_cells"),
}
COMMON_FLAGS = {"command", "config", "output", "format", "seed", "log_level"} | set(CONSTANT_FLAGS)

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "frequency": {"count": 64},
    "doubling": {"count": 6},
    "window": {"diagnostics": False},
    "subdivide-count": {"B": 4, "rule": "blogb"},
    "tail-check": {},
    "iterate-sim": {"N_start": 1000.0, "k": 20, "trials": 10000},
    "tunnels": {"paper_constants": False},
    "nodal-measure": {"naive": False},
    "yau-check": {"pattern": "sine-product", "dim": 2, "ks": [2, 4, 8], "radius": 1.0},
    "density-check": {"pattern": "sine-product", "dim": 2, "probes": 64, "radius": 1.0},
    "f-ratio": {"dim": 2, "degrees": [2, 4, 8], "seeds": [0, 1, 2], "rho": 1.0},
    "selftest": {},
}


class LabArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with EXIT_USAGE."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    """A required parameter is missing after config and flags are merged."""


class Output:
    """Result payload and CSV rows, filled as a command progresses."""

    def __init__(self):
        self.payload: Dict[str, Any] = {}
        self.rows: List[Dict[str, Any]] = []


# ---- argument types -------------------------------------------------


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _rational(text: str) -> str:
    try:
        return str(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational 'num/den', got {text!r}")


def _require(params: Dict[str, Any], *names: str):
    missing = [name for name in names if params.get(name) is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join(f"--{m.replace('_', '-')}" for m in missing))


def _load_field(params: Dict[str, Any]) -> FieldOracle:
    _require(params, "field")
    path = Path(params["field"])
    try:
        text = path.read_text()
    except OSError as e:
        raise PreconditionError(f"cannot read field file {path}: {e}") from e
    return field_from_json(text)


# ---- commands -------------------------------------------------------


def cmd_frequency(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Frequency profile H(x, r), beta(x, r) on a geometric radius grid."""
    _require(params, "center", "rmin", "rmax")
    f = _load_field(params)
    order = params.get("order") or config.resolution.quadrature_order(f.dim)
    profile = frequency_profile(f, params["center"], params["rmin"], params["rmax"], params["count"], order)
    out.payload = profile.model_dump()
    out.rows = [
        {"center": ",".join(repr(c) for c in profile.center), "r": s.r, "H": s.H, "beta": s.beta,
         "order": profile.quadrature_order}
        for s in profile.samples
    ]


def cmd_doubling(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Ball doubling index along a dyadic ladder, and optionally a cube index N(Q)."""
    _require(params, "center", "rmax")
    f = _load_field(params)
    res = config.resolution
    profile = doubling_profile(f, params["center"], params["rmax"], params["count"], res.sup_resolution)
    out.payload = profile.model_dump()
    out.rows = [{"r": r, "index": v} for r, v in zip(profile.radii, profile.indices)]
    if params.get("corner") is not None:
        _require(params, "side")
        cube = CubeSpec(min_corner=params["corner"], side=params["side"])
        out.payload["cube"] = cube.model_dump()
        out.payload["cube_index"] = doubling_index_cube(
            f, cube, res.cube_centers_per_side, res.cube_radii_count, res.cube_sup_resolution
        )


def cmd_window(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Frequency window in [r, 3r/2) and, with --diagnostics, the layer growth report."""
    _require(params, "center", "r")
    f = _load_field(params)
    order = config.resolution.quadrature_order(f.dim)
    window = find_frequency_window(
        f,
        params["center"],
        params["r"],
        gate=config.constants.frequency_gate,
        order=order,
        verification_samples=config.resolution.window_samples,
    )
    out.payload = {"window": window.model_dump()}
    out.rows = [{
        "s": window.s, "N": window.N, "rel_halfwidth": window.rel_halfwidth,
        "verification_samples": window.verification_samples, "bracket_holds": window.bracket_holds,
    }]
    if params["diagnostics"]:
        report = layer_growth_report(f, params["center"], window, resolution=config.resolution.sup_resolution, order=order)
        out.payload["diagnostics"] = report.model_dump()


def cmd_subdivide_count(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Census of high-index subcubes at one partition, or iterated over --levels."""
    _require(params, "corner", "side")
    f = _load_field(params)
    cube = CubeSpec(min_corner=params["corner"], side=params["side"])
    res, const = config.resolution, config.constants
    table_args = dict(
        centers_per_side=res.cube_centers_per_side,
        radii_count=res.cube_radii_count,
        resolution=res.cube_sup_resolution,
        budget=res.partition_budget,
    )
    if params.get("levels"):
        censuses = iterated_census(
            f, cube, const.A, params["levels"], params["rule"], const.c1, const.N0, const.kappa,
            params.get("threshold"), **table_args,
        )
    else:
        censuses = [census_high_index(f, cube, params["B"], params.get("threshold"), c=const.c, N0=const.N0, **table_args)]
    out.payload = {
        "levels": [
            {k: v for k, v in c.model_dump().items() if k != "indices"} for c in censuses
        ]
    }
    for level, census in enumerate(censuses, start=1):
        for flat, value in enumerate(census.indices):
            idx = np.unravel_index(flat, (census.B,) * cube.dim, order="F")
            out.rows.append({
                "level": level, "B": census.B, "grid_index": ",".join(str(int(i)) for i in idx),
                "index": value, "above": value > census.threshold,
            })


def cmd_tail_check(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Smallest k0 for the binomial tail claim, re-verified exactly."""
    _require(params, "p", "epsilon", "sigma", "kmax")
    out.payload = {"p": str(as_fraction(params["p"])), "epsilon": params["epsilon"], "sigma": params["sigma"]}
    try:
        tail = claim_k0_search(params["p"], params["epsilon"], params["sigma"], params["kmax"])
    except ClaimSearchError as e:
        out.payload["largest_violation"] = e.largest_violation
        raise
    out.payload = tail.model_dump()
    out.rows = [tail.model_dump()]


def cmd_iterate_sim(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Exact and Monte Carlo distribution of the saturating iteration process."""
    if params.get("p") is None:
        p = iteration_keep_probability(config.constants.A)
    else:
        p = as_fraction(params["p"])
    dist = simulate_iteration_process(
        p, config.constants.c, params["N_start"], config.constants.N0, params["k"], params["trials"], config.seed
    )
    out.payload = dist.model_dump()
    if params.get("tail") is not None:
        out.payload["tail"] = {"l": params["tail"], "probability": str(reduction_tail(dist, params["tail"]))}
    out.rows = [
        {"reductions": o.reductions, "value": o.value, "probability": o.probability, "empirical": dist.empirical[o.reductions]}
        for o in dist.exact
    ]


def cmd_tunnels(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Full tunnel construction for one ball; CSV lists the packed zero balls.

    With --degrees, runs Re z^d at the origin for each degree and fits the
    ball-count scaling instead.
    """
    if params.get("degrees"):
        scaling = tunnel_scaling(
            params["degrees"], params.get("r") or 0.5, config.constants, config.resolution,
            threshold=params.get("threshold"), domain_radius=params.get("domain_radius"),
        )
        out.payload = scaling.model_dump()
        out.rows = [row.model_dump() for row in scaling.rows]
        return
    _require(params, "center", "r")
    f = _load_field(params)
    window = find_frequency_window(
        f,
        params["center"],
        params["r"],
        gate=config.constants.frequency_gate,
        order=config.resolution.quadrature_order(f.dim),
        verification_samples=config.resolution.window_samples,
    )
    out.payload = {"window": window.model_dump()}
    report = run_tunnel_construction(
        f,
        params["center"],
        params["r"],
        config.constants,
        config.resolution,
        paper_constants=params["paper_constants"],
        tunnels_per_side=params.get("tunnels_per_side"),
        cubes_per_tunnel=params.get("cubes_per_tunnel"),
        threshold=params.get("threshold"),
        window=window,
    )
    out.payload = report.model_dump()
    midpoints = [
        (0.5 * (np.asarray(c.p_plus) + np.asarray(c.p_minus)), c) for c in report.certificates
    ]
    for ball in report.balls:
        center = np.asarray(ball.center)
        cert = next(c for mid, c in midpoints if np.allclose(mid, center, rtol=0.0, atol=1e-12 * ball.radius))
        row = {f"x{i + 1}": v for i, v in enumerate(ball.center)}
        row.update({
            "radius": ball.radius, "tunnel": cert.tunnel, "cell": cert.cell,
            "u_plus": cert.values[0], "u_minus": cert.values[1], "zero_value": cert.zero_value,
        })
        out.rows.append(row)


def cmd_nodal_measure(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Nodal measure in a ball; --naive adds the naive lower-bound record at a zero center."""
    _require(params, "center", "radius")
    f = _load_field(params)
    region = BallSpec(center=params["center"], radius=params["radius"])
    cell = params.get("cell_size") or region.radius / config.resolution.nodal_initial_cells
    estimate = nodal_measure(f, region, cell, params.get("max_cells"))
    out.payload = {"estimate": estimate.model_dump()}
    out.rows = [{"cell_size": h, "measure": m} for h, m in estimate.refinement_history]
    if params["naive"]:
        out.payload["naive"] = naive_lower_bound_check(f, params["center"], params["radius"], cell).model_dump()


def _torus_field(params: Dict[str, Any]) -> FieldOracle:
    if params.get("field") is not None:
        return _load_field(params)
    _require(params, "k")
    n = params["dim"]
    return make_torus_eigenfunction(n, pattern_modes(params["pattern"], n, params["k"]))


def cmd_yau_check(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Nodal measure of torus eigenfunctions against sqrt(lambda)."""
    n = params["dim"]
    center = params.get("center") or [0.0] * n
    table = yau_experiment(params["ks"], params["pattern"], BallSpec(center=center, radius=params["radius"]))
    out.payload = table.model_dump()
    out.rows = [row.model_dump() for row in table.rows]


def cmd_density_check(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Largest distance from a sample point to the zero set of a torus eigenfunction."""
    u = _torus_field(params)
    center = params.get("center") or [0.0] * u.dim
    report = density_check(u, BallSpec(center=center, radius=params["radius"]), params["probes"])
    out.payload = report.model_dump()
    out.rows = [{k: v for k, v in out.payload.items() if k != "argmax"}]


def cmd_f_ratio(params: Dict[str, Any], config: ExperimentConfig, out: Output):
    """Normalized nodal measure of seeded harmonic polynomials against the frequency."""
    table = f_ratio_experiment(params["dim"], params["degrees"], params["seeds"], params["rho"], params.get("cell_size"))
    out.payload = table.model_dump()
    out.rows = [row.model_dump() for row in table.rows]


# ---- selftest -------------------------------------------------------


def _close(a: float, b: float, rel: float = 1e-9, abs_: float = 1e-12) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)


def _raises(exc: type, fn: Callable[[], Any]) -> bool:
    try:
        fn()
    except exc:
        return True
    return False


def _axis_cells(offset: float = 0.0, count: int = 8) -> List[OrientedBox]:
    """Square cells of side 0.1 along x1, cell t centered at ((t - 3) 0.1 + offset, 0)."""
    eye = [[1.0, 0.0], [0.0, 1.0]]
    return [
        OrientedBox(center=[(t - 3) * 0.1 + offset, 0.0], axes=eye, half_extents=[0.05, 0.05])
        for t in range(count)
    ]


def _point_certificate(mid: Sequence[float], half: float = 0.01) -> SignChangeCertificate:
    mid = np.asarray(mid, dtype=float)
    cube = OrientedBox(center=mid.tolist(), axes=[[1.0, 0.0], [0.0, 1.0]], half_extents=[half, half])
    return SignChangeCertificate(
        tunnel=0, cell=0, cube=cube,
        p_plus=(mid + [half, 0.0]).tolist(), p_minus=(mid - [half, 0.0]).tolist(),
        values=(1.0, -1.0), zero=mid.tolist(), zero_value=0.0,
    )


def selftest_checks(order: Optional[int] = None, seed: Optional[int] = None) -> List[Tuple[str, Callable[[], bool]]]:
    """Named closed-form checks; ``order`` overrides the sphere quadrature order."""
    seed = settings.RANDOM_SEED if seed is None else seed
    re1 = make_harmonic_polynomial(2, [{"degree": 1, "part": "cos", "weight": 1.0}])
    re2 = make_harmonic_polynomial(2, [{"degree": 2, "part": "cos", "weight": 1.0}])
    re3 = make_harmonic_polynomial(2, [{"degree": 3, "part": "cos", "weight": 1.0}])
    re4 = make_harmonic_polynomial(2, [{"degree": 4, "part": "cos", "weight": 1.0}])
    re8 = make_harmonic_polynomial(2, [{"degree": 8, "part": "cos", "weight": 1.0}])
    one3 = make_harmonic_polynomial(3, [{"degree": 0, "order": 0, "part": "cos", "weight": 2 * math.sqrt(math.pi)}])
    x1_3 = make_harmonic_polynomial(3, [{"degree": 1, "order": 1, "part": "cos", "weight": 2 * math.sqrt(math.pi / 3)}])
    x1x2 = make_harmonic_polynomial(3, [{"degree": 2, "order": 2, "part": "sin", "weight": 2 * math.sqrt(math.pi / 15)}])
    mode34 = make_torus_eigenfunction(2, [{"k": [3, 4]}])
    sin1 = make_torus_eigenfunction(2, [{"k": [1, 0]}])
    grid2 = make_torus_eigenfunction(2, pattern_modes("sine-product", 2, 2))
    re30 = make_harmonic_polynomial(2, [{"degree": 30, "part": "cos", "weight": 1.0}], domain_radius=4.0)
    one2 = make_harmonic_polynomial(2, [{"degree": 0, "part": "cos", "weight": 1.0}])
    sin5 = make_torus_eigenfunction(2, [{"k": [5, 0]}])
    sin4 = make_torus_eigenfunction(2, [{"k": [4, 0]}])
    sin1_wide = make_torus_eigenfunction(2, [{"k": [1, 0]}], domain_radius=8.0)
    small_square = CubeSpec(min_corner=[-0.05, -0.05], side=0.1)
    origin2, origin3 = [0.0, 0.0], [0.0, 0.0, 0.0]
    unit2 = BallSpec(center=origin2, radius=1.0)
    unit3 = BallSpec(center=origin3, radius=1.0)

    def plateau_constant() -> bool:
        ts = np.linspace(0.0, 1.0, 101)
        result = find_plateau(ts, np.full(len(ts), math.e), 0.0, 1.0)
        return _close(result.x, 0.05) and _close(result.N, math.e)

    def unit_square_partition() -> bool:
        cubes = partition_cube(CubeSpec(min_corner=origin2, side=1.0), 2)
        corners = [tuple(c.min_corner) for c in cubes]
        return corners == [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)] and all(c.side == 0.5 for c in cubes)

    def sphere_maximum() -> bool:
        x, K = max_on_sphere(re1, origin2, 1.0)
        return _close(K, 1.0) and np.allclose(x, [1.0, 0.0], atol=1e-9)

    cache: Dict[str, Any] = {}

    def window30():
        if "re30" not in cache:
            cache["re30"] = find_frequency_window(re30, origin2, 0.5, order=order)
        return cache["re30"]

    def window_in_layer() -> bool:
        window = window30()
        return 0.5 <= window.s < 0.75 and 15.0 <= window.N <= 30.0 and window.bracket_holds

    def box_tiling() -> bool:
        window = window30()
        params = tunnel_params(window.s, window.N, 0.5, 2, tunnels_per_side=4, cubes_per_tunnel=8)
        geometry = build_tunnels(re30, origin2, 0.5, window, params)
        total = math.fsum(c.volume for t in geometry.cells for c in t)
        gap = float(np.linalg.norm(np.asarray(geometry.x) - np.asarray(geometry.x_tilde)))
        return (
            len(geometry.tunnels) == 4
            and all(len(t) == 8 for t in geometry.cells)
            and _close(total, geometry.box.volume, rel=1e-12)
            and _close(gap, params.delta * window.s, rel=1e-9)
        )

    def flat_profile() -> bool:
        profile = frequency_profile(re3, origin2, 0.1, 1.0, 8, order)
        return all(_close(s.beta, 3.5) for s in profile.samples) and profile.identity_residual < 1e-8

    def seeded_profile() -> bool:
        f = random_harmonic_polynomial(2, 6, seed=seed)
        profile = frequency_profile(f, [0.2, 0.1], 0.05, 1.5, 16, order)
        betas = np.array([s.beta for s in profile.samples])
        return bool(np.all(np.diff(betas) >= -1e-9 * np.abs(betas[1:]))) and profile.identity_residual < 1e-4

    def unit_cube_partition() -> bool:
        cubes = partition_cube(CubeSpec(min_corner=origin3, side=1.0), 3)
        return len(cubes) == 27 and _close(math.fsum(c.side**3 for c in cubes), 1.0)

    def floor_saturation() -> bool:
        dist = simulate_iteration_process("1/2", 0.25, 5.0, 10.0, 6, 50, seed=seed)
        return all(o.value == 10.0 for o in dist.exact)

    def floor_thresholds() -> bool:
        levels = iterated_census(one2, small_square, A=2, k=2, N0=10.0)
        return [c.threshold for c in levels] == [10.0, 10.0] and [c.count_above for c in levels] == [0, 0]

    def packing(*mids: Sequence[float]) -> int:
        return len(pack_disjoint_balls([_point_certificate(m) for m in mids], 0.1, BallSpec(center=origin2, radius=2.0)))

    def unknown_flag() -> bool:
        with contextlib.redirect_stderr(io.StringIO()):
            return run(["tail-check", "--bogus", "1"]) == EXIT_USAGE

    return [
        ("field: Re z at (0.3, 0.7) is 0.3", lambda: _close(evaluate(re1, [0.3, 0.7]), 0.3)),
        ("field: x1 x2 at (2, 3, 0) is 6", lambda: _close(evaluate(x1x2, [2.0, 3.0, 0.0]), 6.0)),
        ("field: Re z^2 vanishes on the diagonal", lambda: abs(evaluate(re2, [1.0, 1.0])) < 1e-12),
        ("field: mode (3, 4) has lambda 25", lambda: _close(mode34.eigenvalue, 25.0)),
        ("field: mode (3, 4) at (pi/6, 0) is 1", lambda: _close(evaluate(mode34, [math.pi / 6, 0.0]), 1.0)),
        ("field: lift of sin x1 at (pi/2, 1) is e", lambda: _close(evaluate(lift(sin1), [math.pi / 2, 0.0, 1.0]), math.e)),
        ("field: eigen residual of mode (3, 4)", lambda: eigen_residual(mode34, [0.2, 0.1], 1e-3) < 1e-3),
        ("field: mode (5, 0) has lambda 25", lambda: _close(sin5.eigenvalue, 25.0)),
        ("field: sin 5x1 at (0.1, 0) is sin 0.5", lambda: _close(evaluate(sin5, [0.1, 0.0]), math.sin(0.5))),
        ("field: lift of sin x1 vanishes at (pi, 0, 7)",
         lambda: abs(evaluate(lift(sin1_wide), [math.pi, 0.0, 7.0])) < 1e-9),
        ("growth: H of u=1 on the sphere of radius 2 is 16 pi",
         lambda: _close(surface_H(one3, origin3, 2.0, order), 16 * math.pi)),
        ("growth: H of x1 on the unit circle is pi", lambda: _close(surface_H(re1, origin2, 1.0, order), math.pi)),
        ("growth: beta of Re z^3 is 3.5", lambda: _close(frequency_beta(re3, origin2, 0.7, order), 3.5)),
        ("growth: beta of u=1 in R^3 is 1", lambda: _close(frequency_beta(one3, origin3, 1.0, order), 1.0)),
        ("growth: sup of x1 on the unit ball is 1", lambda: _close(sup_norm(x1_3, unit3), 1.0, rel=1e-6)),
        ("growth: doubling index of Re z^4 at 0 is 4", lambda: _close(doubling_index_ball(re4, origin2, 0.5), 4.0, rel=1e-6)),
        ("growth: sup of sin 5x1 on the unit disk is 1", lambda: _close(sup_norm(sin5, unit2), 1.0, rel=1e-3)),
        ("growth: doubling index of u=1 in R^3 is 0",
         lambda: abs(doubling_index_ball(one3, origin3, 0.5)) < 1e-12),
        ("growth: Re z^3 profile is flat at 3.5", flat_profile),
        (f"growth: seeded random profile is monotone (seed {seed})", seeded_profile),
        ("windows: constant e gives the first-step midpoint", plateau_constant),
        ("windows: Re z^30 window lies in [r, 3r/2)", window_in_layer),
        ("windows: Re z^4 trips the low-frequency gate",
         lambda: _raises(LowFrequencyError, lambda: find_frequency_window(re4, origin2, 0.5, order=order))),
        ("subdivision: unit square, B=2", unit_square_partition),
        ("subdivision: unit cube, B=3", unit_cube_partition),
        ("subdivision: B=1 is the identity", lambda: partition_cube(small_square, 1) == [small_square]),
        ("subdivision: u=1 has no high subcubes",
         lambda: census_high_index(one2, small_square, 3, threshold=0.5).count_above == 0),
        ("subdivision: N0 floors the iterated thresholds", floor_thresholds),
        ("subdivision: sigma gate rejects large sigma",
         lambda: _raises(PreconditionError, lambda: claim_k0_search("1/2", 0.5, 0.2, 200))),
        (f"subdivision: start below N0 saturates (seed {seed})", floor_saturation),
        ("subdivision: tail(1/2, 1, 1) is 1/2", lambda: binomial_tail_exact(Fraction(1, 2), 1, 1) == Fraction(1, 2)),
        ("subdivision: empty tail is 0", lambda: binomial_tail_exact(Fraction(1, 3), 5, 0) == 0),
        ("subdivision: one step reduces with 1 - p",
         lambda: exact_reduction_distribution(Fraction(1, 3), 1) == [Fraction(1, 3), Fraction(2, 3)]),
        ("tunnels: max of x1 on the unit circle", sphere_maximum),
        ("tunnels: Re z^30 box tiles into 4 x 8 cells", box_tiling),
        ("tunnels: x1 changes sign only in cell 3",
         lambda: [c.cell for c in detect_sign_changes(re1, _axis_cells())] == [3]),
        ("tunnels: x1 > 0 gives no certificates", lambda: detect_sign_changes(re1, _axis_cells(offset=1.0)) == []),
        ("tunnels: u=1 tunnels are all good",
         lambda: classify_good_tunnels(one2, [_axis_cells(count=3), _axis_cells(0.02, 3)], 0.5) == [0, 1]),
        ("tunnels: infinite threshold keeps every tunnel",
         lambda: classify_good_tunnels(re8, [_axis_cells(), _axis_cells(0.05)], math.inf) == [0, 1]),
        ("tunnels: one certificate packs one ball", lambda: packing([0.1, 0.0]) == 1),
        ("tunnels: centers 3r apart pack two balls", lambda: packing([0.0, 0.0], [0.0, 0.3]) == 2),
        ("tunnels: centers 1.5r apart pack one ball", lambda: packing([0.0, 0.0], [0.0, 0.15]) == 1),
        ("nodal: Re z^8 in the unit disk has length 16",
         lambda: _close(nodal_measure(re8, unit2, 1 / 64).measure, 16.0, rel=0.01)),
        ("nodal: x1 in the unit ball has area pi",
         lambda: _close(nodal_measure(x1_3, unit3).measure, math.pi, rel=0.01)),
        ("nodal: sin x1 chord in the unit disk is 2", lambda: _close(hyperplane_nodal_measure("sine", 1, unit2), 2.0)),
        ("nodal: lift keeps the zero pattern", lambda: lift_zero_slices(grid2, unit2, [-0.5, 0.0, 0.5]) == 0),
        ("nodal: naive ratio of x1 at 0 is 2",
         lambda: _close(naive_lower_bound_check(re1, origin2, 1.0).ratio, 2.0, rel=0.01)),
        ("nodal: (0.5, 0) is not a zero of x1",
         lambda: _raises(NotAZero, lambda: naive_lower_bound_check(re1, [0.5, 0.0], 0.25))),
        ("nodal: empty f-ratio family", lambda: f_ratio_experiment(2, [], [0]).rows == []),
        ("nodal: empty yau family", lambda: yau_experiment([], "sine", unit2).rows == []),
        ("nodal: sin 4x1 max gap is pi/8",
         lambda: _close(density_check(sin4, BallSpec(center=[math.pi / 8, 0.1], radius=0.5), 49).max_gap,
                        math.pi / 8, rel=1e-6)),
        ("nodal: one sample point on the zero set has gap 0",
         lambda: density_check(sin4, BallSpec(center=origin2, radius=0.5), 1).max_gap == 0.0),
        ("cli: unknown flag is a usage error", unknown_flag),
    ]


def run_selftest(order: Optional[int] = None, stream=None, seed: Optional[int] = None) -> int:
    """Run every check, print a pass/fail table and return the exit code."""
    stream = stream or sys.stdout
    seed = settings.RANDOM_SEED if seed is None else seed
    results = []
    for name, check in selftest_checks(order, seed):
        try:
            ok, detail = bool(check()), ""
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        results.append((name, ok, detail))

    passed = sum(1 for _, ok, _ in results if ok)
    print("=" * 70, file=stream)
    print(f"nodal-lab {__version__} selftest (seed {seed})", file=stream)
    print("=" * 70, file=stream)
    for name, ok, detail in results:
        print(f"{'✓' if ok else '✗'} {name}", file=stream)
        if detail:
            print(f"    {detail}", file=stream)
    print(f"\n{passed}/{len(results)} checks passed", file=stream)
    return EXIT_OK if passed == len(results) else EXIT_COMPUTATION


# ---- output ---------------------------------------------------------


def render(config: ExperimentConfig, out: Output, error: Optional[str] = None) -> str:
    """JSON document with the resolved config, or CSV of the command's rows."""
    if config.format == "csv":
        rows = out.rows or [{k: v for k, v in out.payload.items() if not isinstance(v, (dict, list))}]
        buffer = io.StringIO()
        if rows and rows[0]:
            writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        return buffer.getvalue()
    document = {"config": config.model_dump(mode="json"), "result": out.payload}
    if error is not None:
        document["error"] = error
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def write_output(config: ExperimentConfig, text: str):
    if config.output:
        Path(config.output).write_text(text)
        logger.info(f"Wrote {config.command} results to {config.output}")
    else:
        sys.stdout.write(text)


# ---- parser ---------------------------------------------------------

COMMANDS: Dict[str, Callable[[Dict[str, Any], ExperimentConfig, Output], None]] = {
    "frequency": cmd_frequency,
    "doubling": cmd_doubling,
    "window": cmd_window,
    "subdivide-count": cmd_subdivide_count,
    "tail-check": cmd_tail_check,
    "iterate-sim": cmd_iterate_sim,
    "tunnels": cmd_tunnels,
    "nodal-measure": cmd_nodal_measure,
    "yau-check": cmd_yau_check,
    "density-check": cmd_density_check,
    "f-ratio": cmd_f_ratio,
}


def _common_parser() -> argparse.ArgumentParser:
    common = LabArgumentParser(add_help=False)
    common.add_argument("--config", help="ExperimentConfig JSON file")
    common.add_argument("--output", "-o", help="Output file path (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], help="Output format (default: json)")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    constants = common.add_argument_group("constants")
    constants.add_argument("--A", type=int, help="Partition base")
    constants.add_argument("--c", type=float, help="Census reduction constant")
    constants.add_argument("--N0", type=float, help="Index floor")
    constants.add_argument("--c1", type=float, help="Reduced-threshold constant")
    constants.add_argument("--kappa", type=float, help="Log-power exponent")
    constants.add_argument("--delta-scale", type=float, help="delta = scale / ln^2 N")
    constants.add_argument("--width-factor", type=float, help="Tunnel box width in units of r")
    constants.add_argument("--alpha", type=float, help="Zero-ball radius exponent r / N^alpha")
    constants.add_argument("--gate", type=float, help="Low-frequency gate")
    resolution = common.add_argument_group("resolution")
    resolution.add_argument("--order-2d", type=int, help="Circle quadrature nodes")
    resolution.add_argument("--order-3d", type=int, help="Sphere polar quadrature nodes")
    resolution.add_argument("--sup-resolution", type=int, help="Sup-norm sampling resolution")
    resolution.add_argument("--cube-centers", type=int, help="Candidate centers per cube side")
    resolution.add_argument("--cube-radii", type=int, help="Candidate radii per center")
    resolution.add_argument("--cube-sup-resolution", type=int, help="Sup resolution inside cube indices")
    resolution.add_argument("--partition-budget", type=int, help="Largest allowed B^n")
    resolution.add_argument("--cell-budget", type=int, help="Largest allowed tunnel cell count")
    resolution.add_argument("--samples-per-cube", type=int, help="Sign samples per cell axis")
    resolution.add_argument("--window-samples", type=int, help="Window verification samples")
    resolution.add_argument("--nodal-cells", type=int, help="Initial nodal lattice cells per radius")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog="nodal-lab", description="Nodal-set lower-bound laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Available commands")
    common = _common_parser()

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, parents=[common], help=help_text)

    p = add("frequency", "Frequency profile H(x, r), beta(x, r)")
    p.add_argument("--field", help="Field JSON file")
    p.add_argument("--center", type=_float_list, help="Center, e.g. 0,0")
    p.add_argument("--rmin", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--order", type=int, help="Initial quadrature order")

    p = add("doubling", "Ball doubling profile and cube doubling index")
    p.add_argument("--field")
    p.add_argument("--center", type=_float_list)
    p.add_argument("--rmax", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--corner", type=_float_list, help="Cube min-corner for N(Q)")
    p.add_argument("--side", type=float)

    p = add("window", "Frequency window in [r, 3r/2)")
    p.add_argument("--field")
    p.add_argument("--center", type=_float_list)
    p.add_argument("--r", type=float)
    p.add_argument("--diagnostics", action="store_true", default=None, help="Add the layer growth report")

    p = add("subdivide-count", "Census of high-index subcubes")
    p.add_argument("--field")
    p.add_argument("--corner", type=_float_list)
    p.add_argument("--side", type=float)
    p.add_argument("--B", type=int, help="Partition factor for a single census")
    p.add_argument("--levels", type=int, help="Iterate B = A, ..., A^levels")
    p.add_argument("--rule", choices=THRESHOLD_RULES)
    p.add_argument("--threshold", type=float)

    p = add("tail-check", "Binomial tail claim: smallest k0")
    p.add_argument("--p", type=_rational)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--kmax", type=int)

    p = add("iterate-sim", "Saturating iteration process")
    p.add_argument("--p", type=_rational, help="Keep probability (default: 1/(2A))")
    p.add_argument("--N-start", dest="N_start", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--tail", type=int, help="Also report P(#reductions >= tail)")

    p = add("tunnels", "Tunnel construction and zero-ball packing")
    p.add_argument("--field")
    p.add_argument("--center", type=_float_list)
    p.add_argument("--r", type=float)
    p.add_argument("--paper-constants", action="store_true", default=None)
    p.add_argument("--tunnels-per-side", type=int)
    p.add_argument("--cubes-per-tunnel", type=int)
    p.add_argument("--threshold", type=float, help="Good-tunnel threshold (inf: all good)")
    p.add_argument("--degrees", type=_int_list, help="Fit ball-count scaling for Re z^d over these degrees")
    p.add_argument("--domain-radius", type=float, help="Domain radius for the --degrees fields")

    p = add("nodal-measure", "Nodal measure in a ball")
    p.add_argument("--field")
    p.add_argument("--center", type=_float_list)
    p.add_argument("--radius", type=float)
    p.add_argument("--cell-size", type=float)
    p.add_argument("--max-cells", type=int)
    p.add_argument("--naive", action="store_true", default=None, help="Naive bound record at the center")

    p = add("yau-check", "Nodal measure against sqrt(lambda)")
    p.add_argument("--ks", type=_int_list)
    p.add_argument("--pattern", choices=YAU_PATTERNS)
    p.add_argument("--dim", type=int)
    p.add_argument("--center", type=_float_list)
    p.add_argument("--radius", type=float)

    p = add("density-check", "Distance to the zero set against 1/sqrt(lambda)")
    p.add_argument("--field", help="Torus eigenfunction JSON (default: --pattern with --k)")
    p.add_argument("--k", type=int)
    p.add_argument("--pattern", choices=YAU_PATTERNS)
    p.add_argument("--dim", type=int)
    p.add_argument("--center", type=_float_list)
    p.add_argument("--radius", type=float)
    p.add_argument("--probes", type=int)

    p = add("f-ratio", "Normalized nodal measure against the frequency")
    p.add_argument("--dim", type=int)
    p.add_argument("--degrees", type=_int_list)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--rho", type=float)
    p.add_argument("--cell-size", type=float)

    p = subparsers.add_parser("selftest", help="Run the closed-form checks")
    p.add_argument("--quadrature-order", type=int, help="Override the sphere quadrature order")
    p.add_argument("--seed", type=int, help="Seed for the randomized checks")
    p.add_argument("--output", "-o", help="Output file path (default: stdout)")
    p.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """settings defaults, then the --config document, then flags."""
    document: Dict[str, Any] = {}
    if args.config:
        try:
            document = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise PreconditionError(f"cannot read config file {args.config}: {e}") from e
        except json.JSONDecodeError as e:
            raise PreconditionError(f"config file {args.config} is not JSON: {e}") from e
        if not isinstance(document, dict):
            raise PreconditionError("config document must be a JSON object")
        if document.get("command", args.command) != args.command:
            raise PreconditionError(f"config is for {document['command']!r}, not {args.command!r}")

    flags = vars(args)
    document_params = document.get("params", {})
    if not isinstance(document_params, dict):
        raise PreconditionError("config params must be a JSON object")
    allowed = (set(flags) - COMMON_FLAGS) | set(DEFAULTS[args.command])
    unknown = sorted(set(document_params) - allowed)
    if unknown:
        raise PreconditionError(f"unknown {args.command} params in config: {', '.join(unknown)}")
    params = dict(DEFAULTS[args.command])
    params.update(document_params)
    params.update({k: v for k, v in flags.items() if k not in COMMON_FLAGS and v is not None})

    merged: Dict[str, Any] = {k: v for k, v in document.items() if k not in ("params", "command")}
    for dest, (block, field) in CONSTANT_FLAGS.items():
        if flags.get(dest) is not None:
            merged.setdefault(block, {})[field] = flags[dest]
    for key in ("seed", "output", "format"):
        if flags.get(key) is not None:
            merged[key] = flags[key]
    return ExperimentConfig(command=args.command, params=params, **merged)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, execute and write results; return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if getattr(args, "log_level", None):
        logging.getLogger().setLevel(args.log_level)

    if args.command == "selftest":
        buffer = io.StringIO()
        code = run_selftest(args.quadrature_order, stream=buffer, seed=args.seed)
        if args.output:
            Path(args.output).write_text(buffer.getvalue(), encoding="utf-8")
            logger.info(f"Wrote selftest results to {args.output}")
        else:
            sys.stdout.write(buffer.getvalue())
        return code

    try:
        config = resolve_config(args)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_PRECONDITION
    except NodalLabError as e:
        logger.error(str(e))
        return exit_code_for(e)

    logger.info(f"Running {config.command} (seed {config.seed})")
    out = Output()
    try:
        COMMANDS[config.command](config.params, config, out)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"nodal-lab {config.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_PRECONDITION
    except NodalLabError as e:
        code = exit_code_for(e)
        logger.error(f"{config.command} failed ({type(e).__name__}): {e}")
        if isinstance(e, ComputationError) and out.payload:
            write_output(config, render(config, out, error=str(e)))
        return code

    write_output(config, render(config, out))
    return EXIT_OK


def main() -> int:
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())

"""
Field oracles.

Harmonic polynomials, flat-torus Laplace eigenfunctions and the harmonic
lift h(x, t) = u(x) exp(sqrt(lambda) t), all behind one evaluation
interface with analytic gradients. Oracles are immutable after construction.
"""
import json
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from nodal_lab.config import settings
from nodal_lab.errors import DomainViolation, PreconditionError, UnsupportedDimension
from nodal_lab.harmonics import planar_harmonics, solid_harmonics
from nodal_lab.models.field import FieldSpec, HarmonicTerm, TorusMode

logger = logging.getLogger(__name__)

CHUNK = 1 << 20
DOMAIN_SLACK = 1e-12

TermLike = Union[HarmonicTerm, dict]
ModeLike = Union[TorusMode, dict]


class FieldOracle:
    """Evaluatable scalar field with analytic metadata."""

    def __init__(self, spec: FieldSpec):
        self._spec = spec.model_copy(deep=True)
        if spec.kind == "harmonic-polynomial":
            self._validate_harmonic()
        else:
            self._validate_torus()
        self._modes_k = None
        self._modes_sin = None
        self._modes_w = None
        if spec.kind != "harmonic-polynomial":
            self._modes_k = np.array([m.k for m in spec.modes], dtype=float)
            self._modes_sin = np.array([m.part == "sin" for m in spec.modes])
            self._modes_w = np.array([m.weight for m in spec.modes], dtype=float)

    # ---- validation -------------------------------------------------

    def _validate_harmonic(self):
        spec = self._spec
        if spec.dim not in (2, 3):
            raise UnsupportedDimension(f"harmonic polynomials need n in {{2, 3}}, got {spec.dim}")
        if not spec.coefficients:
            raise PreconditionError("empty coefficient list")
        for t in spec.coefficients:
            if t.degree > settings.MAX_SOLID_HARMONIC_DEGREE:
                raise PreconditionError(
                    f"degree {t.degree} exceeds MAX_SOLID_HARMONIC_DEGREE "
                    f"{settings.MAX_SOLID_HARMONIC_DEGREE}"
                )
            if spec.dim == 2 and t.order not in (None, t.degree):
                raise PreconditionError("n=2 terms are Re/Im z^d; order must equal degree")
            m = t.degree if spec.dim == 2 else (t.order or 0)
            if m == 0 and t.part == "sin":
                raise PreconditionError("sin part of an order-0 harmonic is identically zero")
        spec.degree = max(t.degree for t in spec.coefficients)
        spec.eigenvalue = None

    def _validate_torus(self):
        spec = self._spec
        if not spec.modes:
            raise PreconditionError("empty mode list")
        base_dim = spec.dim - 1 if spec.kind == "lift" else spec.dim
        if any(len(m.k) != base_dim for m in spec.modes):
            raise PreconditionError(f"mode vectors must have length {base_dim}")
        norms = {m.norm_squared for m in spec.modes}
        if len(norms) != 1:
            raise PreconditionError(f"inconsistent |k|^2 across modes: {sorted(norms)}")
        lam = float(norms.pop())
        if lam <= 0:
            raise PreconditionError("eigenvalue must be positive")
        if all(m.weight == 0 for m in spec.modes):
            raise PreconditionError("mode weights are all zero")
        if spec.eigenvalue is not None and not math.isclose(spec.eigenvalue, lam):
            raise PreconditionError(f"declared eigenvalue {spec.eigenvalue} != |k|^2 = {lam}")
        spec.eigenvalue = lam

    # ---- metadata ---------------------------------------------------

    @property
    def spec(self) -> FieldSpec:
        return self._spec.model_copy(deep=True)

    @property
    def dim(self) -> int:
        return self._spec.dim

    @property
    def kind(self) -> str:
        return self._spec.kind

    @property
    def degree(self) -> Optional[int]:
        return self._spec.degree

    @property
    def eigenvalue(self) -> Optional[float]:
        return self._spec.eigenvalue

    @property
    def domain_radius(self) -> float:
        return self._spec.domain_radius

    @property
    def is_harmonic(self) -> bool:
        return self.kind in ("harmonic-polynomial", "lift")

    def __repr__(self) -> str:
        return f"FieldOracle(kind={self.kind!r}, dim={self.dim}, degree={self.degree}, eigenvalue={self.eigenvalue})"

    # ---- domain -----------------------------------------------------

    def check_points(self, points: np.ndarray, what: str = "point"):
        """Raise DomainViolation if any point lies outside the closed domain ball."""
        radii = np.sqrt(np.einsum("ij,ij->i", points, points))
        worst = float(radii.max()) if len(radii) else 0.0
        if worst > self.domain_radius * (1 + DOMAIN_SLACK):
            raise DomainViolation(worst, self.domain_radius, what)

    def check_ball(self, center: Sequence[float], radius: float, what: str = "ball"):
        reach = float(np.linalg.norm(np.asarray(center, dtype=float))) + radius
        if reach > self.domain_radius * (1 + DOMAIN_SLACK):
            raise DomainViolation(reach, self.domain_radius, what)

    # ---- evaluation -------------------------------------------------

    def _raw(self, pts: np.ndarray, with_gradient: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        spec = self._spec
        if spec.kind == "harmonic-polynomial":
            if spec.dim == 2:
                return planar_harmonics(pts, spec.coefficients, with_gradient)
            return solid_harmonics(pts, spec.coefficients, with_gradient)

        base = pts[:, :-1] if spec.kind == "lift" else pts
        phase = base @ self._modes_k.T
        s, c = np.sin(phase), np.cos(phase)
        trig = np.where(self._modes_sin, s, c)
        u = trig @ self._modes_w
        grad = None
        if with_gradient:
            dtrig = np.where(self._modes_sin, c, -s) * self._modes_w
            grad = dtrig @ self._modes_k
        if spec.kind == "torus-eigenfunction":
            return u, grad

        root = math.sqrt(spec.eigenvalue)
        growth = np.exp(root * pts[:, -1])
        h = u * growth
        if with_gradient:
            grad = np.column_stack([grad * growth[:, None], root * h])
        return h, grad

    def values(self, points: np.ndarray, check: bool = True) -> np.ndarray:
        """Field values at points of shape (m, n)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise PreconditionError(f"points have {pts.shape[1]} coordinates, oracle has {self.dim}")
        if check:
            self.check_points(pts)
        if len(pts) <= CHUNK:
            return self._raw(pts, False)[0]
        return np.concatenate([self._raw(pts[i:i + CHUNK], False)[0] for i in range(0, len(pts), CHUNK)])

    def values_and_gradients(self, points: np.ndarray, check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if check:
            self.check_points(pts)
        out_v, out_g = [], []
        for i in range(0, len(pts), CHUNK):
            v, g = self._raw(pts[i:i + CHUNK], True)
            out_v.append(v)
            out_g.append(g)
        return np.concatenate(out_v), np.concatenate(out_g)

    def __call__(self, point: Sequence[float]) -> float:
        return float(self.values(np.asarray(point, dtype=float)[None, :])[0])


def _as_terms(spec: Iterable[TermLike]) -> List[HarmonicTerm]:
    return [t if isinstance(t, HarmonicTerm) else HarmonicTerm(**t) for t in spec]


def _as_modes(modes: Iterable[ModeLike]) -> List[TorusMode]:
    return [m if isinstance(m, TorusMode) else TorusMode(**m) for m in modes]


def make_harmonic_polynomial(
    n: int, spec: Iterable[TermLike], domain_radius: Optional[float] = None, seed: Optional[int] = None
) -> FieldOracle:
    """Harmonic polynomial from a list of solid-harmonic terms."""
    if n not in (2, 3):
        raise UnsupportedDimension(f"harmonic polynomials need n in {{2, 3}}, got {n}")
    terms = _as_terms(spec)
    if not terms:
        raise PreconditionError("empty coefficient list")
    field_spec = FieldSpec(
        kind="harmonic-polynomial",
        dim=n,
        coefficients=terms,
        domain_radius=domain_radius or settings.DOMAIN_RADIUS,
        seed=seed,
    )
    return FieldOracle(field_spec)


def make_torus_eigenfunction(
    n: int, modes: Iterable[ModeLike], domain_radius: Optional[float] = None
) -> FieldOracle:
    """Finite trigonometric combination with a common |k|^2 = lambda."""
    if n < 2:
        raise UnsupportedDimension(f"torus eigenfunctions need n >= 2, got {n}")
    field_spec = FieldSpec(
        kind="torus-eigenfunction",
        dim=n,
        modes=_as_modes(modes),
        domain_radius=domain_radius or settings.DOMAIN_RADIUS,
    )
    return FieldOracle(field_spec)


def lift(u: FieldOracle) -> FieldOracle:
    """Harmonic lift h(x, t) = u(x) exp(sqrt(lambda) t) in one more dimension."""
    if u.kind != "torus-eigenfunction":
        raise PreconditionError(f"lift needs a torus eigenfunction, got {u.kind}")
    if u.eigenvalue is None:
        raise PreconditionError("lift needs an eigenvalue")
    base = u.spec
    field_spec = FieldSpec(
        kind="lift",
        dim=base.dim + 1,
        eigenvalue=base.eigenvalue,
        modes=base.modes,
        domain_radius=base.domain_radius,
    )
    return FieldOracle(field_spec)


def evaluate(f: FieldOracle, p: Sequence[float]) -> float:
    """Closed-form value of f at p."""
    return f(p)


def harmonic_basis(n: int, max_degree: int, min_degree: int = 0) -> List[Tuple[int, Optional[int], str]]:
    """(degree, order, part) of every basis element with min_degree <= degree <= max_degree."""
    basis: List[Tuple[int, Optional[int], str]] = []
    for d in range(min_degree, max_degree + 1):
        if n == 2:
            basis.append((d, None, "cos"))
            if d > 0:
                basis.append((d, None, "sin"))
        else:
            for m in range(0, d + 1):
                basis.append((d, m, "cos"))
                if m > 0:
                    basis.append((d, m, "sin"))
    return basis


def random_harmonic_polynomial(
    n: int,
    degree: int,
    seed: int,
    min_degree: int = 0,
    domain_radius: Optional[float] = None,
) -> FieldOracle:
    """Harmonic polynomial with independent standard-normal weights per basis element."""
    rng = np.random.default_rng(seed)
    basis = harmonic_basis(n, degree, min_degree)
    weights = rng.standard_normal(len(basis))
    terms = [
        HarmonicTerm(degree=d, order=m, part=part, weight=float(w))
        for (d, m, part), w in zip(basis, weights)
    ]
    return make_harmonic_polynomial(n, terms, domain_radius=domain_radius, seed=seed)


def sine_product_modes(n: int, k: int) -> List[TorusMode]:
    """Modes of prod_i sin(k x_i), expanded into a sum of cosines or sines."""
    # sin a = (e^{ia} - e^{-ia}) / 2i; expand the product over sign patterns
    modes = []
    for signs in np.ndindex(*([2] * n)):
        eps = [1 if s == 0 else -1 for s in signs]
        if eps[0] != 1:
            continue
        vec = [e * k for e in eps]
        negatives = sum(1 for e in eps if e < 0)
        # prod sin = (1 / (2i)^n) sum_eps (prod eps) e^{i eps.k x}, paired with -eps
        coef = (-1) ** negatives
        if n % 2 == 0:
            part = "cos"
            weight = coef * 2.0 / (2.0 ** n) * (-1) ** (n // 2)
        else:
            part = "sin"
            weight = coef * 2.0 / (2.0 ** n) * (-1) ** ((n - 1) // 2)
        modes.append(TorusMode(k=vec, part=part, weight=weight))
    return modes


def discrete_laplacian(f: FieldOracle, p: Sequence[float], h: float) -> float:
    """Centered 2n-point finite-difference Laplacian."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    offsets = np.vstack([np.eye(n) * h, -np.eye(n) * h])
    vals = f.values(p[None, :] + offsets)
    return float((vals.sum() - 2 * n * f(p)) / (h * h))


def eigen_residual(f: FieldOracle, p: Sequence[float], h: float) -> float:
    """|Delta_h u + lambda u| at p (the harmonic residual when lambda is absent)."""
    lam = f.eigenvalue if f.kind == "torus-eigenfunction" else 0.0
    return abs(discrete_laplacian(f, p, h) + lam * f(p))


def field_to_json(f: FieldOracle) -> str:
    return json.dumps(f.spec.model_dump(mode="json", exclude_none=True), sort_keys=True, indent=2)


def field_from_json(text: str) -> FieldOracle:
    """Build an oracle from its JSON document."""
    spec = FieldSpec.model_validate_json(text)
    logger.debug(f"Loaded {spec.kind} field (dim={spec.dim})")
    return FieldOracle(spec)

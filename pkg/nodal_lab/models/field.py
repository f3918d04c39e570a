import math
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from nodal_lab.config import settings

FieldKind = Literal["harmonic-polynomial", "torus-eigenfunction", "lift"]


class HarmonicTerm(BaseModel):
    """One solid-harmonic basis element with its weight.

    n=2: ``part="cos"`` is Re (x1 + i x2)^degree, ``part="sin"`` is Im (x1 + i x2)^degree.
    n=3: real solid harmonic r^l Y_l^m, orthonormal on the unit sphere;
    ``part="cos"`` / ``"sin"`` selects cos(m phi) / sin(m phi).
    """
    degree: int = Field(..., ge=0, description="Polynomial degree l")
    order: Optional[int] = Field(None, ge=0, description="Azimuthal order m (n=3 only)")
    part: Literal["cos", "sin"] = Field("cos", description="Real (cos) or imaginary (sin) part")
    weight: float = Field(..., description="Coefficient")

    @model_validator(mode="after")
    def _order_within_degree(self):
        if self.order is not None and self.order > self.degree:
            raise ValueError(f"order {self.order} exceeds degree {self.degree}")
        return self


class TorusMode(BaseModel):
    """Trigonometric mode weight * sin(k.x) or weight * cos(k.x)."""
    k: List[int] = Field(..., min_length=1, description="Integer mode vector")
    part: Literal["sin", "cos"] = "sin"
    weight: float = 1.0

    @property
    def norm_squared(self) -> int:
        return sum(c * c for c in self.k)


class FieldSpec(BaseModel):
    """Serializable description of a field oracle."""
    kind: FieldKind
    dim: int = Field(..., ge=2, description="Ambient dimension of the oracle")
    degree: Optional[int] = None
    eigenvalue: Optional[float] = None
    coefficients: List[HarmonicTerm] = Field(default_factory=list)
    modes: List[TorusMode] = Field(default_factory=list)
    domain_radius: float = Field(default_factory=lambda: settings.DOMAIN_RADIUS, gt=0)
    seed: Optional[int] = Field(None, description="Seed used to draw random weights, if any")

    class Config:
        extra = "forbid"


class BallSpec(BaseModel):
    """Closed Euclidean ball."""
    center: List[float] = Field(..., min_length=2)
    radius: float = Field(..., gt=0)

    @field_validator("center")
    @classmethod
    def _finite_center(cls, v: List[float]) -> List[float]:
        if not all(math.isfinite(c) for c in v):
            raise ValueError("center coordinates must be finite")
        return v

    @property
    def dim(self) -> int:
        return len(self.center)


class CubeSpec(BaseModel):
    """Cube given by a corner and a side; optional rotation rows ``axes``.

    With ``axes`` set the cube is ``min_corner + sum_i t_i * axes[i]``, t in [0, side]^n.
    """
    min_corner: List[float] = Field(..., min_length=2)
    side: float = Field(..., gt=0)
    axes: Optional[List[List[float]]] = None

    @field_validator("min_corner")
    @classmethod
    def _finite_corner(cls, v: List[float]) -> List[float]:
        if not all(math.isfinite(c) for c in v):
            raise ValueError("corner coordinates must be finite")
        return v

    @property
    def dim(self) -> int:
        return len(self.min_corner)

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.dim)

    @property
    def center(self) -> List[float]:
        if self.axes is None:
            return [c + self.side / 2 for c in self.min_corner]
        return [
            c + sum(self.side / 2 * axis[i] for axis in self.axes)
            for i, c in enumerate(self.min_corner)
        ]

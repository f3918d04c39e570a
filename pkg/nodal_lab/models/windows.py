from typing import List, Tuple

from pydantic import BaseModel, Field


class PlateauResult(BaseModel):
    """Point where a nondecreasing function stays within a factor e of a level."""
    x: float
    N: float = Field(..., description="Level; N <= f <= eN on the window")
    window: Tuple[float, float]
    a: float
    b: float
    step: int = Field(..., ge=1, description="Index i of the step x_i -> x_i+1 that succeeded")
    upper: float = Field(..., description="Largest sampled value of f on the window")


class LayerWindow(BaseModel):
    """Radius s and level N with N <= beta(p, t) <= 2eN near s."""
    center: List[float]
    r: float = Field(..., gt=0)
    s: float = Field(..., gt=0)
    N: float = Field(..., gt=0)
    rel_halfwidth: float = Field(..., gt=0)
    max_rel_halfwidth: float = Field(
        ..., ge=0, description="Largest relative half-width where the sandwich holds on samples"
    )
    verification_samples: int
    beta_min: float
    beta_max: float
    beta_at_r: float
    beta_at_three_halves_r: float
    bracket_holds: bool = Field(..., description="beta(p,r)/10 <= N <= 2 beta(p,3r/2)")

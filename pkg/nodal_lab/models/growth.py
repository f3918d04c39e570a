from typing import List

from pydantic import BaseModel, Field, model_validator


class ProfileSample(BaseModel):
    """One radius of a frequency profile."""
    r: float = Field(..., gt=0)
    H: float = Field(..., gt=0, description="Surface integral of u^2 (unnormalized)")
    beta: float


class FrequencyProfile(BaseModel):
    """Sampled H(x, r) and beta(x, r) for one center."""
    center: List[float]
    samples: List[ProfileSample]
    quadrature_order: int
    identity_residual: float = Field(
        ..., ge=0, description="|log(H(r_max)/H(r_min)) - 2 int beta dlog r|"
    )

    @model_validator(mode="after")
    def _radii_increasing(self):
        radii = [s.r for s in self.samples]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("profile radii must be strictly increasing")
        return self


class DoublingProfile(BaseModel):
    """Ball doubling index N(x, r) along a radius ladder."""
    center: List[float]
    radii: List[float]
    indices: List[float]
    monotonicity_defect: float = Field(
        ..., description="max over r1 < r2 of N(x, r1) - N(x, r2); <= 0 means monotone"
    )

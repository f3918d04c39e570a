from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from nodal_lab.models.field import CubeSpec


class SubdivisionCensus(BaseModel):
    """Doubling indices of the B^n subcubes of one parent cube."""
    parent: CubeSpec
    B: int = Field(..., ge=1)
    threshold: float
    parent_index: float = Field(..., description="N(parent) on the aligned candidate table")
    indices: List[float]
    count_above: int = Field(..., ge=0)
    fraction: float = Field(..., ge=0, description="count_above / B^(n-1)")
    rule: str = "fixed"
    count_bound: Optional[float] = Field(None, description="Companion count bound of the rule")

    @model_validator(mode="after")
    def _consistent_counts(self):
        if len(self.indices) != self.B ** self.parent.dim:
            raise ValueError("indices must have B^n entries")
        if self.count_above != sum(1 for v in self.indices if v > self.threshold):
            raise ValueError("count_above disagrees with indices")
        return self


class TailParams(BaseModel):
    """Verified parameters of the binomial tail claim."""
    p: str = Field(..., description="Exact rational p as 'num/den'")
    epsilon: float
    sigma: float
    k0: int
    k_max: int
    checked: int = Field(..., description="Number of (k, l) pairs verified exactly")


class IterationOutcome(BaseModel):
    """Exact probability of one reduction count."""
    reductions: int
    value: float = Field(..., description="Final N after the floor at N0")
    probability: str = Field(..., description="Exact rational probability")


class IterationDistribution(BaseModel):
    """Exact and Monte Carlo distribution of the saturating iteration process."""
    p: str
    c: float
    N_start: float
    N0: float
    k: int
    trials: int
    seed: int
    exact: List[IterationOutcome]
    empirical: List[float] = Field(..., description="Empirical frequency per reduction count")

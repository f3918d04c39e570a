from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from nodal_lab.models.field import BallSpec


class NodalEstimate(BaseModel):
    """H^(n-1) measure of the zero set inside a ball, with its refinement record."""
    region: BallSpec
    measure: float = Field(..., ge=0)
    cell_size: float = Field(..., gt=0)
    refinement_history: List[Tuple[float, float]]
    converged: bool

    @model_validator(mode="after")
    def _cells_shrink(self):
        sizes = [h for h, _ in self.refinement_history]
        if any(b >= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("refinement cell sizes must strictly decrease")
        return self


class DensityReport(BaseModel):
    """Largest distance from a sample point to a detected sign change."""
    eigenvalue: float = Field(..., gt=0)
    max_gap: float = Field(..., ge=0)
    probe_count: int
    implied_C1: float = Field(..., description="max_gap * sqrt(lambda)")
    argmax: List[float]


class NaiveBoundRecord(BaseModel):
    """Normalized nodal measure at a zero against the naive c1/beta^(n-1) bound."""
    x: List[float]
    rho: float
    measure: float
    ratio: float = Field(..., description="H^(n-1)(Z in B(x, rho)) / rho^(n-1)")
    beta: float = Field(..., description="beta(x, rho/2)")
    implied_c1: float = Field(..., description="ratio * beta^(n-1)")
    positive_ball: Optional[BallSpec] = None
    negative_ball: Optional[BallSpec] = None


class FRatioRow(BaseModel):
    """One field of the F(N) experiment."""
    degree: int
    seed: int
    beta: float
    ratio: float
    trend_abscissa: Optional[float] = Field(None, description="log(beta) / log(log(beta))")


class FRatioTable(BaseModel):
    """F(N) experiment table."""
    rows: List[FRatioRow]
    min_ratio: Optional[float] = None
    low_degree_min: Optional[float] = None
    floor_holds: bool = True
    trend_slope: Optional[float] = Field(None, description="Fitted c in ratio ~ 2^(c log b / log log b)")


class YauRow(BaseModel):
    """One eigenvalue of the Yau experiment."""
    k: int
    eigenvalue: float
    sqrt_lambda: float
    measure: float
    ratio: float = Field(..., description="measure / sqrt(lambda)")
    exact: Optional[float] = None
    ball_count: int
    ball_density: float = Field(..., description="ball_count / lambda^(n/2)")


class YauTable(BaseModel):
    """Yau experiment table."""
    rows: List[YauRow]
    ratio_min: Optional[float] = None
    ratio_max: Optional[float] = None
    band_holds: bool = True
    decomposition_constant: Optional[float] = None
    decomposition_holds: bool = True

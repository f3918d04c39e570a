from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from nodal_lab.models.field import BallSpec
from nodal_lab.models.windows import LayerWindow


class OrientedBox(BaseModel):
    """Box with center, orthonormal axes (rows) and half extents along them."""
    center: List[float]
    axes: List[List[float]]
    half_extents: List[float]

    @model_validator(mode="after")
    def _orthonormal(self):
        n = len(self.center)
        if len(self.axes) != n or len(self.half_extents) != n:
            raise ValueError("box needs n axes and n half extents")
        gram = np.asarray(self.axes) @ np.asarray(self.axes).T
        if not np.allclose(gram, np.eye(n), atol=1e-12, rtol=0.0):
            raise ValueError("box axes must be orthonormal")
        if min(self.half_extents) <= 0:
            raise ValueError("half extents must be positive")
        return self

    @property
    def volume(self) -> float:
        return float(np.prod([2 * h for h in self.half_extents]))


class TunnelParams(BaseModel):
    """Resolved geometry parameters of one tunnel construction."""
    s: float
    N: float
    delta: float = Field(..., gt=0)
    tunnels_per_side: int = Field(..., ge=1)
    cubes_per_tunnel: int = Field(..., ge=1)
    paper_constants: bool = False
    alpha: float = Field(0.5, gt=0, lt=1)
    box_width: float = Field(..., gt=0, description="Transverse side of the box T")
    ball_radius: float = Field(..., gt=0, description="Packing radius r / N^alpha")
    good_threshold: float


class SignChangeCertificate(BaseModel):
    """Two points of one closed cell with opposite signs, plus a bisected zero."""
    tunnel: int
    cell: int
    cube: OrientedBox
    p_plus: List[float]
    p_minus: List[float]
    values: Tuple[float, float]
    zero: List[float]
    zero_value: float


class TunnelGeometry(BaseModel):
    """Box T, its tunnels and their cells (inner end first)."""
    params: TunnelParams
    x: List[float]
    x_tilde: List[float]
    K: float
    box: OrientedBox
    tunnels: List[OrientedBox]
    cells: List[List[OrientedBox]]
    resolution_infeasible: bool = False


class TunnelReport(BaseModel):
    """End-to-end result of the tunnel construction."""
    window: LayerWindow
    params: TunnelParams
    box: OrientedBox
    x: List[float]
    x_tilde: List[float]
    K: float
    tunnel_count: int
    good_tunnels: List[int]
    certificates: List[SignChangeCertificate]
    balls: List[BallSpec]
    bracket_holds: bool
    resolution_infeasible: bool = False
    note: Optional[str] = None


class TunnelScalingRow(BaseModel):
    """Packed ball count for Re z^d at one degree."""
    degree: int
    N: float
    ball_count: int
    certificate_count: int
    good_tunnels: int


class TunnelScalingReport(BaseModel):
    """Least-squares slope of log(ball count) against log N over a degree ladder."""
    dim: int
    r: float
    rows: List[TunnelScalingRow]
    slope: Optional[float] = Field(None, description="None when a count is zero or fewer than two degrees")
    required_slope: float = Field(..., description="(n - 1)/2 - 0.15")
    slope_holds: bool


class LayerDiagnostics(BaseModel):
    """Measured sides of the growth estimates near the sphere maximum.

    Implied constants are the smallest values making each inequality true for
    this instance, with the additive constant set to 1 where there are two.
    """
    s: float
    N: float
    delta: float
    K: float
    K_inner: float = Field(..., description="max |u| on the sphere of radius s(1 - delta)")
    sup_inner: float
    sup_outer: float
    sup_near_max: float
    doubling_near_max: float
    sup_small_ball: float
    t1t2_lower_margin: float = Field(..., description="log(H2/H1) - 2N log(t2/t1)")
    t1t2_upper_margin: float = Field(..., description="4eN log(t2/t1) - log(H2/H1)")
    implied_c_inner: float
    implied_C_outer: float
    implied_C_near_max: float
    implied_C_doubling: float
    implied_C_small_ball: float
    implied_C4: float
    delta_in_admissible_range: bool

from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, Field

from nodal_lab.config import settings


class ConstantsBlock(BaseModel):
    """Tunable constants of the construction."""
    A: int = Field(default_factory=lambda: settings.PARTITION_A, ge=2)
    c: float = Field(default_factory=lambda: settings.SUBDIVISION_C, gt=0)
    N0: float = Field(default_factory=lambda: settings.SUBDIVISION_N0, ge=0)
    c1: float = Field(default_factory=lambda: settings.SUBDIVISION_C1, gt=0)
    kappa: float = Field(default_factory=lambda: settings.SUBDIVISION_KAPPA, gt=0)
    delta_scale: float = Field(default_factory=lambda: settings.DELTA_SCALE, gt=0)
    width_factor: float = Field(default_factory=lambda: settings.TUNNEL_WIDTH_FACTOR, gt=0)
    alpha: float = Field(default_factory=lambda: settings.TUNNEL_ALPHA, gt=0, lt=1)
    frequency_gate: float = Field(default_factory=lambda: settings.FREQUENCY_GATE, gt=0)

    class Config:
        extra = "forbid"


class ResolutionBlock(BaseModel):
    """Quadrature orders, grid sizes and budgets."""
    quadrature_order_2d: int = Field(default_factory=lambda: settings.QUADRATURE_ORDER_2D)
    quadrature_order_3d: int = Field(default_factory=lambda: settings.QUADRATURE_ORDER_3D)
    sup_resolution: int = Field(default_factory=lambda: settings.SUP_RESOLUTION, ge=4)
    cube_centers_per_side: int = Field(default_factory=lambda: settings.CUBE_CENTERS_PER_SIDE, ge=2)
    cube_radii_count: int = Field(default_factory=lambda: settings.CUBE_RADII_COUNT, ge=1)
    cube_sup_resolution: int = Field(default_factory=lambda: settings.CUBE_SUP_RESOLUTION, ge=4)
    partition_budget: int = Field(default_factory=lambda: settings.PARTITION_BUDGET, ge=1)
    tunnel_cell_budget: int = Field(default_factory=lambda: settings.TUNNEL_CELL_BUDGET, ge=1)
    samples_per_cube: int = Field(default_factory=lambda: settings.TUNNEL_SAMPLES_PER_CUBE, ge=2)
    window_samples: int = Field(default_factory=lambda: settings.WINDOW_VERIFICATION_SAMPLES, ge=2)
    nodal_initial_cells: int = Field(default_factory=lambda: settings.NODAL_INITIAL_CELLS, ge=4)
    nodal_max_cells_2d: int = Field(default_factory=lambda: settings.NODAL_MAX_CELLS_2D, ge=8)
    nodal_max_cells_3d: int = Field(default_factory=lambda: settings.NODAL_MAX_CELLS_3D, ge=8)

    class Config:
        extra = "forbid"

    def quadrature_order(self, dim: int) -> int:
        return self.quadrature_order_2d if dim == 2 else self.quadrature_order_3d


class ExperimentConfig(BaseModel):
    """Fully resolved configuration of one CLI run; embedded in every output."""
    command: str
    params: Dict[str, Any] = Field(default_factory=dict)
    constants: ConstantsBlock = Field(default_factory=ConstantsBlock)
    resolution: ResolutionBlock = Field(default_factory=ResolutionBlock)
    seed: int = Field(default_factory=lambda: settings.RANDOM_SEED)
    output: Optional[str] = None
    format: Literal["json", "csv"] = "json"

    class Config:
        extra = "forbid"

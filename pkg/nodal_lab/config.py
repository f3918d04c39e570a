from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Runtime
    LOG_LEVEL: str = "INFO"
    NODAL_LAB_THREADS: int = 1
    RANDOM_SEED: int = 20240601

    # Fields
    DOMAIN_RADIUS: float = 4.0
    MAX_SOLID_HARMONIC_DEGREE: int = 64

    # Quadrature and growth
    QUADRATURE_ORDER_2D: int = 256
    QUADRATURE_ORDER_3D: int = 128  # polar nodes; azimuth uses twice as many
    QUADRATURE_MAX_ORDER: int = 4096
    IDENTITY_TOLERANCE: float = 1e-4
    H_FLOOR_ABS: float = 1e-300
    H_FLOOR_REL: float = 1e-14
    SUP_RESOLUTION: int = 64
    SUP_MAX_RESOLUTION: int = 1024
    SUP_RELATIVE_TOLERANCE: float = 1e-3
    CUBE_CENTERS_PER_SIDE: int = 3
    CUBE_RADII_COUNT: int = 3
    CUBE_SUP_RESOLUTION: int = 32

    # Frequency windows
    FREQUENCY_GATE: float = 10.0
    WINDOW_VERIFICATION_SAMPLES: int = 32
    WINDOW_REL_HALFWIDTH_FACTOR: float = 1e-3  # times 1/ln^2 N

    # Subdivision
    PARTITION_A: int = 4
    SUBDIVISION_C: float = 0.25
    SUBDIVISION_N0: float = 10.0
    SUBDIVISION_C1: float = 0.25
    SUBDIVISION_KAPPA: float = 1.0
    PARTITION_BUDGET: int = 10_000_000

    # Tunnels
    DELTA_SCALE: float = 0.05
    TUNNEL_WIDTH_FACTOR: float = 2.0
    TUNNEL_CELL_BUDGET: int = 200_000
    TUNNEL_RESOLUTION_FLOOR: float = 1e-9
    TUNNEL_SAMPLES_PER_CUBE: int = 4
    TUNNEL_ALPHA: float = 0.5
    TUNNEL_CENTERS_PER_SIDE: int = 2
    TUNNEL_RADII_COUNT: int = 2

    # Nodal measure
    NODAL_INITIAL_CELLS: int = 16  # cells per radius at the first pass
    NODAL_MAX_CELLS_2D: int = 4096
    NODAL_MAX_CELLS_3D: int = 256
    NODAL_CONVERGENCE: float = 0.01
    DENSITY_SEGMENT_SAMPLES: int = 64

    class Config:
        env_file = ".env"
        case_sensitive = True

    @property
    def threads(self) -> int:
        return max(1, self.NODAL_LAB_THREADS)


settings = Settings()

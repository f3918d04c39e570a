from nodal_lab.models.experiment import ConstantsBlock, ExperimentConfig, ResolutionBlock
from nodal_lab.models.field import BallSpec, CubeSpec, FieldSpec, HarmonicTerm, TorusMode
from nodal_lab.models.growth import DoublingProfile, FrequencyProfile, ProfileSample
from nodal_lab.models.nodal import (
    DensityReport,
    FRatioRow,
    FRatioTable,
    NaiveBoundRecord,
    NodalEstimate,
    YauRow,
    YauTable,
)
from nodal_lab.models.subdivision import (
    IterationDistribution,
    IterationOutcome,
    SubdivisionCensus,
    TailParams,
)
from nodal_lab.models.tunnels import (
    LayerDiagnostics,
    OrientedBox,
    SignChangeCertificate,
    TunnelGeometry,
    TunnelParams,
    TunnelReport,
    TunnelScalingReport,
    TunnelScalingRow,
)
from nodal_lab.models.windows import LayerWindow, PlateauResult

__all__ = [
    "BallSpec",
    "ConstantsBlock",
    "CubeSpec",
    "DensityReport",
    "DoublingProfile",
    "ExperimentConfig",
    "FRatioRow",
    "FRatioTable",
    "FieldSpec",
    "FrequencyProfile",
    "HarmonicTerm",
    "IterationDistribution",
    "IterationOutcome",
    "LayerDiagnostics",
    "LayerWindow",
    "NaiveBoundRecord",
    "NodalEstimate",
    "OrientedBox",
    "PlateauResult",
    "ProfileSample",
    "ResolutionBlock",
    "SignChangeCertificate",
    "SubdivisionCensus",
    "TailParams",
    "TorusMode",
    "TunnelGeometry",
    "TunnelParams",
    "TunnelReport",
    "TunnelScalingReport",
    "TunnelScalingRow",
    "YauRow",
    "YauTable",
]

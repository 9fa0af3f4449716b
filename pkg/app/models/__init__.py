from .polymer import (
    DimerHoppingModel,
    DiscretePolymersModel,
    ModelConfig,
    Polymer,
    PolymerEnsemble,
    WeightedPolymer,
    XDistribution,
    XDistributionKind,
)
from .transfer import CriticalData, CriticalityReport, CriticalRecord
from .pruefer import Region, RegionCheckReport, RegionParams
from .spectral import IDSCurve, LyapunovPoint, SpectralHistogram, ThoulessReport
from .analytics import HolderFit, MomentKind, NuSolution, RenewalStats
from .run import CommandName, RunConfig, VerifyReport

__all__ = [
    "DimerHoppingModel",
    "DiscretePolymersModel",
    "ModelConfig",
    "Polymer",
    "PolymerEnsemble",
    "WeightedPolymer",
    "XDistribution",
    "XDistributionKind",
    "CriticalData",
    "CriticalityReport",
    "CriticalRecord",
    "Region",
    "RegionCheckReport",
    "RegionParams",
    "IDSCurve",
    "LyapunovPoint",
    "SpectralHistogram",
    "ThoulessReport",
    "HolderFit",
    "MomentKind",
    "NuSolution",
    "RenewalStats",
    "CommandName",
    "RunConfig",
    "VerifyReport",
]

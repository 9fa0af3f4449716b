from pydantic import BaseModel, Field, computed_field
from typing import List, Literal, Optional, Tuple
from enum import Enum


class MomentKind(str, Enum):
    CLOSED_FORM_UNIFORM = "closed-form-uniform"
    CLOSED_FORM_BERNOULLI = "closed-form-bernoulli"
    MONTE_CARLO = "monte-carlo"
    DISCRETE_EXACT = "discrete-exact"


class NuSolution(BaseModel):
    nu: float = Field(..., gt=0.0)
    bracket: Tuple[float, float]
    residual: float
    orientation_swapped: bool
    gamma0: float
    kind: MomentKind


class HypothesisReport(BaseModel):
    kappa_nontrivial: bool
    two_sided_support: bool
    nonzero_root: bool
    gamma0: float
    support: Tuple[float, float]


class RenewalStats(BaseModel):
    """Loop (interarrival) times pooled over realizations."""
    interarrival: List[int] = []
    loops: int = 0
    steps: int = 0
    mean: Optional[float] = None
    rate: float = 0.0
    half_width: Optional[float] = None
    epsilon: Optional[float] = None
    k: Optional[float] = None
    rotation_rate: Optional[float] = None
    direction: Literal[-1, 1] = 1

    @property
    def empty(self) -> bool:
        return self.loops == 0

    @computed_field
    @property
    def winding(self) -> int:
        """Signed loop count; negative below E_c."""
        return self.direction * self.loops


class HolderFit(BaseModel):
    exponent: float
    stderr: float
    intercept: float
    epsilons: List[float]
    deltas: List[float]
    residuals: List[float]
    resolved: int


class LDBoundReport(BaseModel):
    """Empirical large-deviation probability against its bound."""
    k: float
    xi: float
    rho_k: float
    zeta: float
    length: int
    samples: int
    empirical: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 4.0 * self.stderr


class MeanInterarrivalReport(BaseModel):
    epsilon: float
    k: float
    xi: float
    rho_k: float
    lower_bound: float
    empirical_mean: Optional[float]
    loops: int

    @computed_field
    @property
    def verified(self) -> bool:
        """False when no loop completed, so there is no mean to compare."""
        return self.loops > 0 and self.empirical_mean is not None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.verified and self.empirical_mean >= self.lower_bound


class RotationBoundReport(BaseModel):
    epsilon: float
    k: float
    xi: float
    bound_per_polymer: float
    bound_per_site: float
    measured: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound_per_site

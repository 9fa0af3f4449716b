from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Literal, Union, Annotated
from enum import Enum

from app.config import settings


class XDistributionKind(str, Enum):
    UNIFORM = "uniform"
    BERNOULLI = "bernoulli"


class XDistribution(BaseModel):
    """Law of the disorder variable x in [-1, 1]."""
    model_config = ConfigDict(frozen=True)

    kind: XDistributionKind = XDistributionKind.UNIFORM
    p: Optional[float] = Field(None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _bernoulli_needs_p(self):
        if self.kind == XDistributionKind.BERNOULLI and self.p is None:
            raise ValueError("bernoulli x_dist requires p")
        return self


class Polymer(BaseModel):
    """A block sigma = (K, t_hat, v_hat)."""
    model_config = ConfigDict(frozen=True)

    hoppings: List[float]
    potentials: List[float]

    @field_validator("hoppings")
    @classmethod
    def _positive_hoppings(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("a polymer needs at least one site")
        if any(t <= 0 for t in value):
            raise ValueError(f"hoppings must be strictly positive, got {value}")
        return value

    @model_validator(mode="after")
    def _lengths_match(self):
        if len(self.potentials) != len(self.hoppings):
            raise ValueError("hoppings and potentials must have the same length")
        if len(self.hoppings) > settings.L_MAX:
            raise ValueError(f"polymer length {len(self.hoppings)} exceeds L_MAX={settings.L_MAX}")
        return self

    @property
    def length(self) -> int:
        return len(self.hoppings)


class WeightedPolymer(BaseModel):
    model_config = ConfigDict(frozen=True)

    polymer: Polymer
    weight: float = Field(..., gt=0.0, le=1.0)


class DimerHoppingModel(BaseModel):
    """Random dimer hopping model t(2n) = c_ev + lambda_ev x, t(2n+1) = c_od + lambda_od x'."""
    model_config = ConfigDict(frozen=True)

    type: Literal["dimer_hopping"] = "dimer_hopping"
    c_ev: float = Field(..., gt=0.0)
    lambda_ev: float = Field(..., ge=0.0)
    c_od: float = Field(..., gt=0.0)
    lambda_od: float = Field(0.0, ge=0.0)
    x_dist: XDistribution = XDistribution()

    @model_validator(mode="after")
    def _compact_support(self):
        if self.lambda_ev >= self.c_ev:
            raise ValueError(f"lambda_ev={self.lambda_ev} must be below c_ev={self.c_ev}")
        if self.lambda_od >= self.c_od:
            raise ValueError(f"lambda_od={self.lambda_od} must be below c_od={self.c_od}")
        return self

    @property
    def is_deterministic(self) -> bool:
        if self.lambda_ev == 0 and self.lambda_od == 0:
            return True
        return self.x_dist.kind == XDistributionKind.BERNOULLI and self.x_dist.p in (0.0, 1.0)


class AtomConfig(BaseModel):
    weight: float = Field(..., gt=0.0, le=1.0)
    t: List[float]
    v: List[float]


class DiscretePolymersModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["discrete_polymers"] = "discrete_polymers"
    atoms: List[AtomConfig]


ModelConfig = Annotated[Union[DimerHoppingModel, DiscretePolymersModel], Field(discriminator="type")]


class PolymerEnsemble(BaseModel):
    """
    Probability distribution over polymers.

    Discrete ensembles list their atoms. A parametric ensemble carries the
    dimer model it samples from and no atoms. `support_corners` are zero-weight
    polymers at the edge of the support; they enter the constants C1..C4 but
    never the averages.
    """
    model_config = ConfigDict(frozen=True)

    atoms: List[WeightedPolymer] = []
    parametric: Optional[DimerHoppingModel] = None
    origin: Optional[DimerHoppingModel] = None
    support_corners: List[Polymer] = []

    @model_validator(mode="after")
    def _weights_sum_to_one(self):
        if self.parametric is None:
            if not self.atoms:
                raise ValueError("a discrete ensemble needs at least one atom")
            total = sum(a.weight for a in self.atoms)
            if abs(total - 1.0) > settings.WEIGHT_TOL:
                raise ValueError(f"atom weights sum to {total!r}, expected 1")
        return self

    @property
    def is_discrete(self) -> bool:
        return self.parametric is None

    @property
    def weights(self) -> List[float]:
        return [a.weight for a in self.atoms]

    @property
    def polymers(self) -> List[Polymer]:
        return [a.polymer for a in self.atoms]

    def mean_length(self) -> float:
        if self.parametric is not None:
            return 2.0
        return sum(a.weight * a.polymer.length for a in self.atoms)

    def min_length(self) -> int:
        if self.parametric is not None:
            return 2
        return min(a.polymer.length for a in self.atoms)

    def max_length(self) -> int:
        if self.parametric is not None:
            return 2
        return max(a.polymer.length for a in self.atoms)

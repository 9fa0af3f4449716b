from pydantic import BaseModel, computed_field, model_validator
from typing import List, Optional


class SpectralHistogram(BaseModel):
    edges: List[float]
    counts: List[int]
    total: int
    normalized: bool = False

    @model_validator(mode="after")
    def _counts_add_up(self):
        if sum(self.counts) != self.total:
            raise ValueError(f"bin counts sum to {sum(self.counts)}, expected {self.total}")
        if len(self.edges) != len(self.counts) + 1:
            raise ValueError("need one more edge than bins")
        return self

    @property
    def centers(self) -> List[float]:
        return [(a + b) / 2.0 for a, b in zip(self.edges[:-1], self.edges[1:])]


class IDSCurve(BaseModel):
    """IDS estimates on an energy grid with across-realization standard errors."""
    energies: List[float]
    values: List[float]
    stderr: List[float]
    n_sites: int
    reps: int
    seed: Optional[int] = None
    method: str = "counting"


class LyapunovPoint(BaseModel):
    energy: float
    gamma: float
    stderr: float


class ThoulessReport(BaseModel):
    energy: float
    sizes: List[int]
    residuals: List[float]
    stderr: List[float]
    floored_terms: int = 0

    @computed_field
    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.residuals[:-1], self.residuals[1:]))

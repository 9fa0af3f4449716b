from pydantic import BaseModel, ConfigDict, Field
from typing import List, Tuple
import numpy as np

Mat2Tuple = Tuple[Tuple[float, float], Tuple[float, float]]


def mat_to_tuple(m) -> Mat2Tuple:
    return ((float(m[0][0]), float(m[0][1])), (float(m[1][0]), float(m[1][1])))


class CriticalRecord(BaseModel):
    """Diagonal form and first-order expansion of one polymer at E_c."""
    model_config = ConfigDict(frozen=True)

    kappa: float = Field(..., gt=0.0)
    sign: int
    a: float
    b: float
    c: float
    weight: float = 0.0
    length: int = 1


class CriticalityReport(BaseModel):
    is_critical: bool
    energy: float
    atoms_checked: int
    hyperbolic_atoms: int
    identity_atoms: int
    max_commutator: float
    worst_atom_residual: float
    tol: float


class CriticalData(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    M: Mat2Tuple
    records: List[CriticalRecord]
    corners: List[CriticalRecord] = []
    C1: float
    C2: float
    C3: float
    C4: float
    gamma0: float
    mean_length: float
    orientation_swapped: bool = False
    absorb_c_sigma: bool = False
    max_commutator: float = 0.0
    max_offdiagonal: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.M, dtype=float)

    @property
    def inverse(self) -> np.ndarray:
        m = self.matrix
        return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])

    @property
    def kappas(self) -> np.ndarray:
        return np.array([r.kappa for r in self.records])

    @property
    def weights(self) -> np.ndarray:
        return np.array([r.weight for r in self.records])

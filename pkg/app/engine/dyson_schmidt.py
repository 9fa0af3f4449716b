"""
Dyson-Schmidt coordinate x = -cot(theta) and its Möbius dynamics.

A matrix [[p, q], [r, s]] acts by x -> (p x - q) / (s - r x). The point at
infinity is `math.inf`; -inf is the same projective point.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.engine.sampling import PolymerBatch
from app.engine.transfer import q_matrices
from app.models.pruefer import Region, RegionParams
from app.models.transfer import CriticalData

HOMOGENEOUS_ABOVE = 1e12

REGION_CODES = {0: Region.I, 1: Region.II, 2: Region.III_LOW, 3: Region.III_HIGH, 4: Region.IV}


@dataclass(frozen=True)
class DysonSchmidtState:
    x: float
    half_step: float
    winding: int

    @property
    def at_infinity(self) -> bool:
        return math.isinf(self.x)


def phase_to_x(theta):
    cos, sin = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore"):
        return np.where(sin == 0.0, np.inf, -cos / np.where(sin == 0.0, 1.0, sin))


def mobius(m: np.ndarray, x):
    """
    Action of one matrix, or of a stack of matrices (n, 2, 2) on an array of
    n points. Large |x| and infinity go through homogeneous coordinates.
    """
    m = np.asarray(m, dtype=float)
    x = np.asarray(x, dtype=float)
    p, q, r, s = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]

    far = ~np.isfinite(x) | (np.abs(x) > HOMOGENEOUS_ABOVE)
    safe_x = np.where(far, 0.0, x)
    inv_x = np.where(far & np.isfinite(x), 1.0 / np.where(far, x, 1.0), 0.0)

    # x = -v0 / v1 with v = (x, -1) nearby, v = (1, -1/x) far away.
    v0 = np.where(far, 1.0, safe_x)
    v1 = np.where(far, -inv_x, -1.0)
    w0 = p * v0 + q * v1
    w1 = r * v0 + s * v1
    with np.errstate(divide="ignore", invalid="ignore"):
        result = np.where(w1 == 0.0, np.inf, -w0 / np.where(w1 == 0.0, 1.0, w1))
    return result if result.ndim else float(result)


def ds_step_D(x, kappa):
    """x -> kappa^2 x; infinity is fixed."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        result = np.where(np.isinf(x), np.inf, np.asarray(kappa) ** 2 * np.where(np.isinf(x), 0.0, x))
    return result if result.ndim else float(result)


def ds_step_Q(x, a, b, epsilon, correction: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)):
    """
    Action of Q = 1 + eps (a J' + b S) + eps^2 [[alpha, beta], [gamma, delta]]:

        x -> ((1 + eps^2 alpha) x + (a - b - eps beta) eps) / (1 + eps^2 delta - (a + b + eps gamma) eps x)
    """
    alpha, beta, gamma, delta = correction
    e = epsilon
    q = np.empty(np.broadcast(np.asarray(x), np.asarray(a), np.asarray(alpha)).shape + (2, 2))
    q[..., 0, 0] = 1.0 + e * e * np.asarray(alpha)
    q[..., 0, 1] = -(np.asarray(a) - np.asarray(b) - e * np.asarray(beta)) * e
    q[..., 1, 0] = (np.asarray(a) + np.asarray(b) + e * np.asarray(gamma)) * e
    q[..., 1, 1] = 1.0 + e * e * np.asarray(delta)
    return mobius(q, x)


def circle_step(z, kappa):
    """The D-step written on the unit circle, z = exp(2 i theta)."""
    plus, minus = kappa + 1.0 / kappa, kappa - 1.0 / kappa
    return (plus * z + minus) / (minus * z + plus)


def region_codes(x, params: RegionParams) -> np.ndarray:
    """Integer region codes 0..4 for I, II, III<, III>, IV."""
    x = np.asarray(x, dtype=float)
    lower, split, upper = params.lower, params.split, params.upper
    codes = np.full(x.shape, 4, dtype=np.int8)
    finite = np.isfinite(x)
    codes = np.where(finite & (x <= upper), 3, codes)
    codes = np.where(finite & (x < split), 2, codes)
    codes = np.where(finite & (x < lower), 1, codes)
    codes = np.where(finite & (x <= 0.0), 0, codes)
    return codes


def classify_region(x: float, params: RegionParams) -> Region:
    return REGION_CODES[int(region_codes(x, params))]


def ds_run(batch: PolymerBatch, critical: CriticalData, epsilon: float, x0: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Half-step trajectory: x(n - 1/2) = D x(n - 1), x(n) = Q x(n - 1/2).

    Returns (x at integer steps 0..N, x at half steps 1/2..N - 1/2).
    """
    q, kappa = q_matrices(batch, critical, epsilon)
    whole = np.empty(len(batch) + 1)
    half = np.empty(len(batch))
    whole[0] = x0
    for n in range(len(batch)):
        half[n] = ds_step_D(whole[n], kappa[n])
        whole[n + 1] = mobius(q[n], half[n])
    return whole, half


def ds_states(theta: np.ndarray, start_turns: float = 0.0):
    """Dyson-Schmidt states read off a lifted phase sequence at integer steps."""
    x = phase_to_x(theta)
    winding = np.floor((theta - theta[0]) / np.pi + start_turns).astype(np.int64)
    return [DysonSchmidtState(x=float(x[n]), half_step=float(n), winding=int(winding[n])) for n in range(theta.shape[0])]

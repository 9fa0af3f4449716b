"""
2x2 transfer-matrix algebra at and near a hyperbolic critical energy.

Matrices are plain numpy arrays of shape (2, 2), or stacks (..., 2, 2) for
batches of polymers. The single-site transfer for hopping t and potential v
at energy E is (1/t) [[v - E, -t^2], [1, 0]].
"""
import logging
import math
from itertools import combinations
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import settings
from app.engine.sampling import PolymerBatch, flatten
from app.errors import (
    ConsistencyError,
    DegenerateEnsembleError,
    DomainError,
    UnsupportedCaseError,
    UnsupportedOperationError,
)
from app.models.polymer import Polymer, PolymerEnsemble
from app.models.transfer import CriticalData, CriticalityReport, CriticalRecord, mat_to_tuple

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2)
ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])  # J'
REFLECTION = np.array([[0.0, 1.0], [1.0, 0.0]])  # S
PARITY = np.array([[1.0, 0.0], [0.0, -1.0]])  # P


def single_site_transfer(v: float, t: float, energy: float) -> np.ndarray:
    if t <= 0:
        raise DomainError(f"hopping must be positive, got {t}")
    return np.array([[v - energy, -t * t], [1.0, 0.0]]) / t


def polymer_transfer(polymer: Polymer, energy: float) -> np.ndarray:
    """Ordered product T(K-1) ... T(0) over the sites of the polymer."""
    result = IDENTITY.copy()
    for t, v in zip(polymer.hoppings, polymer.potentials):
        result = single_site_transfer(v, t, energy) @ result
    return result


def polymer_transfer_derivative(polymer: Polymer, energy: float) -> Tuple[np.ndarray, np.ndarray]:
    """T and dT/dE, accumulated by the product rule."""
    value = IDENTITY.copy()
    slope = np.zeros((2, 2))
    for t, v in zip(polymer.hoppings, polymer.potentials):
        step = single_site_transfer(v, t, energy)
        step_slope = np.array([[-1.0 / t, 0.0], [0.0, 0.0]])
        slope = step_slope @ value + step @ slope
        value = step @ value
    return value, slope


def batch_transfer(batch: PolymerBatch, energy: float) -> Tuple[np.ndarray, np.ndarray]:
    """T and dT/dE for every polymer of a batch, as (n, 2, 2) stacks."""
    n = len(batch)
    value = np.broadcast_to(IDENTITY, (n, 2, 2)).copy()
    slope = np.zeros((n, 2, 2))
    for j in range(batch.hoppings.shape[1]):
        active = batch.lengths > j
        t = batch.hoppings[:, j]
        v = batch.potentials[:, j]
        step = np.zeros((n, 2, 2))
        step[:, 0, 0] = (v - energy) / t
        step[:, 0, 1] = -t
        step[:, 1, 0] = 1.0 / t
        step_slope = np.zeros((n, 2, 2))
        step_slope[:, 0, 0] = -1.0 / t
        new_slope = step_slope @ value + step @ slope
        new_value = step @ value
        slope = np.where(active[:, None, None], new_slope, slope)
        value = np.where(active[:, None, None], new_value, value)
    return value, slope


def operator_norm(m: np.ndarray) -> np.ndarray:
    """Largest singular value of a 2x2 matrix (or stack) in closed form."""
    m = np.asarray(m, dtype=float)
    frob = np.sum(m * m, axis=(-2, -1))
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    disc = np.sqrt(np.maximum(frob * frob - 4.0 * det * det, 0.0))
    return np.sqrt((frob + disc) / 2.0)


def inverse_unimodular(m: np.ndarray) -> np.ndarray:
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def transfer_product_norm(
    polymers: Union[PolymerBatch, Sequence[Polymer]],
    energy,
    renorm_every: Optional[int] = None,
):
    """
    log ||T(N-1) ... T(0)|| over all sites of the polymers.

    `energy` may be a scalar or a 1-d array; the product is carried for every
    energy at once. Every `renorm_every` sites the running product is divided
    by its Frobenius norm and the log accumulated.
    """
    t, v = flatten(polymers)
    return site_product_norm(t, v, energy, renorm_every)


def site_product_norm(t: np.ndarray, v: np.ndarray, energy, renorm_every: Optional[int] = None):
    """log ||T(N-1) ... T(0)|| for site sequences t(0..N-1), v(0..N-1)."""
    renorm_every = renorm_every or settings.RENORM_EVERY
    energies = np.atleast_1d(np.asarray(energy, dtype=float))

    m11 = np.ones_like(energies)
    m12 = np.zeros_like(energies)
    m21 = np.zeros_like(energies)
    m22 = np.ones_like(energies)
    log_scale = np.zeros_like(energies)

    for n in range(t.shape[0]):
        tn = t[n]
        shift = (v[n] - energies) / tn
        m11, m12, m21, m22 = (
            shift * m11 - tn * m21,
            shift * m12 - tn * m22,
            m11 / tn,
            m12 / tn,
        )
        if (n + 1) % renorm_every == 0:
            scale = np.sqrt(m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22)
            m11, m12, m21, m22 = m11 / scale, m12 / scale, m21 / scale, m22 / scale
            log_scale += np.log(scale)

    stack = np.stack([np.stack([m11, m12], axis=-1), np.stack([m21, m22], axis=-1)], axis=-2)
    result = log_scale + np.log(operator_norm(stack))
    return float(result[0]) if np.ndim(energy) == 0 else result


def _scale(m: np.ndarray) -> float:
    return max(float(operator_norm(m)), 1.0)


def detect_critical(ensemble: PolymerEnsemble, energy: float, tol: Optional[float] = None) -> CriticalityReport:
    """
    Whether `energy` is a hyperbolic critical energy of the ensemble.

    Commutators are measured relative to the product of the operator norms,
    so that strongly hyperbolic atoms do not inflate the residual.
    """
    tol = settings.CRITICAL_TOL if tol is None else tol
    if not ensemble.is_discrete:
        raise UnsupportedOperationError(
            "critical-energy detection needs a discrete ensemble; pass a discretization"
        )
    polymers = ensemble.polymers + list(ensemble.support_corners)
    matrices = [polymer_transfer(p, energy) for p in polymers]

    hyperbolic = identity = 0
    worst_atom = 0.0
    for m in matrices:
        trace = abs(m[0, 0] + m[1, 1])
        residual = min(np.abs(m - IDENTITY).max(), np.abs(m + IDENTITY).max())
        if residual <= tol:
            identity += 1
        elif trace > 2.0 + tol:
            hyperbolic += 1
        else:
            worst_atom = max(worst_atom, residual)

    max_commutator = 0.0
    for a, b in combinations(matrices, 2):
        commutator = a @ b - b @ a
        max_commutator = max(max_commutator, float(operator_norm(commutator)) / (_scale(a) * _scale(b)))

    is_critical = hyperbolic + identity == len(matrices) and max_commutator <= tol
    return CriticalityReport(
        is_critical=is_critical,
        energy=energy,
        atoms_checked=len(matrices),
        hyperbolic_atoms=hyperbolic,
        identity_atoms=identity,
        max_commutator=max_commutator,
        worst_atom_residual=worst_atom,
        tol=tol,
    )


def _eigenbasis(m: np.ndarray) -> np.ndarray:
    """Unimodular M with M m M^-1 diagonal, from the eigenvectors of m."""
    eigenvalues, vectors = np.linalg.eig(m)
    if np.iscomplexobj(eigenvalues) and np.abs(eigenvalues.imag).max() > 0:
        raise ConsistencyError("critical transfer matrix has complex eigenvalues")
    vectors = np.real(vectors)
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    if abs(vectors[0, 1] * vectors[1, 0]) > abs(vectors[0, 0] * vectors[1, 1]):
        vectors = vectors[:, ::-1]
    vectors = vectors * np.sign(np.diag(vectors))
    det = np.linalg.det(vectors)
    if det <= settings.DET_TOL:
        raise ConsistencyError("eigenvectors of the reference atom are degenerate")
    return np.linalg.inv(vectors) * math.sqrt(det)


def decompose(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients of x (or a stack) on the basis 1, J', S, P."""
    identity = (x[..., 0, 0] + x[..., 1, 1]) / 2.0
    a = (x[..., 1, 0] - x[..., 0, 1]) / 2.0
    b = (x[..., 0, 1] + x[..., 1, 0]) / 2.0
    c = (x[..., 0, 0] - x[..., 1, 1]) / 2.0
    return identity, a, b, c


def critical_frame(batch: PolymerBatch, m: np.ndarray, energy: float) -> dict:
    """
    Diagonal form of M T M^-1 and expansion coefficients for a batch.

    Returns arrays keyed by kappa, sign, a, b, c, identity (the 1-coefficient)
    and offdiagonal (relative off-diagonal residual of the diagonalization).
    """
    m_inv = inverse_unimodular(m)
    value, slope = batch_transfer(batch, energy)
    diag = m @ value @ m_inv
    sign = np.where(diag[:, 0, 0] + diag[:, 1, 1] >= 0, 1.0, -1.0)
    kappa = sign * diag[:, 0, 0]
    offdiagonal = np.maximum(np.abs(diag[:, 0, 1]), np.abs(diag[:, 1, 0])) / operator_norm(diag)

    d_inv = np.zeros_like(diag)
    d_inv[:, 0, 0] = 1.0 / kappa
    d_inv[:, 1, 1] = kappa
    x = sign[:, None, None] * (m @ slope @ m_inv) @ d_inv
    identity, a, b, c = decompose(x)
    return {
        "kappa": kappa,
        "sign": sign,
        "a": a,
        "b": b,
        "c": c,
        "identity": identity,
        "offdiagonal": offdiagonal,
    }


def q_matrices(batch: PolymerBatch, critical: CriticalData, epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Q^eps = s M T^{E_c+eps} M^-1 D_kappa^-1 and kappa for every polymer.

    With c_sigma absorption enabled kappa is replaced by kappa (1 + eps c).
    """
    m = critical.matrix
    frame = critical_frame(batch, m, critical.energy)
    value, _ = batch_transfer(batch, critical.energy + epsilon)
    kappa = frame["kappa"]
    if critical.absorb_c_sigma:
        kappa = kappa * (1.0 + epsilon * frame["c"])
    d_inv = np.zeros((len(batch), 2, 2))
    d_inv[:, 0, 0] = 1.0 / kappa
    d_inv[:, 1, 1] = kappa
    q = frame["sign"][:, None, None] * (m @ value @ inverse_unimodular(m)) @ d_inv
    return q, kappa


def second_order_terms(batch: PolymerBatch, critical: CriticalData, epsilon: float) -> np.ndarray:
    """A^eps = (Q^eps - 1 - eps (a J' + b S)) / eps^2, as an (n, 2, 2) stack."""
    q, _ = q_matrices(batch, critical, epsilon)
    frame = critical_frame(batch, critical.matrix, critical.energy)
    first = frame["a"][:, None, None] * ROTATION + frame["b"][:, None, None] * REFLECTION
    return (q - IDENTITY - epsilon * first) / (epsilon * epsilon)


def _constant_c3(batch: PolymerBatch, critical: CriticalData) -> float:
    grid = np.concatenate([-np.geomspace(1.0, 1e-2, 40), np.geomspace(1e-2, 1.0, 40)])
    worst = 0.0
    for epsilon in grid:
        norms = operator_norm(second_order_terms(batch, critical, float(epsilon)))
        norms = norms[np.isfinite(norms)]
        if norms.size:
            worst = max(worst, float(norms.max()))
    return worst


def compute_critical_data(
    ensemble: PolymerEnsemble,
    energy: float,
    allow_c_sigma: Optional[bool] = None,
) -> CriticalData:
    """
    Simultaneous diagonalization of all critical transfer matrices.

    M comes from the eigenvectors of the most hyperbolic atom and is then
    checked on every atom. The orientation is normalized so that the
    weighted mean of log kappa is negative.
    """
    allow_c_sigma = settings.ALLOW_C_SIGMA if allow_c_sigma is None else allow_c_sigma
    report = detect_critical(ensemble, energy)
    if not report.is_critical:
        raise ConsistencyError(
            f"E={energy} is not a hyperbolic critical energy",
            max_commutator=report.max_commutator,
        )

    matrices = [polymer_transfer(p, energy) for p in ensemble.polymers]
    traces = [abs(m[0, 0] + m[1, 1]) for m in matrices]
    reference = int(np.argmax(traces))
    if traces[reference] <= 2.0 + settings.CRITICAL_TOL:
        raise DegenerateEnsembleError("every atom is +-identity at the critical energy")

    atoms = PolymerBatch.from_polymers(ensemble.polymers)
    weights = np.asarray(ensemble.weights)
    m = _eigenbasis(matrices[reference])
    frame = critical_frame(atoms, m, energy)
    gamma0 = float(np.dot(weights, np.log(frame["kappa"])))

    if abs(gamma0) <= settings.GAMMA0_TOL:
        raise UnsupportedCaseError("mean log kappa vanishes; the zero-drift case is not supported")
    swapped = gamma0 > 0
    if swapped:
        m = ROTATION @ m
        frame = critical_frame(atoms, m, energy)
        gamma0 = float(np.dot(weights, np.log(frame["kappa"])))
        logger.info("orientation swapped, gamma0=%.6g", gamma0)

    if np.any(frame["kappa"] <= 0):
        raise ConsistencyError("non-positive kappa after diagonalization")
    max_offdiagonal = float(frame["offdiagonal"].max())
    if max_offdiagonal > settings.DIAG_TOL:
        raise ConsistencyError(
            "critical transfer matrices are not simultaneously diagonal",
            max_offdiagonal=max_offdiagonal,
        )
    scale = np.maximum(1.0, np.abs(np.stack([frame["a"], frame["b"]])).max(axis=0))
    if np.any(np.abs(frame["identity"]) > 1e-8 * scale):
        raise ConsistencyError("identity coefficient of the expansion does not vanish")

    corners = PolymerBatch.from_polymers(ensemble.support_corners) if ensemble.support_corners else None
    corner_frame = critical_frame(corners, m, energy) if corners is not None else None

    def records(fr: dict, batch: PolymerBatch, w) -> List[CriticalRecord]:
        return [
            CriticalRecord(
                kappa=float(fr["kappa"][i]),
                sign=int(fr["sign"][i]),
                a=float(fr["a"][i]),
                b=float(fr["b"][i]),
                c=float(fr["c"][i]),
                weight=float(w[i]),
                length=int(batch.lengths[i]),
            )
            for i in range(len(batch))
        ]

    atom_records = records(frame, atoms, weights)
    corner_records = records(corner_frame, corners, np.zeros(len(corners))) if corners is not None else []
    everything = atom_records + corner_records

    max_c = max(abs(r.c) for r in everything)
    if max_c > settings.C_SIGMA_TOL and not allow_c_sigma:
        raise UnsupportedCaseError(
            f"max |c_sigma| = {max_c:.3g}; enable ALLOW_C_SIGMA to absorb it into kappa"
        )

    critical = CriticalData(
        energy=energy,
        M=mat_to_tuple(m),
        records=atom_records,
        corners=corner_records,
        C1=min(r.a - abs(r.b) for r in everything),
        C2=max(r.a + abs(r.b) for r in everything),
        C3=0.0,
        C4=max(r.kappa for r in everything),
        gamma0=gamma0,
        mean_length=ensemble.mean_length(),
        orientation_swapped=swapped,
        absorb_c_sigma=allow_c_sigma and max_c > settings.C_SIGMA_TOL,
        max_commutator=report.max_commutator,
        max_offdiagonal=max_offdiagonal,
    )
    support = atoms if corners is None else PolymerBatch.from_polymers(ensemble.polymers + list(ensemble.support_corners))
    critical = critical.model_copy(update={"C3": _constant_c3(support, critical)})
    if critical.C1 <= 0:
        logger.warning("C1=%.3g is not positive; region estimates may fail", critical.C1)
    logger.info(
        "critical data at E=%g: %d atoms, gamma0=%.6g, C1=%.4g C2=%.4g C3=%.4g C4=%.4g",
        energy, len(atom_records), gamma0, critical.C1, critical.C2, critical.C3, critical.C4,
    )
    return critical


def polymer_records(batch: PolymerBatch, critical: CriticalData) -> dict:
    """kappa, a, b, c of arbitrary polymers in the frame of `critical`."""
    return critical_frame(batch, critical.matrix, critical.energy)

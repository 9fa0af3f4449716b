"""
Finite Jacobi matrices H_N with diagonal v(0..N-1) and off-diagonal
-t(1..N-1) (Dirichlet boundary), and the spectral estimators built on them.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from app.config import settings
from app.engine.sampling import RealizationStream, sample_polymers, sample_sites
from app.engine.transfer import site_product_norm, transfer_product_norm
from app.errors import DomainError
from app.models.polymer import PolymerEnsemble
from app.models.spectral import IDSCurve, LyapunovPoint, SpectralHistogram, ThoulessReport
from app.utils.parallel import RealizationPool

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-13


@dataclass(frozen=True)
class JacobiMatrix:
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    @property
    def size(self) -> int:
        return int(self.diagonal.shape[0])

    @classmethod
    def from_sequences(cls, t: np.ndarray, v: np.ndarray) -> "JacobiMatrix":
        t = np.asarray(t, dtype=float)
        if np.any(t[1:] <= 0):
            raise DomainError("hoppings must be positive")
        return cls(diagonal=np.asarray(v, dtype=float).copy(), offdiagonal=-t[1:].copy())

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)

    def without_last_site(self) -> "JacobiMatrix":
        return JacobiMatrix(self.diagonal[:-1], self.offdiagonal[:-1])


def eigen_count(H: JacobiMatrix, energy):
    """
    Number of eigenvalues <= energy, by the Sturm pivot recursion.

    Pivots smaller than pivmin are replaced by -pivmin, so an eigenvalue equal
    to the energy is counted. Vectorized over an array of energies.
    """
    energies = np.atleast_1d(np.asarray(energy, dtype=float))
    off2 = H.offdiagonal**2
    pivmin = np.finfo(float).tiny * max(1.0, float(off2.max()) if off2.size else 1.0)

    pivot = H.diagonal[0] - energies
    pivot = np.where(np.abs(pivot) < pivmin, -pivmin, pivot)
    count = (pivot < 0).astype(np.int64)
    for n in range(1, H.size):
        pivot = (H.diagonal[n] - energies) - off2[n - 1] / pivot
        pivot = np.where(np.abs(pivot) < pivmin, -pivmin, pivot)
        count += pivot < 0
    return int(count[0]) if np.ndim(energy) == 0 else count


def eigenvalues(H: JacobiMatrix, tol: Optional[float] = None) -> np.ndarray:
    """All eigenvalues, ascending, by bisection to absolute tolerance `tol`."""
    tol = settings.EIGEN_TOL if tol is None else tol
    if H.size == 1:
        return H.diagonal.copy()
    return eigvalsh_tridiagonal(H.diagonal, H.offdiagonal, lapack_driver="stebz", tol=tol)


def histogram(eigs: np.ndarray, bins: Union[int, str, Sequence[float]] = "fd", normalized: bool = False) -> SpectralHistogram:
    """Binned eigenvalues; Freedman-Diaconis bins unless told otherwise."""
    edges = np.histogram_bin_edges(eigs, bins=bins)
    counts, edges = np.histogram(eigs, bins=edges)
    return SpectralHistogram(
        edges=edges.tolist(),
        counts=counts.astype(int).tolist(),
        total=int(counts.sum()),
        normalized=normalized,
    )


def _mean_and_error(values: np.ndarray):
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=0)
    if values.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])


def _count_realization(index, ensemble, energies, n_sites, seed):
    t, v = sample_sites(ensemble, n_sites, RealizationStream(seed, index))
    return eigen_count(JacobiMatrix.from_sequences(t, v), energies) / n_sites


def ids_by_counting(
    ensemble: PolymerEnsemble,
    energies,
    n_sites: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> IDSCurve:
    if n_sites < 100:
        raise DomainError(f"n_sites must be at least 100, got {n_sites}")
    energies = np.sort(np.atleast_1d(np.asarray(energies, dtype=float)))
    rows = RealizationPool(workers).map(_count_realization, range(reps), ensemble, energies, n_sites, seed)
    mean, error = _mean_and_error(np.array(rows))
    logger.info("IDS by counting: %d energies, N=%d, reps=%d", energies.size, n_sites, reps)
    return IDSCurve(
        energies=energies.tolist(),
        values=mean.tolist(),
        stderr=error.tolist(),
        n_sites=n_sites,
        reps=reps,
        seed=seed,
        method="counting",
    )


def _lyapunov_realization(index, ensemble, energies, n_polymers, seed):
    batch = sample_polymers(ensemble, n_polymers, RealizationStream(seed, index))
    return transfer_product_norm(batch, energies) / batch.n_sites


def lyapunov(
    ensemble: PolymerEnsemble,
    energies,
    n_polymers: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> List[LyapunovPoint]:
    """Lyapunov exponent per site from renormalized transfer products."""
    if n_polymers < 1000:
        raise DomainError(f"n_polymers must be at least 1000, got {n_polymers}")
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    rows = RealizationPool(workers).map(_lyapunov_realization, range(reps), ensemble, energies, n_polymers, seed)
    mean, error = _mean_and_error(np.array(rows))
    return [LyapunovPoint(energy=float(e), gamma=float(g), stderr=float(s)) for e, g, s in zip(energies, mean, error)]


def _thouless_realization(index, ensemble, energy, n_sites, seed):
    t, v = sample_sites(ensemble, n_sites, RealizationStream(seed, index))
    gamma = site_product_norm(t, v, energy) / n_sites
    eigs = eigenvalues(JacobiMatrix.from_sequences(t, v))
    distance = np.abs(energy - eigs)
    floored = int(np.count_nonzero(distance < EIGEN_FLOOR))
    log_potential = np.mean(np.log(np.maximum(distance, EIGEN_FLOOR)))
    return abs(gamma - (log_potential - np.mean(np.log(t)))), floored


def thouless_residual(
    ensemble: PolymerEnsemble,
    energy: float,
    sizes: Sequence[int],
    reps: int,
    seed: int,
    workers: int = 1,
) -> ThoulessReport:
    """
    |gamma_N(E) - (mean log|E - E_j| - mean log t)| averaged over realizations,
    for each system size. The hopping mean is taken over the realization's
    own t(0..N-1), which makes the identity exact up to boundary terms.
    """
    residuals, errors = [], []
    floored = 0
    for n_sites in sizes:
        rows = RealizationPool(workers).map(_thouless_realization, range(reps), ensemble, energy, n_sites, seed)
        mean, error = _mean_and_error(np.array([r[0] for r in rows]))
        residuals.append(float(mean))
        errors.append(float(error))
        floored += sum(r[1] for r in rows)
    if floored:
        logger.warning("%d eigenvalue distances floored at %g", floored, EIGEN_FLOOR)
    return ThoulessReport(energy=energy, sizes=list(sizes), residuals=residuals, stderr=errors, floored_terms=floored)

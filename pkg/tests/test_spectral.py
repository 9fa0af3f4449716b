import math

import numpy as np
import pytest

from app.engine.sampling import RealizationStream, sample_sites
from app.engine.spectral import (
    JacobiMatrix,
    eigen_count,
    eigenvalues,
    histogram,
    ids_by_counting,
    lyapunov,
    thouless_residual,
)
from app.errors import DomainError
from app.models.spectral import ThoulessReport


def _random_matrix(rng, n):
    return JacobiMatrix.from_sequences(rng.uniform(0.1, 3.0, size=n), rng.normal(size=n))


def test_eigenvalues_match_dense_solver(rng):
    for _ in range(100):
        H = _random_matrix(rng, int(rng.integers(1, 13)))
        np.testing.assert_allclose(eigenvalues(H), np.linalg.eigvalsh(H.dense()), atol=1e-8)


def test_single_site_matrix():
    H = JacobiMatrix.from_sequences(np.array([0.7]), np.array([-0.3]))
    np.testing.assert_array_equal(eigenvalues(H), [-0.3])
    assert eigen_count(H, -0.3) == 1
    assert eigen_count(H, -0.31) == 0


def test_eigen_count_is_a_counting_function(rng):
    H = _random_matrix(rng, 60)
    eigs = eigenvalues(H)
    grid = np.linspace(eigs[0] - 1.0, eigs[-1] + 1.0, 400)
    counts = eigen_count(H, grid)
    assert np.all(np.diff(counts) >= 0)
    assert counts[0] == 0
    assert counts[-1] == H.size
    midpoints = (eigs[:-1] + eigs[1:]) / 2.0
    np.testing.assert_array_equal(eigen_count(H, midpoints), np.arange(1, H.size))


def test_eigenvalues_interlace(rng):
    H = _random_matrix(rng, 40)
    full, reduced = eigenvalues(H), eigenvalues(H.without_last_site())
    assert np.all(full[:-1] <= reduced + 1e-10)
    assert np.all(reduced <= full[1:] + 1e-10)


def test_chiral_spectrum_is_symmetric(bernoulli_ensemble):
    t, v = sample_sites(bernoulli_ensemble, 400, RealizationStream(6))
    eigs = eigenvalues(JacobiMatrix.from_sequences(t, v))
    np.testing.assert_allclose(eigs, -eigs[::-1], atol=1e-8)


def test_dimer_ids_at_zero_is_one_half(bernoulli_ensemble):
    curve = ids_by_counting(bernoulli_ensemble, [0.0], 1000, 3, seed=1)
    assert curve.values[0] == pytest.approx(0.5, abs=2.0 / 1000)
    assert curve.method == "counting"


def test_laplacian_ids(laplacian_ensemble):
    curve = ids_by_counting(laplacian_ensemble, [1.0, -3.0, 3.0], 3000, 1, seed=1)
    assert curve.energies == [-3.0, 1.0, 3.0]
    np.testing.assert_allclose(curve.values, [0.0, 2.0 / 3.0, 1.0], atol=2.0 / 3000)
    assert curve.stderr == [0.0, 0.0, 0.0]


def test_ids_rejects_small_systems(laplacian_ensemble):
    with pytest.raises(DomainError):
        ids_by_counting(laplacian_ensemble, [0.0], 50, 1, seed=1)


def test_ids_does_not_depend_on_workers(bernoulli_ensemble):
    serial = ids_by_counting(bernoulli_ensemble, [-0.5, 0.2, 1.0], 500, 4, seed=3, workers=1)
    pooled = ids_by_counting(bernoulli_ensemble, [-0.5, 0.2, 1.0], 500, 4, seed=3, workers=3)
    assert serial.values == pooled.values
    assert serial.stderr == pooled.stderr


def test_laplacian_lyapunov_outside_band(laplacian_ensemble):
    (point,) = lyapunov(laplacian_ensemble, 3.0, 2000, 1, seed=1)
    assert point.gamma == pytest.approx(math.acosh(1.5), abs=1e-3)
    (inside,) = lyapunov(laplacian_ensemble, 0.5, 2000, 1, seed=1)
    assert inside.gamma < 1e-2


def test_uniform_dimer_lyapunov_at_zero(uniform_ensembles):
    (point,) = lyapunov(uniform_ensembles[0], 0.0, 20_000, 2, seed=4)
    assert point.gamma == pytest.approx(0.0816, abs=5e-3)
    with pytest.raises(DomainError):
        lyapunov(uniform_ensembles[0], 0.0, 10, 1, seed=4)


def test_thouless_residual_is_small(laplacian_ensemble):
    report = thouless_residual(laplacian_ensemble, 3.0, [2000], 1, seed=1)
    assert report.sizes == [2000]
    assert report.residuals[0] < 1e-2
    assert report.floored_terms == 0


def test_thouless_trend_is_serialized():
    shrinking = ThoulessReport(energy=0.5, sizes=[1000, 4000], residuals=[2e-3, 5e-4], stderr=[0.0, 0.0])
    assert shrinking.model_dump()["decreasing"] is True
    growing = shrinking.model_copy(update={"residuals": [5e-4, 2e-3]})
    assert growing.model_dump(mode="json")["decreasing"] is False


def test_histogram_counts_every_eigenvalue(rng):
    eigs = eigenvalues(_random_matrix(rng, 300))
    hist = histogram(eigs, bins=12)
    assert hist.total == 300
    assert len(hist.counts) == 12
    assert len(hist.centers) == 12
    assert sum(histogram(eigs).counts) == 300

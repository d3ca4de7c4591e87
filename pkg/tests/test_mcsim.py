import math

import numpy as np
import pytest
from scipy import stats

from cauchyprod import mcsim
from cauchyprod.errors import DomainError, SamplingError
from cauchyprod.kernel import finite_mellin_moment
from cauchyprod.mcsim import (
    EigenSampleBatch,
    RngStream,
    cauchy_radial_cdf,
    empirical_cdf,
    fractional_moment,
    ks_distance,
    merge_batches,
    phase_ks,
    product_eigenvalues,
    radial_histogram,
    radial_ks,
    sample_cauchy_matrix,
    sample_ginibre,
)
from cauchyprod.weight import EnsembleConfig, RadialProfile


def beta_moment(s):
    # E|x|^2s for one scalar Cauchy-Lorentz variable: pi s / sin(pi s)
    return math.pi * s / math.sin(math.pi * s)


@pytest.fixture(scope="module")
def scalar_batch():
    return product_eigenvalues(EnsembleConfig.square(1, 1), 100_000, RngStream(101))


@pytest.fixture(scope="module")
def scalar_product_batch():
    return product_eigenvalues(EnsembleConfig.square(2, 1), 100_000, RngStream(202))


# ---------------------------------------------------------------- streams and Ginibre


def test_rng_stream_validation():
    with pytest.raises(DomainError):
        RngStream(-1)
    with pytest.raises(DomainError):
        RngStream(1, 2**64)


def test_ginibre_moments():
    g = sample_ginibre(100, 1000, RngStream(1))
    assert abs(np.mean(np.abs(g) ** 2) - 1) < 0.02
    assert abs(np.mean(g)) < 0.02
    assert abs(np.var(g.real) - 0.5) < 0.02 and abs(np.var(g.imag) - 0.5) < 0.02


def test_ginibre_determinism_and_independence():
    a = sample_ginibre(4, 3, RngStream(9, 0))
    assert a.shape == (4, 3)
    np.testing.assert_array_equal(a, sample_ginibre(4, 3, RngStream(9, 0)))
    assert not np.array_equal(a, sample_ginibre(4, 3, RngStream(9, 1)))
    with pytest.raises(DomainError):
        sample_ginibre(0, 3, RngStream(9))


def test_cauchy_matrix_shape_and_determinism():
    x = sample_cauchy_matrix(5, RngStream(3))
    assert x.shape == (5, 5)
    np.testing.assert_array_equal(x, sample_cauchy_matrix(5, RngStream(3)))
    with pytest.raises(DomainError):
        sample_cauchy_matrix(0, RngStream(3))


def test_cauchy_resampling_limit(monkeypatch):
    monkeypatch.setattr(mcsim, "COND_LIMIT", 0.0)
    with pytest.raises(SamplingError):
        sample_cauchy_matrix(3, RngStream(3))
    with pytest.raises(SamplingError):
        product_eigenvalues(EnsembleConfig.square(1, 3), 2, RngStream(3))


# ---------------------------------------------------------------- scalar reductions


def test_scalar_cauchy_half_mass(scalar_batch):
    inside = np.mean(scalar_batch.moduli <= 1.0)
    sigma = math.sqrt(0.25 / scalar_batch.eigenvalues.size)
    assert abs(inside - 0.5) <= 3 * sigma


def test_scalar_cauchy_radial_ks(scalar_batch):
    assert radial_ks(scalar_batch, cauchy_radial_cdf) <= 0.01


def test_scalar_cauchy_fractional_moment(scalar_batch):
    est, se = fractional_moment(scalar_batch, 0.2)
    assert abs(est - beta_moment(0.2)) <= 3 * se


def test_scalar_cauchy_phase_uniform(scalar_batch):
    assert phase_ks(scalar_batch) <= 0.01


def test_scalar_product_fractional_moment(scalar_product_batch):
    est, se = fractional_moment(scalar_product_batch, 0.2)
    assert abs(est - beta_moment(0.2) ** 2) <= 3 * se


# ---------------------------------------------------------------- product batches


def test_batch_counts_and_guards():
    cfg = EnsembleConfig.square(2, 4)
    b = product_eigenvalues(cfg, 30, RngStream(4))
    assert b.eigenvalues.size == 30 * 4 == b.matrices_sampled * cfg.N
    assert np.all(np.isfinite(b.eigenvalues))
    assert set(np.unique(b.matrix_index)) == set(range(30))
    with pytest.raises(DomainError):
        product_eigenvalues(EnsembleConfig.from_nu(4, (0, 1)), 3, RngStream(4))
    with pytest.raises(DomainError):
        product_eigenvalues(EnsembleConfig.square(1, 65), 1, RngStream(4))
    with pytest.raises(DomainError):
        product_eigenvalues(cfg, 0, RngStream(4))


def test_batch_thread_independence():
    cfg = EnsembleConfig.square(2, 5)
    a = product_eigenvalues(cfg, 1100, RngStream(77), threads=1)
    b = product_eigenvalues(cfg, 1100, RngStream(77), threads=4)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.matrix_index, b.matrix_index)


def test_replica_streams_independent_of_batch_size():
    cfg = EnsembleConfig.square(1, 3)
    small = product_eigenvalues(cfg, 5, RngStream(8))
    large = product_eigenvalues(cfg, 600, RngStream(8))
    np.testing.assert_array_equal(small.eigenvalues, large.eigenvalues[:15])


def test_n1_radial_law():
    b = product_eigenvalues(EnsembleConfig.square(1, 16), 500, RngStream(31))
    assert radial_ks(b, cauchy_radial_cdf) <= 0.02
    assert phase_ks(b) <= 0.02


def test_n1_histogram_matches_density():
    b = product_eigenvalues(EnsembleConfig.square(1, 16), 500, RngStream(32))
    grid = np.linspace(0.0, 3.0, 13)
    h = radial_histogram(b, grid)
    count = b.eigenvalues.size
    for (lo, hi), val in zip(zip(grid[:-1], grid[1:]), h.values):
        p = cauchy_radial_cdf(hi) - cauchy_radial_cdf(lo)
        area = math.pi * (hi * hi - lo * lo)
        sigma = math.sqrt(p * (1 - p) / count) / area
        assert abs(val - p / area) <= 4 * sigma


def test_n2_fractional_moment_matches_finite_N():
    cfg = EnsembleConfig.square(2, 8)
    b = product_eigenvalues(cfg, 1000, RngStream(33))
    est, se = fractional_moment(b, 0.2)
    assert abs(est - finite_mellin_moment(0.2, cfg)) <= 3 * se


# ---------------------------------------------------------------- serialization


def test_csv_round_trip(tmp_path):
    b = product_eigenvalues(EnsembleConfig.square(2, 3), 7, RngStream(5, 2))
    csv_path, meta_path = b.write(tmp_path / "b.csv")
    assert csv_path.read_text().splitlines()[0] == "re,im,matrix_index"
    back = EigenSampleBatch.read(csv_path)
    np.testing.assert_array_equal(back.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(back.matrix_index, b.matrix_index)
    assert back.cfg == b.cfg and back.seed == 5 and back.stream_id == 2
    assert back.metadata() == b.metadata()


def test_batch_invariants():
    cfg = EnsembleConfig.square(1, 2)
    with pytest.raises(DomainError):
        EigenSampleBatch(cfg, [1.0, 2.0, 3.0], [0, 0, 1], 2, seed=0)
    with pytest.raises(DomainError):
        EigenSampleBatch(cfg, [1.0, np.nan], [0, 0], 1, seed=0)


# ---------------------------------------------------------------- statistics


def _batch(values, N=1):
    values = np.asarray(values, dtype=complex)
    m = values.size // N
    return EigenSampleBatch(EnsembleConfig.square(1, N), values, np.repeat(np.arange(m), N), m, seed=0)


def test_fractional_moment_near_zero_is_one():
    b = _batch(np.exp(1j * np.arange(10)) * np.linspace(0.1, 10, 10))
    est, _ = fractional_moment(b, 1e-12)
    assert est == pytest.approx(1.0, abs=1e-10)


def test_fractional_moment_domain():
    b = _batch([1.0, 2.0])
    with pytest.raises(DomainError):
        fractional_moment(b, 1.0)
    with pytest.raises(DomainError):
        fractional_moment(b, 0.0)
    empty = EigenSampleBatch(EnsembleConfig.square(1, 1), [], [], 0, seed=0)
    with pytest.raises(DomainError):
        fractional_moment(empty, 0.2)


def test_clustered_error_reported():
    b = product_eigenvalues(EnsembleConfig.square(2, 6), 200, RngStream(6))
    est_c, se_c = fractional_moment(b, 0.2)
    est_i, se_i = fractional_moment(b, 0.2, clustered=False)
    assert est_c == est_i and se_c > 0 and se_i > 0


def test_empirical_cdf_step():
    b = _batch([1.0])
    cdf = empirical_cdf(b, [0.5, 1.0, 1.5])
    np.testing.assert_array_equal(cdf.values, [0.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        empirical_cdf(b, [])


def test_histogram_merge_property():
    cfg = EnsembleConfig.square(1, 4)
    a = product_eigenvalues(cfg, 40, RngStream(1))
    b = product_eigenvalues(cfg, 60, RngStream(2))
    grid = np.linspace(0, 4, 9)
    ha, hb = radial_histogram(a, grid).values, radial_histogram(b, grid).values
    merged = radial_histogram(merge_batches(a, b), grid).values
    na, nb = a.eigenvalues.size, b.eigenvalues.size
    np.testing.assert_allclose(merged, (na * ha + nb * hb) / (na + nb), rtol=1e-14)
    with pytest.raises(DomainError):
        radial_histogram(a, [1.0])


def test_ks_distance():
    grid = np.linspace(0, 4, 41)
    smooth = RadialProfile(grid, grid**2 / (1 + grid**2), "cdf")
    assert ks_distance(smooth, smooth) == 0.0
    step = RadialProfile(grid, (grid >= 1.0).astype(float), "cdf")
    assert ks_distance(step, smooth) == pytest.approx(np.max(np.abs(step.values - smooth.values)))
    other = RadialProfile(np.linspace(0, 4, 17), np.linspace(0, 4, 17) ** 2 / (1 + np.linspace(0, 4, 17) ** 2), "cdf")
    with pytest.raises(DomainError):
        ks_distance(step, other)
    assert ks_distance(step, other, interpolate=True) > 0
    with pytest.raises(DomainError):
        ks_distance(RadialProfile(grid, np.ones_like(grid), "density"), smooth)


def test_exact_ks_matches_scipy(scalar_batch):
    ref = stats.kstest(scalar_batch.moduli, cauchy_radial_cdf).statistic
    assert radial_ks(scalar_batch, cauchy_radial_cdf) == ref

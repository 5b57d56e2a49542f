import numpy as np
import pytest

from mcqr.core_math import RngStream
from mcqr.errors import DimensionError, InvalidConfig
from mcqr.sampling import (CovariateModel, NoiseModel, ReferenceModel, draw_b_star,
                           make_dataset, pareto_quantile, sample_covariates, sample_noise,
                           sample_reference)


def test_covariate_sigma():
    assert np.allclose(CovariateModel(2).sigma, [[1.0, 0.5], [0.5, 1.0]])
    assert np.allclose(CovariateModel(1).sigma, [[1.0]])


def test_covariate_sample_covariance():
    X = sample_covariates(CovariateModel(7), 100_000, RngStream(1))
    S = np.cov(X.T)
    sigma = CovariateModel(7).sigma
    assert np.all(np.abs(S - sigma) <= 0.05 * np.maximum(sigma, 0.2))


def test_covariate_invalid():
    with pytest.raises(InvalidConfig):
        CovariateModel(0)


def test_gaussian_noise_mean():
    e = sample_noise(NoiseModel("gaussian_iso", 2), 100_000, RngStream(2))
    assert np.all(np.abs(e.mean(axis=0)) <= 0.02)


def test_pareto_copula_marginals():
    e = sample_noise(NoiseModel("pareto_copula", 2), 100_000, RngStream(3))
    assert np.all(np.abs(e.mean(axis=0)) <= 0.05)
    assert e.min() >= -1.0
    # Gaussian copula with correlation 0.9 gives strong rank dependence
    ranks = np.argsort(np.argsort(e, axis=0), axis=0)
    assert np.corrcoef(ranks.T)[0, 1] > 0.85


def test_pareto_quantile_mean_zero():
    # mean of Pareto(k, alpha, s) is k + s * alpha / (alpha - 1)
    u = (np.arange(1_000_000) + 0.5) / 1_000_000
    assert np.mean(pareto_quantile(u, -2.0, 2.0, 1.0)) == pytest.approx(0.0, abs=5e-3)


def test_banana_centered():
    e = sample_noise(NoiseModel("banana", 2), 100_000, RngStream(4))
    assert abs(e[:, 1].mean()) <= 0.02
    e3 = sample_noise(NoiseModel("banana", 3), 100_000, RngStream(5))
    assert np.all(np.abs(e3.mean(axis=0)) <= 0.02)


def test_banana_needs_two_dims():
    with pytest.raises(InvalidConfig):
        NoiseModel("banana", 1)


def test_t_noise_medians():
    e = sample_noise(NoiseModel("multivariate_t", 2), 100_000, RngStream(6))
    assert np.all(np.abs(np.median(e, axis=0)) <= 0.05)


def test_contamination_fraction():
    n, eps = 20_000, 0.3
    e = sample_noise(NoiseModel("contaminated_gaussian", 1, {"epsilon": eps}), n, RngStream(7))
    frac = np.mean(e[:, 0] > 50)
    assert abs(frac - eps) <= 3 * np.sqrt(eps * (1 - eps) / n)
    e = sample_noise(NoiseModel("contaminated_pareto", 2, {"epsilon": eps}), n, RngStream(8))
    assert abs(np.mean(e[:, 0] >= 11) - eps) <= 3 * np.sqrt(eps * (1 - eps) / n) + 0.01


@pytest.mark.parametrize("params", [{"df": 0.0}, {"df": -1.0}])
def test_invalid_t(params):
    with pytest.raises(InvalidConfig):
        NoiseModel("multivariate_t", 2, params)


def test_invalid_pareto_and_epsilon():
    with pytest.raises(InvalidConfig):
        NoiseModel("pareto_copula", 2, {"alpha": 0.0})
    with pytest.raises(InvalidConfig):
        NoiseModel("contaminated_gaussian", 2, {"epsilon": 1.0})
    with pytest.raises(InvalidConfig):
        NoiseModel("nope", 2)


def test_reference_moments():
    U = sample_reference(ReferenceModel("standard_gaussian", 3), 100_000, RngStream(9))
    assert np.all(np.abs(np.cov(U.T) - np.eye(3)) <= 0.05)
    U = sample_reference(ReferenceModel("uniform_cube", 1), 100_000, RngStream(10))
    assert abs(U.mean() - 0.5) <= 0.01
    U = sample_reference(ReferenceModel("uniform_interval", 1), 100_000, RngStream(11))
    assert abs(U.mean()) <= 0.01 and abs(U.var() - 1 / 3) <= 0.01
    U = sample_reference(ReferenceModel("spherical_uniform", 2), 100_000, RngStream(12))
    r = np.linalg.norm(U, axis=1)
    assert r.max() <= 1.0 and abs(r.mean() - 0.5) <= 0.01


def test_reference_interval_only_1d():
    with pytest.raises(InvalidConfig):
        ReferenceModel("uniform_interval", 2)


def test_make_dataset_zero_b_returns_noise():
    noise = NoiseModel("gaussian_iso", 2)
    data = make_dataset(np.zeros((2, 3)), CovariateModel(3), noise, 50, RngStream(13))
    again = sample_noise(noise, 50, RngStream(13).derive("noise"))
    assert np.array_equal(data.Y, again)


def test_make_dataset_noiseless():
    b = np.arange(6.0).reshape(2, 3)
    data = make_dataset(b, CovariateModel(3), NoiseModel("gaussian_iso", 2, {"scale": 0.0}),
                        40, RngStream(14))
    assert np.array_equal(data.Y, data.X @ b.T)


def test_make_dataset_dimension_mismatch():
    with pytest.raises(DimensionError):
        make_dataset(np.zeros((2, 2)), CovariateModel(3), NoiseModel("gaussian_iso", 2), 5,
                     RngStream(0))


def test_b_star_reproducible():
    b1 = draw_b_star(2, 7, RngStream(2024))
    b2 = draw_b_star(2, 7, RngStream(2024))
    assert np.array_equal(b1, b2)
    big = draw_b_star(200, 500, RngStream(1))
    assert abs(big.mean() - 5) < 0.05 and abs(big.var() - 5) < 0.1


def test_sampling_determinism():
    noise = NoiseModel("pareto_copula", 3)
    assert np.array_equal(sample_noise(noise, 100, RngStream(5)),
                          sample_noise(noise, 100, RngStream(5)))

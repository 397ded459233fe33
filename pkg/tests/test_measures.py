"""
Tests for Gaussian measures, KL divergence and the posterior family
"""

import math

import numpy as np
import pytest

from core.errors import DimensionMismatchError
from core.measures import kl_product_gaussians, posterior_lambda, prior_measure
from models import GaussianProductMeasure, PosteriorFamilyConfig


def family(prior_mean, empirical_mean, prior_variance=0.01, empirical_variance=0.01):
    return PosteriorFamilyConfig(
        prior_mean=prior_mean,
        prior_variance=prior_variance,
        empirical_mean=empirical_mean,
        empirical_variance=empirical_variance,
    )


def test_kl_of_identical_measures_is_zero():
    """Test KL(q, q) = 0."""
    q = GaussianProductMeasure(mean=[0.3, -1.0], variance=[0.5, 2.0])
    assert kl_product_gaussians(q, q) == 0.0


def test_kl_closed_form():
    """Test a one-dimensional hand value: q = N(0, 1), p = N(1, 2)."""
    q = GaussianProductMeasure(mean=[0.0], variance=[1.0])
    p = GaussianProductMeasure(mean=[1.0], variance=[2.0])

    expected = 0.5 * math.log(2.0) + (1.0 + 1.0) / 4.0 - 0.5
    assert kl_product_gaussians(q, p) == pytest.approx(expected, rel=1e-12)


def test_kl_adds_over_dimensions():
    """Test that KL of a product is the sum of per-dimension KLs."""
    q = GaussianProductMeasure(mean=[0.0, 1.0], variance=[1.0, 0.5])
    p = GaussianProductMeasure(mean=[1.0, 0.0], variance=[2.0, 1.0])
    parts = [
        kl_product_gaussians(
            GaussianProductMeasure(mean=[q.mean[j]], variance=[q.variance[j]]),
            GaussianProductMeasure(mean=[p.mean[j]], variance=[p.variance[j]]),
        )
        for j in range(2)
    ]
    assert kl_product_gaussians(q, p) == pytest.approx(sum(parts), rel=1e-12)


def test_kl_dimension_mismatch():
    """Test that measures of different dimension are rejected."""
    with pytest.raises(DimensionMismatchError):
        kl_product_gaussians(
            GaussianProductMeasure.isotropic([0.0], 1.0),
            GaussianProductMeasure.isotropic([0.0, 0.0], 1.0),
        )


def test_posterior_lambda_endpoints():
    """Test lambda = 0 (empirical) and lambda = 1 (conjugate posterior)."""
    cfg = family([0.0, 0.0], [1.0, 2.0], prior_variance=0.02, empirical_variance=0.01)

    empirical = posterior_lambda(cfg, 0.0)
    assert empirical.mean == [1.0, 2.0]
    assert empirical.variance == [0.01, 0.01]

    bayes = posterior_lambda(cfg, 1.0)
    precision = 1 / 0.02 + 1 / 0.01
    assert bayes.variance[0] == pytest.approx(1 / precision)
    assert bayes.mean[1] == pytest.approx((2.0 / 0.01) / precision)


def test_posterior_lambda_equal_variances_midpoint():
    """Test that equal variances put the Bayes mean halfway between."""
    mu = posterior_lambda(family([0.0], [1.0]), 1.0)
    assert mu.mean[0] == pytest.approx(0.5)
    assert mu.variance[0] == pytest.approx(0.005)


def test_posterior_lambda_rejects_out_of_range():
    """Test lambda outside [0, 1]."""
    cfg = family([0.0], [1.0])
    for lam in (-0.01, 1.01):
        with pytest.raises(ValueError):
            posterior_lambda(cfg, lam)


def test_family_means_coincide_when_prior_equals_estimate():
    """Test that every member shares the mean when theta_hat = theta_0."""
    theta = [0.4, -0.2, 1.5]
    cfg = family(theta, theta)
    for lam in np.linspace(0.0, 1.0, 11):
        assert posterior_lambda(cfg, float(lam)).mean_array() == pytest.approx(theta)


def test_family_variance_shrinks_with_lambda():
    """Test that posterior variance decreases as lambda grows."""
    cfg = family([0.0], [1.0])
    variances = [posterior_lambda(cfg, lam).variance[0] for lam in (0.0, 0.25, 0.5, 1.0)]
    assert variances == sorted(variances, reverse=True)


def test_prior_measure():
    """Test that the prior is centred on theta_0 with sigma_0^2."""
    mu0 = prior_measure(family([1.0, 2.0], [0.0, 0.0], prior_variance=0.3))
    assert mu0.mean == [1.0, 2.0]
    assert mu0.variance == [0.3, 0.3]


def test_kl_is_nonnegative_on_random_pairs():
    """Test KL >= 0 on random measures, with equality only for identical ones."""
    rng = np.random.default_rng(0)
    for _ in range(200):
        dim = int(rng.integers(1, 6))
        q = GaussianProductMeasure(
            mean=rng.normal(0.0, 1.0, dim).tolist(), variance=rng.uniform(0.05, 3.0, dim).tolist()
        )
        p = GaussianProductMeasure(
            mean=rng.normal(0.0, 1.0, dim).tolist(), variance=rng.uniform(0.05, 3.0, dim).tolist()
        )
        assert kl_product_gaussians(q, p) > 0.0
        assert kl_product_gaussians(q, q) == 0.0


def test_posterior_lambda_is_continuous():
    """Test that a small step in lambda moves the mean and variance by a small amount."""
    cfg = family([0.0, 1.0, -2.0], [0.5, -1.0, 3.0])
    gap = float(np.max(np.abs(np.asarray(cfg.prior_mean) - np.asarray(cfg.empirical_mean))))
    step = 1e-6
    for lam in np.linspace(0.0, 1.0 - step, 41):
        before = posterior_lambda(cfg, float(lam))
        after = posterior_lambda(cfg, float(lam) + step)
        # d mean / d lambda <= gap and d variance / d lambda <= 0.01 for equal variances
        assert np.max(np.abs(after.mean_array() - before.mean_array())) <= gap * step + 1e-12
        assert np.max(np.abs(after.variance_array() - before.variance_array())) <= 0.01 * step + 1e-15

import numpy as np

from core.errors import DimensionMismatchError
from models import GaussianProductMeasure, PosteriorFamilyConfig


def kl_product_gaussians(q: GaussianProductMeasure, p: GaussianProductMeasure) -> float:
    """KL(q || p) in nats for two axis-aligned Gaussians of equal dimension."""
    if q.dim != p.dim:
        raise DimensionMismatchError(f"KL between dimensions {q.dim} and {p.dim}")

    q_mean, q_var = q.mean_array(), q.variance_array()
    p_mean, p_var = p.mean_array(), p.variance_array()
    per_dim = (
        0.5 * np.log(p_var / q_var)
        + (q_var + (q_mean - p_mean) ** 2) / (2.0 * p_var)
        - 0.5
    )
    # Rounding can leave tiny negatives when q == p.
    return max(float(per_dim.sum()), 0.0)


def posterior_lambda(cfg: PosteriorFamilyConfig, lam: float) -> GaussianProductMeasure:
    """Member of the prior/empirical interpolation family.

    lam = 0 gives the empirical Gaussian, lam = 1 the conjugate posterior of a
    Gaussian prior around prior_mean and a Gaussian likelihood around
    empirical_mean.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")

    prior_precision = lam / cfg.prior_variance
    empirical_precision = 1.0 / cfg.empirical_variance
    precision = prior_precision + empirical_precision

    mean = (
        prior_precision * np.asarray(cfg.prior_mean, dtype=float)
        + empirical_precision * np.asarray(cfg.empirical_mean, dtype=float)
    ) / precision
    return GaussianProductMeasure.isotropic(mean, 1.0 / precision)


def prior_measure(cfg: PosteriorFamilyConfig) -> GaussianProductMeasure:
    """The fixed prior mu_0 of the family."""
    return GaussianProductMeasure.isotropic(cfg.prior_mean, cfg.prior_variance)

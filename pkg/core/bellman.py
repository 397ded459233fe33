"""Empirical and posterior-expected squared Bellman errors, LSTD, and the
variance terms of linear value functions."""

from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg, sparse

from core.errors import DimensionMismatchError, GenerativeAccessError, SingularSystemError
from core.features import FeatureMap
from envs.base import Environment
from models import FiniteChain, GaussianProductMeasure, NoiseModel, TransitionBatch, TransitionSample
from policies import Policy

RIDGE_SCALE = 1e-6


class ResidualDataset(BaseModel):
    """Per-sample (r_i, psi_i) with psi_i = gamma * phi(x'_i) - phi(x_i)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rewards: np.ndarray
    phi: sparse.csr_matrix
    phi_next: sparse.csr_matrix
    psi: sparse.csr_matrix
    gamma: float

    @property
    def n(self) -> int:
        return len(self.rewards)

    @property
    def dim(self) -> int:
        return self.psi.shape[1]

    def _check_dim(self, size: int):
        if size != self.dim:
            raise DimensionMismatchError(f"expected dimension {self.dim}, got {size}")


def _as_batch(samples) -> TransitionBatch:
    if isinstance(samples, TransitionBatch):
        return samples
    samples: Sequence[TransitionSample] = list(samples)
    if not samples:
        raise ValueError("cannot build residuals from an empty dataset")
    return TransitionBatch(
        states=np.array([s.state for s in samples], dtype=float),
        actions=np.array([s.action for s in samples], dtype=int),
        rewards=np.array([s.reward for s in samples], dtype=float),
        next_states=np.array([s.next_state for s in samples], dtype=float),
        trajectory_ids=np.array([s.trajectory_id for s in samples], dtype=int),
        step_indices=np.array([s.step_index for s in samples], dtype=int),
        state_names=tuple(f"s{j}" for j in range(len(samples[0].state))),
    )


def build_residuals(samples, features: FeatureMap, gamma: float) -> ResidualDataset:
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    batch = _as_batch(samples)
    if len(batch) == 0:
        raise ValueError("cannot build residuals from an empty dataset")

    phi = features.transform(batch.states)
    phi_next = features.transform(batch.next_states)
    return ResidualDataset(
        rewards=np.asarray(batch.rewards, dtype=float),
        phi=phi,
        phi_next=phi_next,
        psi=sparse.csr_matrix(gamma * phi_next - phi),
        gamma=gamma,
    )


def empirical_bellman_error(theta, residuals: ResidualDataset) -> float:
    """R_n(V_theta) = mean_i (r_i + psi_i . theta)^2."""
    theta = np.asarray(theta, dtype=float)
    residuals._check_dim(theta.shape[0])
    errors = residuals.rewards + residuals.psi @ theta
    return float(np.mean(errors**2))


def expected_bellman_error(mu: GaussianProductMeasure, residuals: ResidualDataset) -> float:
    """Closed-form mean of R_n(V_theta) for theta ~ mu."""
    residuals._check_dim(mu.dim)
    errors = residuals.rewards + residuals.psi @ mu.mean_array()
    spread = residuals.psi.multiply(residuals.psi) @ mu.variance_array()
    return float(np.mean(errors**2) + np.mean(spread))


def lstd_system(residuals: ResidualDataset) -> tuple[np.ndarray, np.ndarray]:
    """A = sum phi (phi - gamma phi')^T, b = sum phi r."""
    a = (residuals.phi.T @ (residuals.phi - residuals.gamma * residuals.phi_next)).toarray()
    b = residuals.phi.T @ residuals.rewards
    return a, np.asarray(b, dtype=float)


def default_ridge(a: np.ndarray) -> float:
    return RIDGE_SCALE * max(float(np.trace(a)), 0.0) / a.shape[0]


def solve_lstd_system(a: np.ndarray, b: np.ndarray, ridge: float) -> np.ndarray:
    assert ridge >= 0, "ridge cannot be negative"
    d = a.shape[0]
    if ridge == 0.0:
        rank = int(np.linalg.matrix_rank(a))
        if rank < d:
            raise SingularSystemError(rank, d)
    try:
        return linalg.solve(a + ridge * np.eye(d), b)
    except linalg.LinAlgError:
        raise SingularSystemError(int(np.linalg.matrix_rank(a)), d)


def lstd_solve(
    data,
    features: FeatureMap | None = None,
    gamma: float | None = None,
    ridge: float | None = None,
) -> np.ndarray:
    """LSTD weights from a ResidualDataset or from raw samples plus features/gamma.

    ridge=None uses 1e-6 * trace(A) / d.
    """
    if not isinstance(data, ResidualDataset):
        assert features is not None and gamma is not None, (
            "features and gamma are required when passing raw samples"
        )
        data = build_residuals(data, features, gamma)
    a, b = lstd_system(data)
    return solve_lstd_system(a, b, default_ridge(a) if ridge is None else ridge)


def lstd_exact(chain: FiniteChain, phi: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """LSTD from the kernel itself: A = Phi^T D (Phi - gamma P Phi), b = Phi^T D r."""
    phi = np.asarray(phi, dtype=float)
    d_matrix = np.diag(np.asarray(weights, dtype=float))
    a = phi.T @ d_matrix @ (phi - chain.gamma * chain.kernel() @ phi)
    b = phi.T @ d_matrix @ chain.rewards()
    return solve_lstd_system(a, b, ridge=0.0)


def variance_term_point(theta, noise: NoiseModel, gamma: float) -> float:
    """Gamma_pi(V_theta) = sigma_R^2 + gamma^2 theta^T Sigma_phi theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] != noise.dim:
        raise DimensionMismatchError(f"theta has {theta.shape[0]} entries, noise {noise.dim}")
    sigma = noise.sigma_phi_array()
    return float(noise.sigma_r_sq + gamma**2 * theta @ sigma @ theta)


def variance_term_expected(mu: GaussianProductMeasure, noise: NoiseModel, gamma: float) -> float:
    """Mean of Gamma_pi(V_theta) for theta ~ mu."""
    if mu.dim != noise.dim:
        raise DimensionMismatchError(f"measure has dimension {mu.dim}, noise {noise.dim}")
    sigma = noise.sigma_phi_array()
    m = mu.mean_array()
    quadratic = m @ sigma @ m + mu.variance_array() @ np.diag(sigma)
    return float(noise.sigma_r_sq + gamma**2 * quadratic)


def estimate_sigma_phi(
    env: Environment,
    policy: Policy,
    features: FeatureMap,
    probe_states,
    pairs_per_state: int,
    seed: int,
) -> NoiseModel:
    """Double-sampling estimate of sigma_R^2 and E[Cov[phi(X')|X]].

    Each probe state is reset to `pairs_per_state` times; the unbiased
    covariance of the sampled next-state features is averaged over probes.
    """
    if pairs_per_state < 2:
        raise ValueError("pairs_per_state must be at least 2")
    if not env.generative:
        raise GenerativeAccessError(f"{env.describe()} cannot be reset to probe states")

    probes = np.atleast_2d(np.asarray(probe_states, dtype=float))
    rng = np.random.default_rng(seed)
    covariance = np.zeros((features.dimension, features.dimension))
    reward_variance = 0.0

    for probe in probes:
        states = np.repeat(probe[None, :], pairs_per_state, axis=0)
        next_states, rewards = env.step_batch(
            states, policy.act_batch(states), rng.random(pairs_per_state)
        )
        draws = features.transform(next_states).toarray()
        covariance += np.cov(draws, rowvar=False, ddof=1)
        reward_variance += float(np.var(rewards, ddof=1))

    covariance /= len(probes)
    return NoiseModel(
        sigma_r_sq=max(reward_variance / len(probes), 0.0),
        sigma_phi=((covariance + covariance.T) / 2.0).tolist(),
    )


def chain_noise_model(chain: FiniteChain, phi: np.ndarray, weights: np.ndarray) -> NoiseModel:
    """Exact Sigma_phi of a finite chain under state weighting `weights`.

    Rewards depend on the current state only, so sigma_R^2 = 0.
    """
    phi = np.asarray(phi, dtype=float)
    kernel = chain.kernel()
    mean_next = kernel @ phi
    covariance = np.zeros((phi.shape[1], phi.shape[1]))
    for x, weight in enumerate(weights):
        second = phi.T @ (kernel[x][:, None] * phi)
        covariance += weight * (second - np.outer(mean_next[x], mean_next[x]))
    covariance = (covariance + covariance.T) / 2.0
    return NoiseModel(sigma_r_sq=0.0, sigma_phi=covariance.tolist())


def bellman_residual_norm(chain: FiniteChain, values, weights) -> float:
    """||B^pi V - V||^2 weighted by `weights`."""
    values = np.asarray(values, dtype=float)
    backup = chain.rewards() + chain.gamma * chain.kernel() @ values
    return float(np.asarray(weights) @ (backup - values) ** 2)

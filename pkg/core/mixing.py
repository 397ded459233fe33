"""Dependence matrices of Markov samples, their norms, and finite-chain
utilities: stationary distributions, exact values and a Monte Carlo check of
the Bernstein-type concentration inequality for chains."""

import math

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph
from scipy.spatial.distance import pdist

from core.errors import ChainError, NumericalError
from models import FiniteChain, MixingProfile, MixingReport, Theorem6Report

NORM_TOLERANCE = 1e-9
NORM_MAX_ITER = 100_000
VALUE_RESIDUAL_TOLERANCE = 1e-10


def max_total_variation(rows: np.ndarray) -> float:
    """Largest TV distance (half L1) between any two rows."""
    if rows.shape[0] < 2:
        return 0.0
    return 0.5 * float(pdist(rows, metric="cityblock").max())


def mixing_lags(chain: FiniteChain, n: int) -> np.ndarray:
    """gamma_k = sqrt(max TV between rows of P^k) for k = 0..n-1, gamma_0 = 1."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    kernel = chain.kernel()
    lags = np.zeros(n)
    lags[0] = 1.0
    power = np.eye(chain.size)
    for k in range(1, n):
        power = power @ kernel
        lags[k] = math.sqrt(min(max_total_variation(power), 1.0))
        # TV contraction: once zero, it stays zero
        if lags[k] == 0.0:
            break
    return lags


def upper_toeplitz(lags: np.ndarray) -> np.ndarray:
    first_column = np.zeros(len(lags))
    first_column[0] = lags[0]
    return linalg.toeplitz(first_column, lags)


def operator_norm(matrix: np.ndarray, tol: float = NORM_TOLERANCE) -> float:
    """Spectral norm by power iteration on M^T M from the all-ones vector."""
    matrix = np.asarray(matrix, dtype=float)
    vector = np.ones(matrix.shape[1]) / math.sqrt(matrix.shape[1])
    estimate = 0.0
    for _ in range(NORM_MAX_ITER):
        image = matrix.T @ (matrix @ vector)
        norm = float(np.linalg.norm(image))
        if norm == 0.0:
            return 0.0
        vector = image / norm
        if abs(norm - estimate) <= tol * norm:
            estimate = norm
            break
        estimate = norm
    return math.sqrt(estimate)


def gamma_matrix(chain: FiniteChain, n: int) -> MixingProfile:
    lags = mixing_lags(chain, n)
    matrix = upper_toeplitz(lags)
    # unit diagonal
    norm = max(operator_norm(matrix), 1.0)
    return MixingProfile(gamma_matrix=matrix.tolist(), operator_norm=norm, tau=norm**2)


def prop5_bound(mu0_mass: float, r: int) -> float:
    """sqrt(2) / (1 - rho^(1/(2r))) with rho = 1 - mu0_mass."""
    if not 0.0 < mu0_mass <= 1.0:
        raise ValueError(f"mu0_mass must lie in (0, 1], got {mu0_mass}")
    if r < 1:
        raise ValueError(f"r must be a positive integer, got {r}")
    return math.sqrt(2.0) / (1.0 - (1.0 - mu0_mass) ** (1.0 / (2.0 * r)))


def trajectory_tau_bound(trajectory_length: int) -> float:
    """tau <= h^2 for independent trajectories of length h."""
    if trajectory_length < 1:
        raise ValueError("trajectory_length must be at least 1")
    return float(trajectory_length**2)


def trajectory_block_norm(trajectory_length: int) -> float:
    """Exact norm of the h x h upper-triangular all-ones block."""
    if trajectory_length < 1:
        raise ValueError("trajectory_length must be at least 1")
    return 1.0 / (2.0 * math.sin(math.pi / (4.0 * trajectory_length + 2.0)))


def trajectory_gamma_matrix(count: int, trajectory_length: int) -> np.ndarray:
    """Worst-case dependence matrix of `count` independent trajectories."""
    assert count >= 1, "count must be at least 1"
    block = np.triu(np.ones((trajectory_length, trajectory_length)))
    return linalg.block_diag(*([block] * count))


def check_irreducible(chain: FiniteChain):
    graph = sparse.csr_matrix(chain.kernel() > 0.0)
    components, _ = csgraph.connected_components(graph, directed=True, connection="strong")
    if components > 1:
        raise ChainError(f"chain is not irreducible ({components} communicating classes)")


def stationary_distribution(chain: FiniteChain) -> np.ndarray:
    """Leading left eigenvector of P, normalised to a probability vector."""
    check_irreducible(chain)
    values, vectors = linalg.eig(chain.kernel().T)
    leading = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
    leading = np.clip(leading / leading.sum(), 0.0, None)
    return leading / leading.sum()


def minorization_mass(chain: FiniteChain, r: int = 1) -> float:
    """Mass of the largest measure nu with P^r(.|x) >= nu for every x."""
    if r < 1:
        raise ValueError("r must be at least 1")
    power = np.linalg.matrix_power(chain.kernel(), r)
    return float(power.min(axis=0).sum())


def exact_value_finite_chain(chain: FiniteChain) -> np.ndarray:
    """Solves (I - gamma P) V = r."""
    kernel, rewards = chain.kernel(), chain.rewards()
    try:
        values = linalg.solve(np.eye(chain.size) - chain.gamma * kernel, rewards)
    except linalg.LinAlgError as e:
        raise NumericalError(f"(I - gamma P) is singular: {e}")

    residual = np.abs(rewards + chain.gamma * kernel @ values - values).max()
    if residual > VALUE_RESIDUAL_TOLERANCE * max(1.0, float(np.abs(values).max())):
        raise NumericalError(f"Bellman identity residual {residual:.3g} too large")
    return values


def mixing_report(
    chain: FiniteChain, n: int, mass: float | None = None, steps: int = 1
) -> MixingReport:
    """Gamma_n summary; the Prop-5 style bound is included when a mass is known."""
    lags = mixing_lags(chain, n)
    norm = max(operator_norm(upper_toeplitz(lags)), 1.0)
    return MixingReport(
        n=n,
        states=chain.size,
        lags=lags.tolist(),
        operator_norm=norm,
        tau=norm**2,
        minorization_mass=mass,
        minorization_steps=steps if mass is not None else None,
        prop5_bound=prop5_bound(mass, steps) if mass is not None else None,
    )


def simulate_chain(
    chain: FiniteChain, start_weights: np.ndarray, n: int, trials: int, seed: int
) -> np.ndarray:
    """State paths of shape (trials, n); trial t uses the t-th spawned stream."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]
    uniforms = np.array([rng.random(n) for rng in streams])
    cumulative = np.cumsum(chain.kernel(), axis=1)
    start_cdf = np.cumsum(start_weights)

    paths = np.empty((trials, n), dtype=int)
    paths[:, 0] = np.minimum((uniforms[:, 0, None] >= start_cdf).sum(axis=1), chain.size - 1)
    for t in range(1, n):
        rows = cumulative[paths[:, t - 1]]
        paths[:, t] = np.minimum((uniforms[:, t, None] >= rows).sum(axis=1), chain.size - 1)
    return paths


def _tail_bound(epsilon: float, n: int, scale: float) -> float:
    if epsilon == 0.0:
        return 1.0
    if scale == 0.0:
        return 0.0
    return math.exp(-(epsilon**2) * n / scale)


def verify_theorem6(
    chain: FiniteChain,
    f,
    n: int,
    epsilon: float,
    trials: int,
    seed: int,
    bound: float | None = None,
) -> Theorem6Report:
    """Empirical tail frequencies of Z = mean f(X_i) against the analytic tails.

    The chain starts from its stationary distribution, so E[Z] = pi . f.
    """
    if trials < 100:
        raise ValueError(f"trials must be at least 100, got {trials}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if epsilon < 0:
        raise ValueError(f"epsilon cannot be negative, got {epsilon}")
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.size,):
        raise ValueError(f"f needs one value per state ({chain.size})")
    bound_b = float(f.max()) if bound is None else bound
    if f.min() < 0 or f.max() > bound_b:
        raise ValueError(f"f must take values in [0, {bound_b}]")

    pi = stationary_distribution(chain)
    expected = float(pi @ f)
    norm = max(operator_norm(upper_toeplitz(mixing_lags(chain, n))), 1.0)

    z = f[simulate_chain(chain, pi, n, trials, seed)].mean(axis=1)
    scale = 2.0 * bound_b * norm**2
    return Theorem6Report(
        n=n,
        epsilon=epsilon,
        trials=trials,
        seed=seed,
        bound_b=bound_b,
        expected_z=expected,
        gamma_norm=norm,
        upper_frequency=float(np.mean(z - expected >= epsilon)),
        lower_frequency=float(np.mean(expected - z >= epsilon)),
        upper_bound=_tail_bound(epsilon, n, scale * (expected + epsilon)),
        lower_bound=_tail_bound(epsilon, n, scale * expected),
    )

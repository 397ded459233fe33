"""Ground truth for evaluating estimates: rollout values of V^pi, exact
posterior-averaged errors, point-estimate distributions, and a bound validity
simulation on finite chains."""

import math

import numpy as np

from core.bellman import build_residuals, chain_noise_model, lstd_solve
from core.errors import DimensionMismatchError
from core.features import FeatureMap, TabularFeatures
from core.measures import prior_measure
from core.mixing import exact_value_finite_chain, stationary_distribution
from core.pacbayes import derive_constants, select_lambda
from core.transfer import METHODS, TransferSetup, fit_run
from envs.base import Environment, collect_trajectories
from envs.finite_chain import sample_chain_transitions
from envs.mountain_car import MountainCarEnv, bottom_of_hill_state
from models import (
    FiniteChain,
    GaussianProductMeasure,
    GroundTruth,
    MountainCarVariant,
    PointEstimates,
    PosteriorFamilyConfig,
    ValidityReport,
)
from policies import Policy

TRUNCATION_TOLERANCE = 1e-4
STOCHASTIC_ROLLOUTS = 100


def horizon_for_tolerance(gamma: float, r_max: float, tol: float = TRUNCATION_TOLERANCE) -> int:
    """Smallest H with gamma^H R_max / (1 - gamma) <= tol."""
    assert tol > 0, "tol must be positive"
    if r_max <= 0 or gamma == 0.0:
        return 1
    return max(1, math.ceil(math.log(tol * (1.0 - gamma) / r_max) / math.log(gamma)))


def _as_environment(env) -> Environment:
    return MountainCarEnv(env) if isinstance(env, MountainCarVariant) else env


def estimate_v_pi_batch(
    env, policy: Policy, states, horizon: int, rollouts: int, seed: int
) -> np.ndarray:
    """Truncated discounted returns averaged over `rollouts`, one value per state.

    State i draws its transition noise from the i-th child of SeedSequence(seed).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    assert rollouts >= 1, "rollouts must be at least 1"
    env = _as_environment(env)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    count = len(states)

    current = np.repeat(states, rollouts, axis=0)
    uniforms = None
    if not env.deterministic:
        streams = np.random.SeedSequence(seed).spawn(count)
        uniforms = np.concatenate(
            [np.random.default_rng(s).random((rollouts, horizon)) for s in streams]
        )

    returns = np.zeros(len(current))
    discount = 1.0
    for t in range(horizon):
        actions = policy.act_batch(current)
        current, rewards = env.step_batch(
            current, actions, None if uniforms is None else uniforms[:, t]
        )
        returns += discount * rewards
        discount *= env.gamma
    return returns.reshape(count, rollouts).mean(axis=1)


def estimate_v_pi(env, policy: Policy, state, horizon: int, rollouts: int, seed: int) -> float:
    return float(estimate_v_pi_batch(env, policy, [state], horizon, rollouts, seed)[0])


def build_ground_truth(
    env: Environment,
    policy: Policy,
    eval_trajectories: int,
    trajectory_length: int,
    seed: int,
    tol: float = TRUNCATION_TOLERANCE,
) -> GroundTruth:
    """Held-out states from the training rollout scheme with V^pi estimates."""
    batch = collect_trajectories(env, policy, eval_trajectories, trajectory_length, seed)
    horizon = horizon_for_tolerance(env.gamma, env.reward_max, tol)
    rollouts = 1 if env.deterministic else STOCHASTIC_ROLLOUTS
    values = estimate_v_pi_batch(env, policy, batch.states, horizon, rollouts, seed + 1)
    return GroundTruth(
        eval_states=batch.states.tolist(),
        v_pi=values.tolist(),
        rollout_horizon=horizon,
        rollouts_per_state=rollouts,
    )


def _check_dims(mu: GaussianProductMeasure, features: FeatureMap):
    if mu.dim != features.dimension:
        raise DimensionMismatchError(
            f"measure has dimension {mu.dim}, features {features.dimension}"
        )


def true_error_under_mu(
    mu: GaussianProductMeasure, ground_truth: GroundTruth, features: FeatureMap
) -> float:
    """Average over eval states of E_{theta ~ mu}[(phi . theta - V^pi)^2]."""
    _check_dims(mu, features)
    phi = features.transform(ground_truth.states_array())
    bias = phi @ mu.mean_array() - ground_truth.values_array()
    spread = phi.multiply(phi) @ mu.variance_array()
    return float(np.mean(bias**2 + spread))


def mean_function_error(
    mu: GaussianProductMeasure, ground_truth: GroundTruth, features: FeatureMap
) -> float:
    """Error of the mean-parameter value function alone."""
    _check_dims(mu, features)
    phi = features.transform(ground_truth.states_array())
    return float(np.mean((phi @ mu.mean_array() - ground_truth.values_array()) ** 2))


def point_estimate_table(setup: TransferSetup, runs: int, seed: int) -> dict[str, PointEstimates]:
    """Mean-parameter value at the bottom of the hill for every method.

    Run i uses seed + i and is fitted once; all methods read their measure
    from the same fit.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")

    state = bottom_of_hill_state()[None, :]
    seeds = [seed + i for i in range(runs)]
    values = {method: [] for method in METHODS}
    for run_seed in seeds:
        fit = fit_run(setup, run_seed)
        for method in METHODS:
            mean = fit.measures[method].mean_array()
            values[method].append(float(setup.features.values(mean, state)[0]))
    return {
        method: PointEstimates(method=method, values=values[method], seeds=seeds)
        for method in METHODS
    }


def point_estimate_distribution(
    setup: TransferSetup, method: str, runs: int, seed: int
) -> PointEstimates:
    """Point estimates of a single method; see point_estimate_table."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return point_estimate_table(setup, runs, seed)[method]


def bound_failure_rate(
    chain: FiniteChain,
    n: int,
    delta: float,
    draws: int,
    seed: int,
    sigma0_sq: float = 0.01,
    sigma_hat_sq: float = 0.01,
    prior_mean=None,
    grid_step: float = 0.05,
) -> ValidityReport:
    """Repeatedly draws n i.i.d. stationary transitions, certifies the selected
    posterior and compares against its exact error.

    Tabular features make every value function representable, so the truth
    sum_x rho(x) [(m_x - V^pi(x))^2 + var_x] is exact.
    """
    assert draws >= 1, "draws must be at least 1"
    rho = stationary_distribution(chain)
    v_pi = exact_value_finite_chain(chain)
    features = TabularFeatures(chain.size)
    phi = np.eye(chain.size)
    noise = chain_noise_model(chain, phi, rho)
    prior = np.zeros(chain.size) if prior_mean is None else np.asarray(prior_mean, dtype=float)
    # i.i.d. samples: Gamma_n = I
    constants = derive_constants(n=n, delta=delta, gamma=chain.gamma, r_max=chain.reward_max, tau=1.0)

    failures = 0
    max_truth, min_bound = 0.0, math.inf
    streams = np.random.SeedSequence(seed).spawn(draws)
    for stream in streams:
        batch = sample_chain_transitions(chain, n, np.random.default_rng(stream), rho)
        residuals = build_residuals(batch, features, chain.gamma)
        family = PosteriorFamilyConfig(
            prior_mean=prior.tolist(),
            prior_variance=sigma0_sq,
            empirical_mean=lstd_solve(residuals).tolist(),
            empirical_variance=sigma_hat_sq,
        )
        _, mu, certificate = select_lambda(
            family, prior_measure(family), residuals, noise, constants, grid_step
        )
        truth = float(rho @ ((mu.mean_array() - v_pi) ** 2 + mu.variance_array()))
        failures += certificate.bound_value < truth
        max_truth = max(max_truth, truth)
        min_bound = min(min_bound, certificate.bound_value)

    return ValidityReport(
        draws=draws,
        failures=int(failures),
        delta=delta,
        n=n,
        max_truth=max_truth,
        min_bound=min_bound,
    )

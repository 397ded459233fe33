"""
Tests for ground-truth values, true errors and point-estimate distributions
"""

import numpy as np
import pytest

from agents.bang_bang import BangBangPolicy
from agents.passive import PassivePolicy
from core.errors import DimensionMismatchError
from core.features import TabularFeatures, TileCoder
from core.mixing import exact_value_finite_chain
from core.oracle import (
    bound_failure_rate,
    build_ground_truth,
    estimate_v_pi,
    estimate_v_pi_batch,
    horizon_for_tolerance,
    mean_function_error,
    point_estimate_distribution,
    point_estimate_table,
    true_error_under_mu,
)
from core.transfer import TransferSetup
from envs.finite_chain import FiniteChainEnv
from envs.mountain_car import MountainCarEnv, default_tile_config
from models import (
    ExperimentManifest,
    FiniteChain,
    GaussianProductMeasure,
    GroundTruth,
    MountainCarVariant,
    VariantTag,
)

FIVE_STATE = FiniteChain(
    P=[
        [0.5, 0.2, 0.1, 0.1, 0.1],
        [0.1, 0.5, 0.2, 0.1, 0.1],
        [0.1, 0.1, 0.5, 0.2, 0.1],
        [0.1, 0.1, 0.1, 0.5, 0.2],
        [0.2, 0.1, 0.1, 0.1, 0.5],
    ],
    r=[0.0, 0.25, 0.5, 0.75, 1.0],
    gamma=0.5,
)


def tabular_truth(values):
    return GroundTruth(
        eval_states=[[float(i)] for i in range(len(values))],
        v_pi=list(values),
        rollout_horizon=10,
        rollouts_per_state=1,
    )


def small_setup(**overrides) -> TransferSetup:
    fields = dict(
        variant="doubled_acceleration",
        trajectories=20,
        trajectory_length=5,
        grid_step=0.25,
        runs=2,
        c1=0.01,
        eval_trajectories=10,
    )
    fields.update(overrides)
    manifest = ExperimentManifest(**fields)
    env = MountainCarEnv(MountainCarVariant(tag=manifest.variant, gamma=manifest.gamma))
    features = TileCoder(default_tile_config())
    return TransferSetup(manifest, env, BangBangPolicy(), features, np.zeros(features.dimension))


def test_horizon_for_tolerance():
    """Test the gamma = 0.9 hand value and trivial cases."""
    assert horizon_for_tolerance(0.9, 1.0) == 110
    assert 0.9**110 * 1.0 / 0.1 <= 1e-4
    assert 0.9**109 * 1.0 / 0.1 > 1e-4
    assert horizon_for_tolerance(0.9, 0.0) == 1


def test_zero_reward_chain_has_zero_value():
    """Test that a rewardless chain evaluates to 0."""
    env = FiniteChainEnv(FiniteChain(P=[[0.5, 0.5], [0.5, 0.5]], r=[0.0, 0.0]))
    assert estimate_v_pi(env, PassivePolicy(), [0.0], 50, 10, seed=0) == 0.0


def test_deterministic_variant_ignores_seed():
    """Test identical values for different seeds on Mountain Car."""
    variant = MountainCarVariant(tag=VariantTag.ALTITUDE_REWARD)
    a = estimate_v_pi(variant, BangBangPolicy(), [-0.5, 0.0], 110, 1, seed=0)
    b = estimate_v_pi(variant, BangBangPolicy(), [-0.5, 0.0], 110, 1, seed=99)
    assert a == b
    assert 0.0 < a < 10.0


def test_horizon_precondition():
    """Test that a zero horizon is rejected."""
    with pytest.raises(ValueError):
        estimate_v_pi(MountainCarVariant(), BangBangPolicy(), [-0.5, 0.0], 0, 1, seed=0)


def test_truncation_control():
    """Test that extending the horizon by 20 changes values by less than the tail bound."""
    variant = MountainCarVariant(tag=VariantTag.ALTITUDE_REWARD)
    states = np.array([[-0.5, 0.0], [0.2, 0.03], [-1.1, -0.01]])
    horizon = horizon_for_tolerance(0.9, 1.0)
    base = estimate_v_pi_batch(variant, BangBangPolicy(), states, horizon, 1, seed=0)
    longer = estimate_v_pi_batch(variant, BangBangPolicy(), states, horizon + 20, 1, seed=0)

    assert np.all(np.abs(longer - base) < 0.9**horizon / 0.1)


def test_rollouts_agree_with_exact_chain_values():
    """Test Monte Carlo V^pi on a finite chain against the linear solve."""
    env = FiniteChainEnv(FIVE_STATE)
    states = np.arange(5, dtype=float)[:, None]
    horizon = horizon_for_tolerance(FIVE_STATE.gamma, FIVE_STATE.reward_max)
    estimates = estimate_v_pi_batch(env, PassivePolicy(), states, horizon, 4000, seed=1)

    assert estimates == pytest.approx(exact_value_finite_chain(FIVE_STATE), abs=0.08)


def test_build_ground_truth():
    """Test held-out states, horizon and rollout count bookkeeping."""
    env = MountainCarEnv(MountainCarVariant(tag=VariantTag.ORIGINAL))
    truth = build_ground_truth(env, BangBangPolicy(), 8, 5, seed=3)

    assert len(truth.eval_states) == 40
    assert truth.rollout_horizon == 110
    assert truth.rollouts_per_state == 1

    stochastic = build_ground_truth(FiniteChainEnv(FIVE_STATE), PassivePolicy(), 4, 2, seed=3)
    assert stochastic.rollouts_per_state > 1


def test_true_error_vanishes_at_exact_fit():
    """Test zero error for a near-point measure centred on V^pi."""
    values = [1.0, 2.0, 3.0]
    mu = GaussianProductMeasure.isotropic(values, 1e-14)
    assert true_error_under_mu(mu, tabular_truth(values), TabularFeatures(3)) == pytest.approx(0.0, abs=1e-12)


def test_true_error_matches_monte_carlo():
    """Test the closed form against 10^5 parameter draws."""
    rng = np.random.default_rng(0)
    features = TileCoder(default_tile_config(tilings=2, tiles_per_dim=4))
    states = rng.uniform([-1.2, -0.07], [0.6, 0.07], size=(200, 2))
    truth = GroundTruth(
        eval_states=states.tolist(), v_pi=rng.uniform(0, 5, 200).tolist(),
        rollout_horizon=110, rollouts_per_state=1,
    )
    phi = features.transform(states).toarray()
    for _ in range(4):
        mu = GaussianProductMeasure(
            mean=rng.normal(1.0, 1.0, features.dimension).tolist(),
            variance=rng.uniform(0.01, 0.5, features.dimension).tolist(),
        )
        draws = mu.sample(rng, 100_000)
        # per-draw error = theta^T Q theta - 2 l . theta + c
        quadratic = phi.T @ phi / len(states)
        linear = phi.T @ truth.values_array() / len(states)
        errors = (
            np.einsum("ij,jk,ik->i", draws, quadratic, draws)
            - 2.0 * draws @ linear
            + np.mean(truth.values_array() ** 2)
        )
        closed = true_error_under_mu(mu, truth, features)

        assert closed == pytest.approx(errors.mean(), rel=0.01)
        assert abs(closed - errors.mean()) <= 3 * errors.std() / np.sqrt(len(errors))


def test_mean_function_error_never_exceeds_true_error():
    """Test the Jensen direction on random measures."""
    rng = np.random.default_rng(1)
    truth = tabular_truth(rng.uniform(0, 2, 6).tolist())
    for _ in range(20):
        mu = GaussianProductMeasure(
            mean=rng.normal(0, 1, 6).tolist(), variance=rng.uniform(0.001, 1.0, 6).tolist()
        )
        assert mean_function_error(mu, truth, TabularFeatures(6)) <= true_error_under_mu(
            mu, truth, TabularFeatures(6)
        )


def test_true_error_is_permutation_invariant():
    """Test that reordering eval states leaves the error unchanged."""
    values = [0.5, 1.5, 2.5, 3.5]
    mu = GaussianProductMeasure(mean=[0.0, 1.0, 2.0, 3.0], variance=[0.1, 0.2, 0.3, 0.4])
    shuffled = GroundTruth(
        eval_states=[[3.0], [1.0], [0.0], [2.0]], v_pi=[3.5, 1.5, 0.5, 2.5],
        rollout_horizon=10, rollouts_per_state=1,
    )
    assert true_error_under_mu(mu, tabular_truth(values), TabularFeatures(4)) == pytest.approx(
        true_error_under_mu(mu, shuffled, TabularFeatures(4)), rel=1e-14
    )


def test_true_error_dimension_check():
    """Test that measure and features must agree."""
    with pytest.raises(DimensionMismatchError):
        true_error_under_mu(GaussianProductMeasure.isotropic([0.0] * 2, 1.0), tabular_truth([1.0] * 3), TabularFeatures(3))


def test_point_estimates_are_reproducible():
    """Test fixed-seed point estimates and provenance seeds."""
    setup = small_setup()
    first = point_estimate_distribution(setup, "empirical", 2, seed=5)
    second = point_estimate_distribution(setup, "empirical", 2, seed=5)

    assert first.values == second.values
    assert first.seeds == [5, 6]


def test_single_run_has_zero_std():
    """Test the runs = 1 convention."""
    estimates = point_estimate_distribution(small_setup(), "pacbayes", 1, seed=0)
    assert len(estimates.values) == 1
    assert estimates.std == 0.0


def test_point_estimate_table_fits_each_run_once(monkeypatch):
    """Test one fit per run shared by all three methods."""
    import core.oracle

    calls = []
    original = core.oracle.fit_run

    def counting_fit(setup, seed):
        calls.append(seed)
        return original(setup, seed)

    monkeypatch.setattr(core.oracle, "fit_run", counting_fit)
    table = point_estimate_table(small_setup(), 2, seed=7)

    assert calls == [7, 8]
    assert set(table) == {"empirical", "bayes", "pacbayes"}
    assert all(estimates.seeds == [7, 8] for estimates in table.values())

    monkeypatch.setattr(core.oracle, "fit_run", original)
    assert point_estimate_distribution(small_setup(), "bayes", 2, seed=7) == table["bayes"]


def test_point_estimates_unknown_method():
    """Test method validation."""
    with pytest.raises(ValueError):
        point_estimate_distribution(small_setup(), "bootstrap", 1, seed=0)


def test_bayes_estimate_is_shrunk_toward_prior():
    """Test that with a zero prior the Bayes mean halves the empirical value."""
    setup = small_setup()
    empirical = point_estimate_distribution(setup, "empirical", 1, seed=3).values[0]
    bayes = point_estimate_distribution(setup, "bayes", 1, seed=3).values[0]
    assert bayes == pytest.approx(empirical / 2.0)


def test_bound_failure_rate_small():
    """Test that the certificate rarely falls below the exact error."""
    report = bound_failure_rate(FIVE_STATE, n=2000, delta=0.1, draws=40, seed=0)

    assert report.draws == 40
    assert report.failure_rate <= report.allowed_rate
    assert report.min_bound >= 0.0


@pytest.mark.slow
def test_bound_failure_rate_thousand_draws():
    """Test certificate validity over 1000 datasets at delta = 0.1."""
    report = bound_failure_rate(FIVE_STATE, n=2000, delta=0.1, draws=1000, seed=1)
    assert report.allowed_rate == pytest.approx(0.1 + 3 * np.sqrt(0.1 * 0.9 / 1000))
    assert report.failure_rate <= report.allowed_rate

import numpy as np

from core.errors import PolicyTrainingError
from core.features import TileCoder, active_tiles
from envs.mountain_car import (
    GOAL_POSITION,
    STATE_HIGHS,
    STATE_LOWS,
    mc_step,
)
from models import MountainCarVariant, TileCodingConfig
from policies import ACTIONS, Policy

# Sutton & Barto style control setup: -1 per step until the goal, no discount,
# zero (optimistic) initial weights, step size alpha / tilings.
CONTROL_TILINGS = 8
CONTROL_TILES_PER_DIM = 8
CONTROL_ALPHA = 0.5
MAX_EPISODE_STEPS = 5000
CHECK_START = (-0.5, 0.0)
CHECK_STEP_LIMIT = 500


class GreedyQPolicy(Policy):
    """Greedy policy of a tile-coded action-value table."""

    name = "q_learning"

    def __init__(self, weights: np.ndarray, cfg: TileCodingConfig):
        assert weights.shape == (len(ACTIONS), cfg.dimension), "weights shape mismatch"
        self.weights = weights
        self.cfg = cfg
        self._coder = TileCoder(cfg)

    def action_values(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(self._coder.transform(states) @ self.weights.T)

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(ACTIONS)[np.argmax(self.action_values(states), axis=1)]


def steps_to_goal(
    policy: Policy, variant: MountainCarVariant, start=CHECK_START, limit=CHECK_STEP_LIMIT
) -> int | None:
    """Number of steps until the goal is reached, or None within `limit`."""
    state = np.asarray(start, dtype=float)
    for step in range(1, limit + 1):
        state, _ = mc_step(state, policy.act(state), variant)
        if state[0] >= GOAL_POSITION:
            return step
    return None


def learn_policy_q(
    variant: MountainCarVariant, episodes: int, seed: int
) -> GreedyQPolicy:
    """Tile-coded Q-learning; raises if the greedy policy cannot reach the goal."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")

    rng = np.random.default_rng(seed)
    cfg = TileCodingConfig(
        state_lows=list(STATE_LOWS),
        state_highs=list(STATE_HIGHS),
        tilings=CONTROL_TILINGS,
        tiles_per_dim=CONTROL_TILES_PER_DIM,
    )
    weights = np.zeros((len(ACTIONS), cfg.dimension))
    step_size = CONTROL_ALPHA / CONTROL_TILINGS

    for _ in range(episodes):
        state = np.array([rng.uniform(-0.6, -0.4), 0.0])
        tiles = active_tiles(state, cfg)[0]
        for _ in range(MAX_EPISODE_STEPS):
            q = weights[:, tiles].sum(axis=1)
            choice = int(rng.choice(np.flatnonzero(q == q.max())))
            next_state, _ = mc_step(state, ACTIONS[choice], variant)

            done = next_state[0] >= GOAL_POSITION
            target = -1.0
            if not done:
                next_tiles = active_tiles(next_state, cfg)[0]
                target += weights[:, next_tiles].sum(axis=1).max()
            weights[choice, tiles] += step_size * (target - q[choice])

            if done:
                break
            state, tiles = next_state, next_tiles

    policy = GreedyQPolicy(weights, cfg)
    if steps_to_goal(policy, variant) is None:
        raise PolicyTrainingError(
            f"greedy policy did not reach the goal from {CHECK_START} "
            f"within {CHECK_STEP_LIMIT} steps after {episodes} episodes"
        )
    return policy

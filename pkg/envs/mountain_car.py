"""Mountain Car dynamics with the original, doubled-acceleration and
altitude-reward variants.

Episodes never terminate: at the right wall the position clamps to the goal
and every step that ends there pays the goal reward.
"""

import math

import numpy as np
from scipy.optimize import minimize_scalar

from envs.base import Environment, validate_actions
from models import MountainCarVariant, TileCodingConfig, VariantTag

POSITION_MIN, POSITION_MAX = -1.2, 0.6
VELOCITY_MIN, VELOCITY_MAX = -0.07, 0.07
GOAL_POSITION = POSITION_MAX
FORCE = 0.001
GRAVITY = 0.0025

STATE_LOWS = (POSITION_MIN, VELOCITY_MIN)
STATE_HIGHS = (POSITION_MAX, VELOCITY_MAX)


def _locate_altitude_extrema() -> tuple[float, float, float]:
    """(argmin position, min, max) of sin(3p) over the position range."""
    mesh = np.linspace(POSITION_MIN, POSITION_MAX, 100_001)
    heights = np.sin(3.0 * mesh)
    i = int(np.argmin(heights))
    refined = minimize_scalar(
        lambda p: math.sin(3.0 * p),
        bounds=(mesh[max(i - 1, 0)], mesh[min(i + 1, len(mesh) - 1)]),
        method="bounded",
        options={"xatol": 1e-12},
    )
    bottom = float(refined.x)
    return bottom, min(float(refined.fun), float(heights[i])), float(heights.max())


BOTTOM_POSITION, ALTITUDE_MIN, ALTITUDE_MAX = _locate_altitude_extrema()


def normalized_altitude(position):
    """h in [0, 1]: sin(3p) rescaled by its extrema over the track."""
    raw = np.sin(3.0 * np.asarray(position, dtype=float))
    h = np.clip((raw - ALTITUDE_MIN) / (ALTITUDE_MAX - ALTITUDE_MIN), 0.0, 1.0)
    return float(h) if np.ndim(h) == 0 else h


def bottom_of_hill_state() -> np.ndarray:
    return np.array([BOTTOM_POSITION, 0.0])


def mc_step_batch(states: np.ndarray, actions: np.ndarray, variant: MountainCarVariant):
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions)
    validate_actions(actions)
    position, velocity = states[:, 0], states[:, 1]

    velocity = np.clip(
        velocity
        + variant.accel_scale * FORCE * actions
        - GRAVITY * np.cos(3.0 * position),
        VELOCITY_MIN,
        VELOCITY_MAX,
    )
    position = np.clip(position + velocity, POSITION_MIN, POSITION_MAX)
    velocity = np.where(position <= POSITION_MIN, 0.0, velocity)

    if variant.tag == VariantTag.ALTITUDE_REWARD:
        rewards = variant.reward_max * (1.0 - normalized_altitude(position))
    else:
        rewards = variant.reward_max * (position >= GOAL_POSITION).astype(float)
    return np.column_stack([position, velocity]), np.asarray(rewards, dtype=float)


def mc_step(state, action: int, variant: MountainCarVariant) -> tuple[np.ndarray, float]:
    next_states, rewards = mc_step_batch(
        np.asarray(state, dtype=float)[None, :], np.asarray([action]), variant
    )
    return next_states[0], float(rewards[0])


def default_tile_config(tilings: int = 4, tiles_per_dim: int = 8) -> TileCodingConfig:
    return TileCodingConfig(
        state_lows=list(STATE_LOWS),
        state_highs=list(STATE_HIGHS),
        tilings=tilings,
        tiles_per_dim=tiles_per_dim,
    )


class MountainCarEnv(Environment):
    state_names = ("pos", "vel")
    deterministic = True
    generative = True

    def __init__(self, variant: MountainCarVariant):
        self.variant = variant
        self.gamma = variant.gamma
        self.reward_max = variant.reward_max

    def step_batch(self, states, actions, uniforms=None):
        return mc_step_batch(states, actions, self.variant)

    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(STATE_LOWS, STATE_HIGHS)

    def describe(self) -> str:
        return f"mountain_car:{self.variant.tag.value}:gamma={self.gamma}"

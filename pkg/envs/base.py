from abc import ABC, abstractmethod

import numpy as np

from models import TransitionBatch
from policies import ACTIONS, Policy


class Environment(ABC):
    """Episodic-free simulator with vectorised stepping.

    Stochastic environments consume one uniform draw per transition, passed in
    by the caller so every trajectory can own its random stream.
    """

    state_names: tuple[str, ...] = ("pos", "vel")
    gamma: float = 0.9
    reward_max: float = 1.0
    deterministic: bool = True
    generative: bool = True

    @abstractmethod
    def step_batch(
        self, states: np.ndarray, actions: np.ndarray, uniforms: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Returns (next_states, rewards) for a batch of transitions."""
        pass

    @abstractmethod
    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        pass

    @abstractmethod
    def describe(self) -> str:
        pass

    def step(self, state, action: int, rng: np.random.Generator | None = None):
        uniforms = None if rng is None else rng.random(1)
        next_states, rewards = self.step_batch(
            np.asarray(state, dtype=float)[None, :], np.asarray([action]), uniforms
        )
        return next_states[0], float(rewards[0])


def validate_actions(actions: np.ndarray):
    if not np.isin(actions, ACTIONS).all():
        bad = actions[~np.isin(actions, ACTIONS)][0]
        raise ValueError(f"invalid action {bad}; expected one of {ACTIONS}")


def collect_trajectories(
    env: Environment, policy: Policy, count: int, length: int, seed: int
) -> TransitionBatch:
    """`count` independent on-policy rollouts of exactly `length` transitions.

    Trajectory i draws its start state and its transition noise from the i-th
    child of SeedSequence(seed), so output is fixed by (seed, index).
    """
    assert count >= 1, "count must be at least 1"
    assert length >= 1, "length must be at least 1"

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]
    starts = np.array([env.sample_start(rng) for rng in streams], dtype=float)
    uniforms = np.array([rng.random(length) for rng in streams])

    dims = starts.shape[1]
    states = np.empty((count, length, dims))
    next_states = np.empty((count, length, dims))
    actions = np.empty((count, length), dtype=int)
    rewards = np.empty((count, length))

    current = starts
    for t in range(length):
        chosen = policy.act_batch(current)
        following, reward = env.step_batch(current, chosen, uniforms[:, t])
        states[:, t] = current
        actions[:, t] = chosen
        next_states[:, t] = following
        rewards[:, t] = reward
        current = following

    return TransitionBatch(
        states=states.reshape(-1, dims),
        actions=actions.ravel(),
        rewards=rewards.ravel(),
        next_states=next_states.reshape(-1, dims),
        trajectory_ids=np.repeat(np.arange(count), length),
        step_indices=np.tile(np.arange(length), count),
        state_names=env.state_names,
    )

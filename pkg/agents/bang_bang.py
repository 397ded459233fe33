import numpy as np

from policies import Policy


class BangBangPolicy(Policy):
    """Accelerate in the direction of motion; forward when standing still."""

    name = "bang_bang"

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        velocity = np.asarray(states, dtype=float)[:, 1]
        return np.where(velocity >= 0.0, 1, -1)


def bang_bang_policy(state) -> int:
    return BangBangPolicy().act(state)

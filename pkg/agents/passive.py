import numpy as np

from policies import Policy


class PassivePolicy(Policy):
    """Always coasts; used for Markov reward processes where actions are ignored."""

    name = "passive"

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.zeros(len(states), dtype=int)

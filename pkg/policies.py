from abc import ABC, abstractmethod

import numpy as np

# Actions shared by every built-in environment: reverse, coast, forward.
ACTIONS = (-1, 0, 1)


class Policy(ABC):
    """Abstract base class for fixed evaluation policies."""

    name: str = "policy"

    @abstractmethod
    def act_batch(self, states: np.ndarray) -> np.ndarray:
        """Returns one action per row of `states`."""
        pass

    def act(self, state) -> int:
        return int(self.act_batch(np.asarray(state, dtype=float)[None, :])[0])

    def __call__(self, state) -> int:
        return self.act(state)

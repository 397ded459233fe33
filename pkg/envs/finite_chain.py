import numpy as np

from envs.base import Environment
from models import FiniteChain, TransitionBatch


def _inverse_cdf(cumulative: np.ndarray, states: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    rows = cumulative[states]
    next_states = (uniforms[:, None] >= rows).sum(axis=1)
    return np.minimum(next_states, cumulative.shape[1] - 1)


class FiniteChainEnv(Environment):
    """A Markov reward process seen as an environment; actions are ignored.

    States are stored as one-component float rows holding the state index.
    The reward of a transition is r(x) of the state it leaves.
    """

    state_names = ("state",)
    generative = True

    def __init__(self, chain: FiniteChain):
        self.chain = chain
        self.gamma = chain.gamma
        self.reward_max = chain.reward_max
        kernel = chain.kernel()
        self.deterministic = bool(np.all((kernel == 0.0) | (kernel == 1.0)))
        self._cumulative = np.cumsum(kernel, axis=1)
        self._rewards = chain.rewards()

    def step_batch(self, states, actions, uniforms=None):
        index = np.asarray(states).reshape(len(states), -1)[:, 0].astype(int)
        if uniforms is None:
            if not self.deterministic:
                raise ValueError("stochastic chain needs uniform draws to step")
            uniforms = np.zeros(len(index))
        next_index = _inverse_cdf(self._cumulative, index, np.asarray(uniforms, dtype=float))
        return next_index[:, None].astype(float), self._rewards[index]

    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([float(rng.integers(self.chain.size))])

    def describe(self) -> str:
        return f"finite_chain:{self.chain.size}:gamma={self.gamma}"


def sample_chain_transitions(
    chain: FiniteChain, n: int, rng: np.random.Generator, weights: np.ndarray | None = None
) -> TransitionBatch:
    """n independent transitions with X_i ~ weights (uniform by default).

    Each transition is its own length-1 trajectory, so the sample is i.i.d.
    """
    assert n >= 1, "n must be at least 1"
    weights = np.full(chain.size, 1.0 / chain.size) if weights is None else weights
    states = rng.choice(chain.size, size=n, p=weights)
    cumulative = np.cumsum(chain.kernel(), axis=1)
    next_states = _inverse_cdf(cumulative, states, rng.random(n))
    return TransitionBatch(
        states=states[:, None].astype(float),
        actions=np.zeros(n, dtype=int),
        rewards=chain.rewards()[states],
        next_states=next_states[:, None].astype(float),
        trajectory_ids=np.arange(n),
        step_indices=np.zeros(n, dtype=int),
        state_names=("state",),
    )

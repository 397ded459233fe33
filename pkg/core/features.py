from abc import ABC, abstractmethod

import numpy as np
from scipy import sparse

from core.errors import DimensionMismatchError
from models import LinearValueFunction, TileCodingConfig


class FeatureMap(ABC):
    """Maps batches of states to sparse feature rows."""

    @property
    @abstractmethod
    def dimension(self) -> int:
        pass

    @abstractmethod
    def norm_bound(self) -> float:
        """F_max = sup_x ||phi(x)||_2."""
        pass

    @abstractmethod
    def transform(self, states) -> sparse.csr_matrix:
        """Feature matrix of shape (len(states), dimension)."""
        pass

    def values(self, theta, states) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"theta has shape {theta.shape}, features need ({self.dimension},)"
            )
        return self.transform(states) @ theta


def active_tiles(states, cfg: TileCodingConfig) -> np.ndarray:
    """Index of the active tile in every tiling, shape (n, tilings).

    Feature index = tiling * m**D + row-major cell index. States outside the
    box are clamped to it and the top edge falls into the last tile.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[1] != cfg.state_dims:
        raise DimensionMismatchError(
            f"states have {states.shape[1]} components, config expects {cfg.state_dims}"
        )
    lows = np.asarray(cfg.state_lows)
    highs = np.asarray(cfg.state_highs)
    m = cfg.tiles_per_dim

    scaled = (np.clip(states, lows, highs) - lows) / (highs - lows) * m
    # (n, tilings, dims)
    cells = np.floor(scaled[:, None, :] + cfg.offset_array()[None, :, :]).astype(int)
    cells = np.clip(cells, 0, m - 1)

    strides = m ** np.arange(cfg.state_dims - 1, -1, -1)
    flat = cells @ strides
    return flat + np.arange(cfg.tilings) * m**cfg.state_dims


def tile_code(x, cfg: TileCodingConfig) -> np.ndarray:
    """Dense binary feature vector of a single state (exactly k ones)."""
    phi = np.zeros(cfg.dimension)
    phi[active_tiles(np.asarray(x, dtype=float)[None, :], cfg)[0]] = 1.0
    return phi


def feature_norm_bound(cfg: TileCodingConfig) -> float:
    return float(np.sqrt(cfg.tilings))


class TileCoder(FeatureMap):
    def __init__(self, cfg: TileCodingConfig):
        self.cfg = cfg

    @property
    def dimension(self) -> int:
        return self.cfg.dimension

    def norm_bound(self) -> float:
        return feature_norm_bound(self.cfg)

    def transform(self, states) -> sparse.csr_matrix:
        tiles = active_tiles(states, self.cfg)
        n, k = tiles.shape
        return sparse.csr_matrix(
            (np.ones(n * k), tiles.ravel(), np.arange(0, n * k + 1, k)),
            shape=(n, self.dimension),
        )


class TabularFeatures(FeatureMap):
    """One-hot features over the states of a finite chain."""

    def __init__(self, num_states: int):
        assert num_states > 0, "num_states must be positive"
        self.num_states = num_states

    @property
    def dimension(self) -> int:
        return self.num_states

    def norm_bound(self) -> float:
        return 1.0

    def transform(self, states) -> sparse.csr_matrix:
        index = np.asarray(states).reshape(len(states), -1)[:, 0].astype(int)
        if index.size and (index.min() < 0 or index.max() >= self.num_states):
            raise ValueError("state index outside the chain")
        n = len(index)
        return sparse.csr_matrix(
            (np.ones(n), index, np.arange(n + 1)), shape=(n, self.num_states)
        )


def linear_value(vf: LinearValueFunction, states) -> np.ndarray:
    return TileCoder(vf.features).values(vf.theta_array(), states)

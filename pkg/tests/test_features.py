"""
Tests for tile coding and tabular features
"""

import numpy as np
import pytest

from core.errors import DimensionMismatchError
from core.features import (
    TabularFeatures,
    TileCoder,
    active_tiles,
    feature_norm_bound,
    linear_value,
    tile_code,
)
from envs.mountain_car import default_tile_config
from models import LinearValueFunction, TileCodingConfig


def unit_box(tilings=1, tiles_per_dim=4):
    return TileCodingConfig(
        state_lows=[0.0, 0.0], state_highs=[1.0, 1.0], tilings=tilings, tiles_per_dim=tiles_per_dim
    )


def test_index_formula_single_tiling():
    """Test index = row-major cell for one tiling."""
    # scaled (1.2, 2.4) -> cell (1, 2) -> 1 * 4 + 2
    assert active_tiles([[0.3, 0.6]], unit_box()).tolist() == [[6]]


def test_index_formula_offset_tiling():
    """Test that the second tiling is shifted by half a tile and offset by m^D."""
    # tiling 1: (1.7, 2.9) -> cell (1, 2) -> 6 + 16
    assert active_tiles([[0.3, 0.6]], unit_box(tilings=2)).tolist() == [[6, 22]]


def test_top_edge_falls_in_last_tile():
    """Test clamping at the upper boundary and outside the box."""
    cfg = unit_box()
    assert active_tiles([[1.0, 1.0]], cfg).tolist() == [[15]]
    assert active_tiles([[5.0, -3.0]], cfg).tolist() == [[12]]


def test_exactly_k_active_features():
    """Test that every state activates one tile per tiling."""
    cfg = default_tile_config()
    rng = np.random.default_rng(3)
    states = rng.uniform(cfg.state_lows, cfg.state_highs, size=(200, 2))

    phi = TileCoder(cfg).transform(states)
    assert phi.shape == (200, 256)
    assert np.all(np.asarray(phi.sum(axis=1)).ravel() == cfg.tilings)
    assert tile_code(states[0], cfg).sum() == cfg.tilings


def test_norm_bound_is_attained():
    """Test F_max = sqrt(k) for binary tile features."""
    cfg = default_tile_config(tilings=9)
    phi = tile_code([-0.5, 0.0], cfg)
    assert np.linalg.norm(phi) == pytest.approx(feature_norm_bound(cfg))
    assert TileCoder(cfg).norm_bound() == pytest.approx(3.0)


def test_wrong_state_dimension():
    """Test that states of the wrong width are rejected."""
    with pytest.raises(DimensionMismatchError):
        active_tiles([[0.1, 0.2, 0.3]], unit_box())


def test_values_require_matching_theta():
    """Test that FeatureMap.values checks theta's shape."""
    coder = TileCoder(unit_box())
    with pytest.raises(DimensionMismatchError):
        coder.values(np.zeros(3), [[0.1, 0.1]])


def test_linear_value_function():
    """Test V(x) = theta . phi(x) for a stored value function."""
    cfg = unit_box(tilings=2)
    theta = np.arange(cfg.dimension, dtype=float)
    vf = LinearValueFunction(theta=theta.tolist(), features=cfg)

    assert linear_value(vf, [[0.3, 0.6]])[0] == pytest.approx(6.0 + 22.0)


def test_tabular_features():
    """Test one-hot rows and index validation."""
    features = TabularFeatures(4)
    phi = features.transform(np.array([[2.0], [0.0]])).toarray()

    assert phi.tolist() == [[0, 0, 1, 0], [1, 0, 0, 0]]
    assert features.norm_bound() == 1.0
    with pytest.raises(ValueError):
        features.transform(np.array([[4.0]]))


def test_states_in_one_cell_share_features():
    """Test identical feature vectors for two states inside the same tiles."""
    cfg = default_tile_config()
    rng = np.random.default_rng(4)
    states = rng.uniform(cfg.state_lows, cfg.state_highs, size=(100, 2))
    nudged = states + np.array([1e-9, 1e-11])

    assert np.array_equal(active_tiles(states, cfg), active_tiles(nudged, cfg))
    for a, b in zip(states[:5], nudged[:5]):
        assert np.array_equal(tile_code(a, cfg), tile_code(b, cfg))

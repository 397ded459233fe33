import hashlib
import math
from enum import Enum
from typing import Iterator, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _all_finite(values) -> bool:
    return all(math.isfinite(v) for v in values)


# --- MEASURES ---


class GaussianProductMeasure(BaseModel):
    """Axis-aligned Gaussian over parameter vectors; used for priors and posteriors."""

    model_config = ConfigDict(frozen=True)

    mean: list[float] = Field(min_length=1, description="Per-dimension mean")
    variance: list[float] = Field(
        min_length=1, description="Per-dimension variance, strictly positive"
    )

    @model_validator(mode="after")
    def _check_shape(self):
        if len(self.mean) != len(self.variance):
            raise ValueError(
                f"mean has {len(self.mean)} entries but variance has {len(self.variance)}"
            )
        if not _all_finite(self.mean) or not _all_finite(self.variance):
            raise ValueError("mean and variance must be finite")
        if any(v <= 0 for v in self.variance):
            raise ValueError("variance entries must be strictly positive")
        return self

    @classmethod
    def isotropic(cls, mean, variance: float) -> "GaussianProductMeasure":
        mean = [float(m) for m in np.asarray(mean, dtype=float).ravel()]
        return cls(mean=mean, variance=[float(variance)] * len(mean))

    @property
    def dim(self) -> int:
        return len(self.mean)

    def mean_array(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=float)

    def variance_array(self) -> np.ndarray:
        return np.asarray(self.variance, dtype=float)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` parameter vectors, shape (size, dim)."""
        noise = rng.standard_normal((size, self.dim))
        return self.mean_array() + noise * np.sqrt(self.variance_array())


class PosteriorFamilyConfig(BaseModel):
    """Inputs of the lambda-interpolated posterior family."""

    model_config = ConfigDict(frozen=True)

    prior_mean: list[float] = Field(min_length=1)
    prior_variance: float = Field(gt=0)
    empirical_mean: list[float] = Field(min_length=1)
    empirical_variance: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.prior_mean) != len(self.empirical_mean):
            raise ValueError("prior_mean and empirical_mean must have equal length")
        return self


# --- FEATURES ---


class TileCodingConfig(BaseModel):
    """Grid tilings over a box; feature dimension is tilings * tiles_per_dim ** dims."""

    model_config = ConfigDict(frozen=True)

    state_lows: list[float] = Field(min_length=1)
    state_highs: list[float] = Field(min_length=1)
    tilings: int = Field(default=4, gt=0)
    tiles_per_dim: int = Field(default=8, gt=0)
    offsets: list[list[float]] | None = Field(
        default=None,
        description="Per-tiling displacement in tile widths; default staggers tiling j by j/k",
    )

    @model_validator(mode="after")
    def _check_box(self):
        if len(self.state_lows) != len(self.state_highs):
            raise ValueError("state_lows and state_highs must have equal length")
        if any(lo >= hi for lo, hi in zip(self.state_lows, self.state_highs)):
            raise ValueError("state_lows must be strictly below state_highs")
        if self.offsets is not None:
            if len(self.offsets) != self.tilings:
                raise ValueError("offsets need one entry per tiling")
            for row in self.offsets:
                if len(row) != len(self.state_lows):
                    raise ValueError("each offset needs one component per state dim")
                if any(not 0.0 <= o < 1.0 for o in row):
                    raise ValueError("offset components must lie in [0, 1)")
        return self

    @property
    def state_dims(self) -> int:
        return len(self.state_lows)

    @property
    def dimension(self) -> int:
        return self.tilings * self.tiles_per_dim**self.state_dims

    def offset_array(self) -> np.ndarray:
        if self.offsets is not None:
            return np.asarray(self.offsets, dtype=float)
        stagger = np.arange(self.tilings, dtype=float) / self.tilings
        return np.repeat(stagger[:, None], self.state_dims, axis=1)


class LinearValueFunction(BaseModel):
    """V(x) = theta . phi(x) for a tile-coded feature map."""

    model_config = ConfigDict(frozen=True)

    theta: list[float] = Field(min_length=1)
    features: TileCodingConfig

    @model_validator(mode="after")
    def _check_dimension(self):
        if len(self.theta) != self.features.dimension:
            raise ValueError(
                f"theta has {len(self.theta)} entries, features need {self.features.dimension}"
            )
        return self

    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


# --- ENVIRONMENT DATA ---


class VariantTag(str, Enum):
    ORIGINAL = "original"
    DOUBLED_ACCELERATION = "doubled_acceleration"
    ALTITUDE_REWARD = "altitude_reward"


class MountainCarVariant(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: VariantTag = VariantTag.ORIGINAL
    gamma: float = Field(default=0.9, ge=0.0, lt=1.0)
    reward_max: float = Field(default=1.0, ge=0.0)

    @property
    def accel_scale(self) -> float:
        return 2.0 if self.tag == VariantTag.DOUBLED_ACCELERATION else 1.0


class TransitionSample(BaseModel):
    """One on-policy step (x, r, x') tagged with its trajectory position."""

    model_config = ConfigDict(frozen=True)

    state: tuple[float, ...]
    action: int
    reward: float
    next_state: tuple[float, ...]
    trajectory_id: int = Field(ge=0)
    step_index: int = Field(ge=0)


class TransitionBatch(BaseModel):
    """Columnar, ordered dataset of transitions grouped into trajectories."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    trajectory_ids: np.ndarray
    step_indices: np.ndarray
    state_names: tuple[str, ...] = ("pos", "vel")

    @model_validator(mode="after")
    def _check_columns(self):
        n = len(self.rewards)
        for name in ("states", "actions", "next_states", "trajectory_ids", "step_indices"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")
        if self.states.ndim != 2 or self.states.shape != self.next_states.shape:
            raise ValueError("states and next_states must be (n, dims) arrays")
        if self.states.shape[1] != len(self.state_names):
            raise ValueError("state_names must name every state component")
        return self

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def trajectory_count(self) -> int:
        return len(np.unique(self.trajectory_ids))

    def samples(self) -> Iterator[TransitionSample]:
        for i in range(len(self)):
            yield TransitionSample(
                state=tuple(float(v) for v in self.states[i]),
                action=int(self.actions[i]),
                reward=float(self.rewards[i]),
                next_state=tuple(float(v) for v in self.next_states[i]),
                trajectory_id=int(self.trajectory_ids[i]),
                step_index=int(self.step_indices[i]),
            )

    def repeated(self, times: int) -> "TransitionBatch":
        """Every transition duplicated `times` times (keeps row order per copy)."""
        return TransitionBatch(
            states=np.tile(self.states, (times, 1)),
            actions=np.tile(self.actions, times),
            rewards=np.tile(self.rewards, times),
            next_states=np.tile(self.next_states, (times, 1)),
            trajectory_ids=np.tile(self.trajectory_ids, times),
            step_indices=np.tile(self.step_indices, times),
            state_names=self.state_names,
        )

    def to_frame(self) -> pd.DataFrame:
        data = {
            "trajectory_id": self.trajectory_ids.astype(int),
            "step_index": self.step_indices.astype(int),
        }
        for j, name in enumerate(self.state_names):
            data[name] = self.states[:, j]
        data["action"] = self.actions.astype(int)
        data["reward"] = self.rewards
        for j, name in enumerate(self.state_names):
            data[f"next_{name}"] = self.next_states[:, j]
        return pd.DataFrame(data)

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, state_names: tuple[str, ...] = ("pos", "vel")
    ) -> "TransitionBatch":
        missing = [
            col
            for col in ["trajectory_id", "step_index", "action", "reward"]
            + list(state_names)
            + [f"next_{s}" for s in state_names]
            if col not in frame.columns
        ]
        if missing:
            raise ValueError(f"dataset is missing columns: {', '.join(missing)}")
        return cls(
            states=frame[list(state_names)].to_numpy(dtype=float),
            actions=frame["action"].to_numpy(dtype=int),
            rewards=frame["reward"].to_numpy(dtype=float),
            next_states=frame[[f"next_{s}" for s in state_names]].to_numpy(dtype=float),
            trajectory_ids=frame["trajectory_id"].to_numpy(dtype=int),
            step_indices=frame["step_index"].to_numpy(dtype=int),
            state_names=state_names,
        )

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(
        cls, path: str, state_names: tuple[str, ...] = ("pos", "vel")
    ) -> "TransitionBatch":
        return cls.from_frame(pd.read_csv(path), state_names)


class NoiseModel(BaseModel):
    """Reward variance and expected next-state feature covariance."""

    model_config = ConfigDict(frozen=True)

    sigma_r_sq: float = Field(default=0.0, ge=0.0)
    sigma_phi: list[list[float]]

    @field_validator("sigma_phi")
    @classmethod
    def _check_psd(cls, value: list[list[float]]):
        matrix = np.asarray(value, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("sigma_phi must be a square matrix")
        if not np.allclose(matrix, matrix.T, atol=1e-10):
            raise ValueError("sigma_phi must be symmetric")
        scale = max(1.0, float(np.abs(np.trace(matrix))))
        if matrix.size and np.linalg.eigvalsh(matrix).min() < -1e-10 * scale:
            raise ValueError("sigma_phi must be positive semidefinite")
        return value

    @classmethod
    def zeros(cls, dimension: int) -> "NoiseModel":
        return cls(sigma_r_sq=0.0, sigma_phi=np.zeros((dimension, dimension)).tolist())

    @property
    def dim(self) -> int:
        return len(self.sigma_phi)

    def sigma_phi_array(self) -> np.ndarray:
        return np.asarray(self.sigma_phi, dtype=float)


# --- BOUNDS ---


class BoundConstants(BaseModel):
    """Everything the Bellman-error certificate needs besides the data."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(gt=0)
    delta: float = Field(gt=0.0, lt=1.0)
    gamma: float = Field(ge=0.0, lt=1.0)
    v_max: float = Field(gt=0.0)
    r_max: float = Field(ge=0.0)
    tau: float = Field(ge=1.0, description="Forgetting factor ||Gamma_n||^2 used")
    tau_crude: float | None = Field(default=None, description="h^2 trajectory bound")
    tau_block: float | None = Field(default=None, description="Exact block-norm^2")
    c1: float = Field(gt=0.0)
    c2: float = Field(default=1.0, ge=1.0)
    c1_source: Literal["derived", "manifest"] = "derived"

    @property
    def b_sq(self) -> float:
        return (self.r_max + (1.0 + self.gamma) * self.v_max) ** 2

    @property
    def sample_scale(self) -> float:
        """V_max^2 * c1; the bound needs n above this."""
        return self.v_max**2 * self.c1

    @property
    def effective_c(self) -> float:
        return self.n / self.sample_scale


class BoundCertificate(BaseModel):
    model_config = ConfigDict(frozen=True)

    constants: BoundConstants
    kl: float = Field(ge=0.0)
    mu_rn: float = Field(ge=0.0)
    mu_gamma_pi: float = Field(ge=0.0)
    deviation: float = Field(ge=0.0)
    theorem1_value: float = Field(ge=0.0)
    raw_value: float
    bound_value: float = Field(ge=0.0)
    selected_lambda: float | None = None
    notes: list[str] = Field(default_factory=list)


# --- MARKOV CHAINS ---


class FiniteChain(BaseModel):
    """Markov reward process: row-stochastic kernel, per-state rewards, discount."""

    model_config = ConfigDict(frozen=True)

    P: list[list[float]] = Field(min_length=1)
    r: list[float] = Field(min_length=1)
    gamma: float = Field(default=0.9, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_kernel(self):
        size = len(self.P)
        if any(len(row) != size for row in self.P):
            raise ValueError("P must be square")
        if len(self.r) != size:
            raise ValueError(f"r must have {size} entries")
        matrix = np.asarray(self.P, dtype=float)
        if not np.all(np.isfinite(matrix)) or matrix.min() < 0:
            raise ValueError("P entries must be finite and nonnegative")
        if np.abs(matrix.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("P rows must sum to 1")
        if not _all_finite(self.r) or min(self.r) < 0:
            raise ValueError("r entries must be finite and nonnegative")
        return self

    @property
    def size(self) -> int:
        return len(self.P)

    @property
    def reward_max(self) -> float:
        return max(self.r)

    def kernel(self) -> np.ndarray:
        return np.asarray(self.P, dtype=float)

    def rewards(self) -> np.ndarray:
        return np.asarray(self.r, dtype=float)


class MixingProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma_matrix: list[list[float]]
    operator_norm: float = Field(ge=1.0)
    tau: float = Field(ge=1.0)

    @property
    def lags(self) -> list[float]:
        """gamma_ij as a function of j - i (first row of the matrix)."""
        return list(self.gamma_matrix[0])


class MixingReport(BaseModel):
    n: int
    states: int
    lags: list[float]
    operator_norm: float
    tau: float
    minorization_mass: float | None = None
    minorization_steps: int | None = None
    prop5_bound: float | None = None


class Theorem6Report(BaseModel):
    n: int
    epsilon: float
    trials: int
    seed: int
    bound_b: float
    expected_z: float
    gamma_norm: float
    upper_frequency: float
    lower_frequency: float
    upper_bound: float
    lower_bound: float


# --- GROUND TRUTH ---


class GroundTruth(BaseModel):
    """Held-out states with rollout estimates of V^pi."""

    model_config = ConfigDict(frozen=True)

    eval_states: list[list[float]] = Field(min_length=1)
    v_pi: list[float] = Field(min_length=1)
    rollout_horizon: int = Field(gt=0)
    rollouts_per_state: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.eval_states) != len(self.v_pi):
            raise ValueError("eval_states and v_pi must have equal length")
        return self

    def states_array(self) -> np.ndarray:
        return np.asarray(self.eval_states, dtype=float)

    def values_array(self) -> np.ndarray:
        return np.asarray(self.v_pi, dtype=float)


class PointEstimates(BaseModel):
    """Mean-parameter value at a fixed state, one entry per run."""

    method: Literal["empirical", "bayes", "pacbayes"]
    values: list[float]
    seeds: list[int]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        # population std: a single run reports 0
        return float(np.std(self.values))


class ValidityReport(BaseModel):
    """How often the certificate fell below the exact error over repeated datasets."""

    draws: int
    failures: int
    delta: float
    n: int
    max_truth: float
    min_bound: float

    @property
    def failure_rate(self) -> float:
        return self.failures / self.draws

    @property
    def allowed_rate(self) -> float:
        return self.delta + 3.0 * math.sqrt(self.delta * (1.0 - self.delta) / self.draws)


# --- EXPERIMENTS ---


class ExperimentManifest(BaseModel):
    """Reproducible description of a Mountain Car transfer experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: VariantTag = Field(
        default=VariantTag.DOUBLED_ACCELERATION,
        description="Target environment of the transfer experiment",
    )
    policy: Literal["bang_bang", "q_learning"] = "bang_bang"
    policy_episodes: int = Field(default=300, ge=1)
    policy_seed: int = 0
    trajectories: int = Field(default=100, ge=1)
    trajectory_length: int = Field(default=5, ge=1)
    prior_path: str = "data/prior.json"
    prior_samples: int = Field(default=200_000, ge=1)
    tilings: int = Field(default=4, ge=1)
    tiles_per_dim: int = Field(default=8, ge=1)
    sigma0_sq: float = Field(default=0.01, gt=0.0)
    sigma_hat_sq: float = Field(default=0.01, gt=0.0)
    delta: float = Field(default=0.05, gt=0.0, lt=1.0)
    gamma: float = Field(default=0.9, ge=0.0, lt=1.0)
    grid_step: float = Field(default=0.01, gt=0.0, le=1.0)
    runs: int = Field(default=100, ge=1)
    master_seed: int = 0
    eval_trajectories: int = Field(default=1000, ge=1)
    tau_source: Literal["crude", "block"] = "crude"
    v_max: float | None = Field(default=None, gt=0.0)
    c1: float | None = Field(default=None, gt=0.0)
    c2: float = Field(default=1.0, ge=1.0)
    ridge: float | None = Field(default=None, ge=0.0)
    estimate_noise: bool = False
    svg: bool = False
    workers: int = Field(default=1, ge=1)
    output_dir: str = "results"

    def run_seed(self, run_index: int) -> int:
        return self.master_seed + run_index

    def manifest_hash(self) -> str:
        """Digest of every field that influences results."""
        payload = self.model_dump_json(exclude={"workers", "output_dir"})
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

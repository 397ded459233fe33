"""One run of the transfer study: fresh data in the target environment, LSTD,
the prior/empirical posterior family, and bound-driven lambda selection."""

import numpy as np
from pydantic import BaseModel, ConfigDict

from core.bellman import (
    build_residuals,
    default_ridge,
    estimate_sigma_phi,
    lstd_system,
    solve_lstd_system,
)
from core.errors import DimensionMismatchError
from core.features import FeatureMap
from core.measures import posterior_lambda, prior_measure
from core.mixing import trajectory_block_norm, trajectory_tau_bound
from core.pacbayes import derive_constants, select_lambda
from envs.base import Environment, collect_trajectories
from models import (
    BoundCertificate,
    ExperimentManifest,
    GaussianProductMeasure,
    NoiseModel,
    PosteriorFamilyConfig,
)
from policies import Policy

NOISE_PROBES = 50
NOISE_PAIRS = 100

METHODS = ("empirical", "bayes", "pacbayes")


class TransferSetup:
    """Everything a run needs besides its seed; picklable for worker processes."""

    def __init__(
        self,
        manifest: ExperimentManifest,
        env: Environment,
        policy: Policy,
        features: FeatureMap,
        theta0: np.ndarray,
    ):
        theta0 = np.asarray(theta0, dtype=float)
        if theta0.shape != (features.dimension,):
            raise DimensionMismatchError(
                f"prior has {theta0.size} weights, features need {features.dimension}"
            )
        self.manifest = manifest
        self.env = env
        self.policy = policy
        self.features = features
        self.theta0 = theta0

    def tau_values(self) -> tuple[float, float, float]:
        """(tau used, crude h^2, exact block norm^2)."""
        h = self.manifest.trajectory_length
        crude = trajectory_tau_bound(h)
        block = trajectory_block_norm(h) ** 2
        return (crude if self.manifest.tau_source == "crude" else block), crude, block


class RunFit(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    seed: int
    theta_hat: np.ndarray
    ridge: float
    measures: dict[str, GaussianProductMeasure]
    selected_lambda: float
    certificate: BoundCertificate


def fit_run(setup: TransferSetup, seed: int) -> RunFit:
    manifest = setup.manifest
    batch = collect_trajectories(
        setup.env, setup.policy, manifest.trajectories, manifest.trajectory_length, seed
    )
    residuals = build_residuals(batch, setup.features, manifest.gamma)

    a, b = lstd_system(residuals)
    ridge = default_ridge(a) if manifest.ridge is None else manifest.ridge
    theta_hat = solve_lstd_system(a, b, ridge)

    family = PosteriorFamilyConfig(
        prior_mean=setup.theta0.tolist(),
        prior_variance=manifest.sigma0_sq,
        empirical_mean=theta_hat.tolist(),
        empirical_variance=manifest.sigma_hat_sq,
    )

    if manifest.estimate_noise:
        stride = max(1, len(batch) // NOISE_PROBES)
        noise = estimate_sigma_phi(
            setup.env,
            setup.policy,
            setup.features,
            batch.states[::stride][:NOISE_PROBES],
            NOISE_PAIRS,
            seed,
        )
    else:
        noise = NoiseModel.zeros(setup.features.dimension)

    tau, crude, block = setup.tau_values()
    constants = derive_constants(
        n=len(batch),
        delta=manifest.delta,
        gamma=manifest.gamma,
        r_max=setup.env.reward_max,
        tau=tau,
        v_max=manifest.v_max,
        c1=manifest.c1,
        c2=manifest.c2,
        tau_crude=crude,
        tau_block=block,
    )
    lam, mu, certificate = select_lambda(
        family, prior_measure(family), residuals, noise, constants, manifest.grid_step
    )
    certificate = certificate.model_copy(
        update={"notes": certificate.notes + [f"lstd ridge: {ridge:.6g}"]}
    )

    return RunFit(
        seed=seed,
        theta_hat=theta_hat,
        ridge=ridge,
        measures={
            "empirical": posterior_lambda(family, 0.0),
            "bayes": posterior_lambda(family, 1.0),
            "pacbayes": mu,
        },
        selected_lambda=lam,
        certificate=certificate,
    )

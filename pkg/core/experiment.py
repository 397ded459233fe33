import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
from pydantic import BaseModel

from core.oracle import (
    build_ground_truth,
    horizon_for_tolerance,
    mean_function_error,
    true_error_under_mu,
)
from core.run_logger import RunLogger, ground_truth_key
from core.transfer import METHODS, TransferSetup, fit_run
from models import BoundCertificate, ExperimentManifest, GroundTruth

GROUND_TRUTH_SEED_OFFSET = 10**6


class RunResult(BaseModel):
    run_index: int
    seed: int
    errors: dict[str, float]
    mean_function_errors: dict[str, float]
    selected_lambda: float
    certificate: BoundCertificate

    def lambdas(self) -> dict[str, float]:
        """Family coordinate of every method."""
        return {"empirical": 0.0, "bayes": 1.0, "pacbayes": self.selected_lambda}


def evaluate_run(setup: TransferSetup, ground_truth: GroundTruth, run_index: int) -> RunResult:
    seed = setup.manifest.run_seed(run_index)
    fit = fit_run(setup, seed)
    return RunResult(
        run_index=run_index,
        seed=seed,
        errors={
            m: true_error_under_mu(fit.measures[m], ground_truth, setup.features)
            for m in METHODS
        },
        mean_function_errors={
            m: mean_function_error(fit.measures[m], ground_truth, setup.features)
            for m in METHODS
        },
        selected_lambda=fit.selected_lambda,
        certificate=fit.certificate,
    )


def prepare_ground_truth(setup: TransferSetup, logger: RunLogger | None = None) -> GroundTruth:
    """Held-out oracle for the manifest, read from the cache when present."""
    manifest = setup.manifest
    seed = manifest.master_seed + GROUND_TRUTH_SEED_OFFSET
    horizon = horizon_for_tolerance(setup.env.gamma, setup.env.reward_max)
    key = ground_truth_key(
        setup.env.describe(),
        f"{manifest.policy}:{manifest.policy_seed}:{manifest.policy_episodes}",
        horizon,
        seed,
        manifest.eval_trajectories,
        manifest.trajectory_length,
    )
    if logger:
        cached = logger.load_ground_truth(key)
        if cached is not None:
            print(f"Ground truth: cached ({len(cached.v_pi)} states)")
            return cached

    ground_truth = build_ground_truth(
        setup.env,
        setup.policy,
        manifest.eval_trajectories,
        manifest.trajectory_length,
        seed,
    )
    print(f"Ground truth: {len(ground_truth.v_pi)} states, horizon {horizon}")
    if logger:
        logger.store_ground_truth(key, ground_truth)
    return ground_truth


class TransferExperiment:
    def __init__(
        self,
        setup: TransferSetup,
        ground_truth: GroundTruth,
        logger: RunLogger | None = None,
        session_id: str | None = None,
        workers: int = 1,
    ):
        assert workers >= 1, "workers must be at least 1"
        self.setup = setup
        self.ground_truth = ground_truth
        self.logger = logger
        self.session_id = session_id
        self.workers = workers

    def run(self) -> list[RunResult]:
        """All runs of the manifest, ordered by run index."""
        runs = range(self.setup.manifest.runs)
        if self.workers == 1:
            results = []
            for i in runs:
                results.append(self._record(evaluate_run(self.setup, self.ground_truth, i)))
            return results

        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(evaluate_run, self.setup, self.ground_truth, i) for i in runs
            ]
            return [self._record(f.result()) for f in futures]

    def _record(self, result: RunResult) -> RunResult:
        print(
            f"  run {result.run_index:3d} (seed {result.seed}): "
            f"lambda*={result.selected_lambda:.2f} "
            + " ".join(f"{m}={result.errors[m]:.4g}" for m in METHODS)
        )
        if self.logger and self.session_id:
            self.logger.log_run(
                session_id=self.session_id,
                run_index=result.run_index,
                seed=result.seed,
                errors=result.errors,
                lambdas=result.lambdas(),
                bound_value=result.certificate.bound_value,
                certificate=result.certificate.model_dump(),
            )
        return result


def summarize(results: list[RunResult], manifest: ExperimentManifest) -> pd.DataFrame:
    """mean/std (population) of the true error and family coordinate per method."""
    rows = []
    for method in METHODS:
        errors = np.array([r.errors[method] for r in results])
        lambdas = np.array([r.lambdas()[method] for r in results])
        rows.append(
            {
                "method": method,
                "mean_error": float(errors.mean()),
                "std_error": float(errors.std()),
                "mean_lambda": float(lambdas.mean()),
                "std_lambda": float(lambdas.std()),
                "master_seed": manifest.master_seed,
                "manifest_hash": manifest.manifest_hash(),
            }
        )
    return pd.DataFrame(rows)


def runs_frame(results: list[RunResult], manifest: ExperimentManifest) -> pd.DataFrame:
    rows = []
    for r in results:
        for method in METHODS:
            rows.append(
                {
                    "run": r.run_index,
                    "seed": r.seed,
                    "method": method,
                    "true_error": r.errors[method],
                    "mean_function_error": r.mean_function_errors[method],
                    "lambda": r.lambdas()[method],
                    "bound_value": r.certificate.bound_value if method == "pacbayes" else np.nan,
                    "manifest_hash": manifest.manifest_hash(),
                }
            )
    return pd.DataFrame(rows)


def write_outputs(
    results: list[RunResult], manifest: ExperimentManifest, output_dir: str
) -> str:
    """results.csv, runs.csv and one certificate JSON per run; returns results.csv path."""
    os.makedirs(os.path.join(output_dir, "certificates"), exist_ok=True)

    results_path = os.path.join(output_dir, "results.csv")
    summarize(results, manifest).to_csv(results_path, index=False, float_format="%.10g")
    runs_frame(results, manifest).to_csv(
        os.path.join(output_dir, "runs.csv"), index=False, float_format="%.10g"
    )

    for r in results:
        payload = {
            "run": r.run_index,
            "seed": r.seed,
            "manifest_hash": manifest.manifest_hash(),
            "certificate": r.certificate.model_dump(mode="json"),
        }
        path = os.path.join(output_dir, "certificates", f"run_{r.run_index:03d}.json")
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
    return results_path

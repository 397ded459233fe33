#!/usr/bin/env python3
"""
PAC-Bayes Policy Evaluation - Main CLI

Usage:
    uv run main.py train-prior --manifest manifests/similar.json
    uv run main.py transfer-experiment --manifest manifests/similar.json
    uv run main.py histogram --manifest manifests/different.json --svg true
    uv run main.py mixing-analysis --chain chains/two_state.json --n 50
    uv run main.py verify-theorem6 --chain chains/two_state.json --n 200 --epsilon 0.1
"""

import argparse
import json
import math
import os
import sys
import uuid

import numpy as np
import pandas as pd
from pydantic import ValidationError

import config
from core.errors import NumericalError, PolicyTrainingError
from core.bellman import lstd_solve
from core.experiment import TransferExperiment, prepare_ground_truth, write_outputs
from core.features import TileCoder
from core.mixing import mixing_report, verify_theorem6
from core.oracle import point_estimate_table
from core.run_logger import RunLogger
from core.transfer import METHODS, TransferSetup
from envs.base import collect_trajectories
from envs.mountain_car import default_tile_config
from models import ExperimentManifest, FiniteChain, LinearValueFunction, VariantTag

PRIOR_SEED_OFFSET = 2 * 10**6

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


# --- MANIFEST HANDLING ---


def add_manifest_arguments(parser: argparse.ArgumentParser):
    """--manifest plus one kebab-case flag per manifest field."""
    parser.add_argument("--manifest", type=str, help="Path to a JSON experiment manifest")
    for name, field in ExperimentManifest.model_fields.items():
        parser.add_argument(
            f"--{name.replace('_', '-')}",
            dest=name,
            type=str,
            default=argparse.SUPPRESS,
            help=field.description or f"override manifest '{name}'",
        )


def load_manifest(args: argparse.Namespace) -> ExperimentManifest:
    """Defaults, then the manifest file, then command-line flags."""
    data = {}
    if args.manifest:
        with open(args.manifest) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError("manifest must be a JSON object")
    for name in ExperimentManifest.model_fields:
        if name in vars(args):
            data[name] = getattr(args, name)
    return ExperimentManifest.model_validate(data)


def load_prior(manifest: ExperimentManifest) -> LinearValueFunction:
    if not os.path.exists(manifest.prior_path):
        raise FileNotFoundError(
            f"prior file {manifest.prior_path} not found; run train-prior first"
        )
    with open(manifest.prior_path) as f:
        prior = LinearValueFunction.model_validate_json(f.read())
    expected = default_tile_config(manifest.tilings, manifest.tiles_per_dim)
    if prior.features != expected:
        raise ValueError(
            f"prior features ({prior.features.tilings} tilings x {prior.features.tiles_per_dim}) "
            f"do not match the manifest ({manifest.tilings} x {manifest.tiles_per_dim})"
        )
    return prior


def build_setup(manifest: ExperimentManifest) -> TransferSetup:
    prior = load_prior(manifest)
    env = config.get_environment(manifest.variant, manifest.gamma)
    policy = config.get_policy(
        manifest.policy, manifest.policy_episodes, manifest.policy_seed, manifest.gamma
    )
    return TransferSetup(manifest, env, policy, TileCoder(prior.features), prior.theta_array())


def workers_for(manifest: ExperimentManifest) -> int:
    return manifest.workers if manifest.workers > 1 else config.DEFAULT_WORKERS


# --- COMMANDS ---


def cmd_train_prior(args) -> int:
    manifest = load_manifest(args)
    env = config.get_environment(VariantTag.ORIGINAL, manifest.gamma)
    policy = config.get_policy(
        manifest.policy, manifest.policy_episodes, manifest.policy_seed, manifest.gamma
    )
    cfg = default_tile_config(manifest.tilings, manifest.tiles_per_dim)

    count = math.ceil(manifest.prior_samples / manifest.trajectory_length)
    print(f"Collecting {count} x {manifest.trajectory_length} transitions on {env.describe()}")
    batch = collect_trajectories(
        env, policy, count, manifest.trajectory_length, manifest.master_seed + PRIOR_SEED_OFFSET
    )
    theta0 = lstd_solve(batch, TileCoder(cfg), manifest.gamma, ridge=manifest.ridge)

    directory = os.path.dirname(manifest.prior_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    prior = LinearValueFunction(theta=theta0.tolist(), features=cfg)
    with open(manifest.prior_path, "w") as f:
        f.write(prior.model_dump_json(indent=2))
    if args.save_dataset:
        batch.to_csv(args.save_dataset)

    print(f"Prior written to {manifest.prior_path} (|theta0| = {np.linalg.norm(theta0):.4f})")
    return EXIT_OK


def cmd_transfer_experiment(args) -> int:
    manifest = load_manifest(args)
    setup = build_setup(manifest)
    logger = RunLogger(config.get_db_path(manifest.output_dir))
    session_id = str(uuid.uuid4())
    logger.start_session(
        session_id, "transfer-experiment", manifest.manifest_hash(), manifest.master_seed, manifest.runs
    )

    print("PAC-Bayes Policy Evaluation - Transfer Experiment")
    print("=" * 60)
    print(f"Target: {setup.env.describe()}, policy: {manifest.policy}, runs: {manifest.runs}")

    ground_truth = prepare_ground_truth(setup, logger)
    experiment = TransferExperiment(
        setup, ground_truth, logger=logger, session_id=session_id, workers=workers_for(manifest)
    )
    results = experiment.run()
    path = write_outputs(results, manifest, manifest.output_dir)
    logger.complete_session(session_id)

    print("-" * 60)
    print(pd.read_csv(path)[["method", "mean_error", "std_error", "mean_lambda", "std_lambda"]])
    print(f"Results written to {manifest.output_dir}")
    return EXIT_OK


def write_histogram_svg(frame: pd.DataFrame, path: str):
    """Normal fits of the per-method point estimates."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from scipy import stats

    matplotlib.rcParams["svg.hashsalt"] = "pacbayes-policy-eval"
    fig, ax = plt.subplots(figsize=(6, 4))
    low, high = frame["value"].min(), frame["value"].max()
    pad = max(high - low, 1e-3) * 0.5
    grid = np.linspace(low - pad, high + pad, 400)
    for method in METHODS:
        values = frame.loc[frame["method"] == method, "value"].to_numpy()
        std = max(float(values.std()), 1e-6)
        ax.plot(grid, stats.norm.pdf(grid, values.mean(), std), label=method)
    ax.set_xlabel("V(bottom of the hill)")
    ax.set_ylabel("density")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_histogram(args) -> int:
    manifest = load_manifest(args)
    setup = build_setup(manifest)
    os.makedirs(manifest.output_dir, exist_ok=True)

    rows = []
    table = point_estimate_table(setup, manifest.runs, manifest.master_seed)
    for method in METHODS:
        estimates = table[method]
        print(f"  {method:10s} mean={estimates.mean:.4f} std={estimates.std:.4f}")
        for run, (value, seed) in enumerate(zip(estimates.values, estimates.seeds)):
            rows.append(
                {
                    "method": method,
                    "run": run,
                    "value": value,
                    "seed": seed,
                    "manifest_hash": manifest.manifest_hash(),
                }
            )

    frame = pd.DataFrame(rows)
    path = os.path.join(manifest.output_dir, "histogram.csv")
    frame.to_csv(path, index=False, float_format="%.10g")
    if manifest.svg:
        write_histogram_svg(frame, os.path.join(manifest.output_dir, "histogram.svg"))
    print(f"Histogram data written to {path}")
    return EXIT_OK


def load_chain(path: str) -> FiniteChain:
    with open(path) as f:
        return FiniteChain.model_validate_json(f.read())


def emit(report, output: str | None):
    text = report.model_dump_json(indent=2)
    if output:
        with open(output, "w") as f:
            f.write(text + "\n")
    print(text)


def cmd_mixing_analysis(args) -> int:
    chain = load_chain(args.chain)
    emit(mixing_report(chain, args.n, args.minorization_mass, args.steps), args.output)
    return EXIT_OK


def cmd_verify_theorem6(args) -> int:
    chain = load_chain(args.chain)
    f = chain.r if args.f is None else [float(v) for v in args.f.split(",")]
    report = verify_theorem6(
        chain, f, args.n, args.epsilon, args.trials, args.seed, bound=args.bound
    )
    emit(report, args.output)
    return EXIT_OK


# --- ENTRY POINT ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="PAC-Bayes Policy Evaluation - certified value estimates with transferred priors",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exit codes:
  0  success
  1  usage or configuration error
  2  numerical failure (singular LSTD, vacuous bound, policy training)
        """,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train-prior", help="Fit theta0 by LSTD on the original domain")
    add_manifest_arguments(train)
    train.add_argument("--save-dataset", type=str, help="Also write the dataset as CSV")
    train.set_defaults(handler=cmd_train_prior)

    transfer = commands.add_parser("transfer-experiment", help="Empirical/Bayes/PAC-Bayes table")
    add_manifest_arguments(transfer)
    transfer.set_defaults(handler=cmd_transfer_experiment)

    histogram = commands.add_parser("histogram", help="Point estimates at the bottom of the hill")
    add_manifest_arguments(histogram)
    histogram.set_defaults(handler=cmd_histogram)

    mixing = commands.add_parser("mixing-analysis", help="Gamma_n summary of a finite chain")
    mixing.add_argument("--chain", type=str, required=True, help="JSON {P, r, gamma}")
    mixing.add_argument("--n", type=int, default=config.DEFAULT_MIXING_N)
    mixing.add_argument("--minorization-mass", type=float, default=None)
    mixing.add_argument("--steps", type=int, default=1, help="Minorization steps r")
    mixing.add_argument("--output", type=str, default=None)
    mixing.set_defaults(handler=cmd_mixing_analysis)

    verify = commands.add_parser("verify-theorem6", help="Monte Carlo tails vs analytic bounds")
    verify.add_argument("--chain", type=str, required=True, help="JSON {P, r, gamma}")
    verify.add_argument("--f", type=str, default=None, help="Comma-separated f per state (default r)")
    verify.add_argument("--n", type=int, required=True)
    verify.add_argument("--epsilon", type=float, required=True)
    verify.add_argument("--trials", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--bound", type=float, default=None, help="Range bound B (default max f)")
    verify.add_argument("--output", type=str, default=None)
    verify.set_defaults(handler=cmd_verify_theorem6)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as e:
        print(f"Error: invalid input\n{e}")
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    except (NumericalError, PolicyTrainingError) as e:
        print(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except (ValueError, RuntimeError) as e:
        print(f"Error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

import os
from dotenv import load_dotenv

from agents.bang_bang import BangBangPolicy
from agents.q_learning import learn_policy_q
from envs.mountain_car import MountainCarEnv
from models import MountainCarVariant, VariantTag

# Load environment variables
load_dotenv()

# --- FRAMEWORK CONFIGURATION ---
# Defaults shared by every command. Per-experiment settings live in the JSON
# manifests under manifests/ and can be overridden from the command line.

# === DATA CONFIGURATION ===
# Directory for priors, oracle caches and run databases
DATA_DIR = os.getenv("PACBAYES_DATA_DIR", "data")

# Default database filename
DEFAULT_DB_NAME = "experiment_logs.db"

# === EXECUTION CONFIGURATION ===
# Worker processes for independent runs; a manifest value above 1 wins
DEFAULT_WORKERS = int(os.getenv("PACBAYES_WORKERS", "1"))
assert DEFAULT_WORKERS > 0, "PACBAYES_WORKERS must be positive"

# === POLICY CONFIGURATION ===
# Default evaluation policy: "bang_bang" or "q_learning"
DEFAULT_POLICY = "bang_bang"

# Q-learning always trains on the original dynamics
POLICY_TRAINING_VARIANT = VariantTag.ORIGINAL

# === MIXING CONFIGURATION ===
# Sample size used by mixing-analysis when no --n is given
DEFAULT_MIXING_N = 100
assert DEFAULT_MIXING_N > 0, "DEFAULT_MIXING_N must be positive"


# --- FACTORIES ---


def get_policy(kind: str | None = None, episodes: int = 300, seed: int = 0, gamma: float = 0.9):
    """Returns the evaluation policy by name."""
    kind = kind or DEFAULT_POLICY

    if kind == "bang_bang":
        return BangBangPolicy()
    if kind == "q_learning":
        variant = MountainCarVariant(tag=POLICY_TRAINING_VARIANT, gamma=gamma)
        return learn_policy_q(variant, episodes, seed)
    raise ValueError(f"Unknown policy type: {kind}")


def get_environment(variant: VariantTag | str, gamma: float = 0.9) -> MountainCarEnv:
    return MountainCarEnv(MountainCarVariant(tag=VariantTag(variant), gamma=gamma))


def get_db_path(output_dir: str | None = None) -> str:
    """
    Database path for a run. Lives next to the outputs when an output
    directory is given, otherwise in the data directory.
    """
    directory = output_dir or DATA_DIR
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, DEFAULT_DB_NAME)

import json
import sqlite3
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, Optional

from models import GroundTruth

GROUND_TRUTH_VERSION = 1


class RunLogger:
    """SQLite record of experiment sessions, per-run results and cached oracles."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        self._init_database()

    def _init_database(self):
        """Create tables if they don't exist."""
        with self._get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS experiment_sessions (
                    session_id TEXT PRIMARY KEY,
                    started_at DATETIME NOT NULL,
                    completed_at DATETIME,
                    command TEXT NOT NULL,
                    manifest_hash TEXT,
                    master_seed INTEGER,
                    total_runs INTEGER
                )
            """)

            # One row per (run, method)
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS run_results (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    session_id TEXT NOT NULL,
                    timestamp DATETIME NOT NULL,
                    run_index INTEGER NOT NULL,
                    seed INTEGER NOT NULL,
                    method TEXT NOT NULL,
                    true_error REAL,
                    lambda_value REAL,
                    bound_value REAL,
                    certificate TEXT,
                    FOREIGN KEY (session_id) REFERENCES experiment_sessions(session_id)
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS ground_truth_cache (
                    cache_key TEXT PRIMARY KEY,
                    version INTEGER NOT NULL,
                    created_at DATETIME NOT NULL,
                    payload TEXT NOT NULL
                )
            """)

            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_session_run
                ON run_results(session_id, run_index)
            """)

            conn.commit()

    @contextmanager
    def _get_connection(self):
        """Context manager for database connections."""
        conn = sqlite3.connect(self.db_path)
        try:
            yield conn
        finally:
            conn.close()

    def start_session(
        self, session_id: str, command: str, manifest_hash: str, master_seed: int, total_runs: int
    ):
        assert session_id, "session_id cannot be empty"
        assert total_runs >= 0, "total_runs cannot be negative"

        with self._get_connection() as conn:
            conn.execute(
                """
                INSERT INTO experiment_sessions
                (session_id, started_at, command, manifest_hash, master_seed, total_runs)
                VALUES (?, ?, ?, ?, ?, ?)
            """,
                (
                    session_id,
                    datetime.now().isoformat(),
                    command,
                    manifest_hash,
                    master_seed,
                    total_runs,
                ),
            )
            conn.commit()

    def complete_session(self, session_id: str):
        """Mark a session as completed."""
        with self._get_connection() as conn:
            conn.execute(
                "UPDATE experiment_sessions SET completed_at = ? WHERE session_id = ?",
                (datetime.now().isoformat(), session_id),
            )
            conn.commit()

    def log_run(
        self,
        session_id: str,
        run_index: int,
        seed: int,
        errors: Dict[str, float],
        lambdas: Dict[str, float],
        bound_value: Optional[float] = None,
        certificate: Optional[Dict[str, Any]] = None,
    ):
        """Log every method of one run; committed immediately so partial
        experiments stay inspectable."""
        assert session_id, "session_id cannot be empty"
        assert run_index >= 0, "run_index cannot be negative"

        with self._get_connection() as conn:
            timestamp = datetime.now().isoformat()
            for method, error in errors.items():
                is_certified = method == "pacbayes"
                conn.execute(
                    """
                    INSERT INTO run_results
                    (session_id, timestamp, run_index, seed, method, true_error,
                     lambda_value, bound_value, certificate)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                    (
                        session_id,
                        timestamp,
                        run_index,
                        seed,
                        method,
                        error,
                        lambdas.get(method),
                        bound_value if is_certified else None,
                        json.dumps(certificate) if is_certified and certificate else None,
                    ),
                )
            conn.commit()

    def get_session_runs(self, session_id: str):
        """Retrieve all logged rows of a session."""
        with self._get_connection() as conn:
            cursor = conn.execute(
                """
                SELECT run_index, seed, method, true_error, lambda_value, bound_value
                FROM run_results
                WHERE session_id = ?
                ORDER BY run_index, method
            """,
                (session_id,),
            )
            return cursor.fetchall()

    def load_ground_truth(self, cache_key: str) -> Optional[GroundTruth]:
        with self._get_connection() as conn:
            row = conn.execute(
                "SELECT version, payload FROM ground_truth_cache WHERE cache_key = ?",
                (cache_key,),
            ).fetchone()
        if row is None or row[0] != GROUND_TRUTH_VERSION:
            return None
        return GroundTruth.model_validate_json(row[1])

    def store_ground_truth(self, cache_key: str, ground_truth: GroundTruth):
        assert cache_key, "cache_key cannot be empty"
        with self._get_connection() as conn:
            conn.execute(
                """
                INSERT OR REPLACE INTO ground_truth_cache
                (cache_key, version, created_at, payload)
                VALUES (?, ?, ?, ?)
            """,
                (
                    cache_key,
                    GROUND_TRUTH_VERSION,
                    datetime.now().isoformat(),
                    ground_truth.model_dump_json(),
                ),
            )
            conn.commit()


def ground_truth_key(
    variant: str, policy: str, horizon: int, seed: int, trajectories: int, length: int
) -> str:
    return f"{variant}|{policy}|h={horizon}|seed={seed}|traj={trajectories}x{length}"

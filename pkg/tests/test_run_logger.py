"""
Tests for the SQLite run logger
"""

import os
import tempfile

from core.run_logger import RunLogger, ground_truth_key
from models import GroundTruth


def test_logger_initialization():
    """Test that logger initializes and creates database."""
    with tempfile.NamedTemporaryFile(delete=False, suffix=".db") as f:
        db_path = f.name

    try:
        RunLogger(db_path)
        assert os.path.exists(db_path)
    finally:
        if os.path.exists(db_path):
            os.remove(db_path)


def test_session_creation():
    """Test session creation and completion."""
    with tempfile.NamedTemporaryFile(delete=False, suffix=".db") as f:
        db_path = f.name

    try:
        logger = RunLogger(db_path)
        session_id = "test_session_001"

        logger.start_session(
            session_id=session_id,
            command="transfer-experiment",
            manifest_hash="abc123",
            master_seed=0,
            total_runs=3,
        )
        logger.complete_session(session_id)

        with logger._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute(
                "SELECT completed_at, total_runs FROM experiment_sessions WHERE session_id = ?",
                (session_id,),
            )
            completed_at, total_runs = cursor.fetchone()
            assert completed_at is not None
            assert total_runs == 3
    finally:
        if os.path.exists(db_path):
            os.remove(db_path)


def test_run_logging():
    """Test that every method of a run is stored, the certificate only once."""
    with tempfile.NamedTemporaryFile(delete=False, suffix=".db") as f:
        db_path = f.name

    try:
        logger = RunLogger(db_path)
        session_id = "test_session_002"
        logger.start_session(session_id, "transfer-experiment", "abc123", 0, 1)

        logger.log_run(
            session_id=session_id,
            run_index=0,
            seed=0,
            errors={"empirical": 2.0, "bayes": 1.5, "pacbayes": 1.0},
            lambdas={"empirical": 0.0, "bayes": 1.0, "pacbayes": 0.7},
            bound_value=12.5,
            certificate={"kl": 3.0},
        )

        rows = logger.get_session_runs(session_id)
        assert len(rows) == 3
        by_method = {row[2]: row for row in rows}
        assert by_method["pacbayes"][4] == 0.7
        assert by_method["pacbayes"][5] == 12.5
        assert by_method["empirical"][5] is None
    finally:
        if os.path.exists(db_path):
            os.remove(db_path)


def test_ground_truth_cache():
    """Test storing, reading and missing cache entries."""
    with tempfile.NamedTemporaryFile(delete=False, suffix=".db") as f:
        db_path = f.name

    try:
        logger = RunLogger(db_path)
        truth = GroundTruth(
            eval_states=[[-0.5, 0.0], [0.1, 0.02]],
            v_pi=[1.25, 3.5],
            rollout_horizon=110,
            rollouts_per_state=1,
        )
        key = ground_truth_key("mountain_car:original", "bang_bang", 110, 7, 2, 1)

        assert logger.load_ground_truth(key) is None
        logger.store_ground_truth(key, truth)
        assert logger.load_ground_truth(key) == truth
    finally:
        if os.path.exists(db_path):
            os.remove(db_path)

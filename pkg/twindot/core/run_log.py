"""
TWINDOT Run Ledger
Append-only JSONL record of every run: start, end, truncation changes and failures
"""

import json
import logging
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional
from uuid import UUID, uuid4

from .. import __version__
from .data_models import RunLogEntry

logger = logging.getLogger(__name__)


class RunLogger:
    """
    Keeps the provenance trail of a run

    Timestamps live here and in ScanResult.created_at only; CSV outputs stay
    free of them.
    """

    def __init__(self, log_directory: str = "./logs", run_id: Optional[UUID] = None):
        self.log_directory = Path(log_directory)
        self.log_directory.mkdir(parents=True, exist_ok=True)

        self.run_id = run_id or uuid4()
        self.session_start = datetime.utcnow()
        self.session_log_file = self._get_session_log_file()

        self.session_buffer: List[RunLogEntry] = []
        # scan workers report from several threads
        self._lock = threading.Lock()

    def _get_session_log_file(self) -> Path:
        timestamp = self.session_start.strftime("%Y%m%d_%H%M%S")
        return self.log_directory / f"run_log_{timestamp}_{self.run_id.hex[:8]}.jsonl"

    def log_run_started(self, experiment: str, params: Dict[str, Any],
                        metadata: Optional[Dict[str, Any]] = None):
        """
        Log the start of an experiment

        Args:
            experiment: experiment kind (spectrum, power, ...)
            params: resolved parameter set
            metadata: grids, truncation policy, worker count
        """
        self._write_log_entry(RunLogEntry(
            run_id=self.run_id,
            action_type="run_started",
            actor="twindot_cli",
            experiment=experiment,
            detail=f"{experiment} started",
            code_version=__version__,
            metadata={"params": params, **(metadata or {})},
        ))

    def log_run_completed(self, experiment: str, n_points: int, n_unconverged: int,
                          outputs: Optional[List[str]] = None):
        self._write_log_entry(RunLogEntry(
            run_id=self.run_id,
            action_type="run_completed",
            actor="twindot_cli",
            experiment=experiment,
            detail=f"{n_points} points, {n_unconverged} unconverged",
            code_version=__version__,
            metadata={
                "n_points": n_points,
                "n_unconverged": n_unconverged,
                "outputs": outputs or [],
            },
        ))

    def log_point_unconverged(self, experiment: str, point: Dict[str, Any], fock_dim: int):
        self._write_log_entry(RunLogEntry(
            run_id=self.run_id,
            action_type="point_unconverged",
            actor="twindot_scan_engine",
            experiment=experiment,
            detail=f"truncation N={fock_dim} not converged",
            code_version=__version__,
            metadata={"point": point, "fock_dim": fock_dim},
        ))

    def log_truncation_raised(self, experiment: str, old_dim: int, new_dim: int):
        self._write_log_entry(RunLogEntry(
            run_id=self.run_id,
            action_type="truncation_raised",
            actor="twindot_scan_engine",
            experiment=experiment,
            detail=f"fock_dim {old_dim} -> {new_dim}",
            code_version=__version__,
            metadata={"old_fock_dim": old_dim, "new_fock_dim": new_dim},
        ))

    def log_run_failed(self, experiment: str, error: Exception):
        """
        Log an aborted run

        Args:
            experiment: experiment kind
            error: exception that stopped the run; solver diagnostics are kept
        """
        self._write_log_entry(RunLogEntry(
            run_id=self.run_id,
            action_type="run_failed",
            actor="twindot_cli",
            experiment=experiment,
            detail=str(error),
            code_version=__version__,
            metadata={
                "error_type": type(error).__name__,
                "diagnostics": getattr(error, "diagnostics", {}),
            },
        ))

    def _write_log_entry(self, entry: RunLogEntry):
        with self._lock:
            self.session_buffer.append(entry)
            with open(self.session_log_file, "a") as f:
                f.write(entry.model_dump_json() + "\n")

    def query_logs(
        self,
        run_id: Optional[UUID] = None,
        action_type: Optional[str] = None,
        experiment: Optional[str] = None,
        start_time: Optional[datetime] = None,
        end_time: Optional[datetime] = None,
    ) -> List[RunLogEntry]:
        """
        Read entries back from every ledger file in the directory

        Returns:
            Matching entries in file order
        """
        results = []
        for log_file in sorted(self.log_directory.glob("run_log_*.jsonl")):
            with open(log_file, "r") as f:
                for line in f:
                    try:
                        entry = RunLogEntry(**json.loads(line))
                    except (ValueError, TypeError) as e:
                        logger.warning("skipping unreadable ledger line in %s: %s", log_file, e)
                        continue

                    if run_id and entry.run_id != run_id:
                        continue
                    if action_type and entry.action_type != action_type:
                        continue
                    if experiment and entry.experiment != experiment:
                        continue
                    if start_time and entry.timestamp < start_time:
                        continue
                    if end_time and entry.timestamp > end_time:
                        continue
                    results.append(entry)
        return results

    def get_session_summary(self) -> Dict[str, Any]:
        session_duration = (datetime.utcnow() - self.session_start).total_seconds()

        action_counts: Dict[str, int] = {}
        for entry in self.session_buffer:
            action_counts[entry.action_type] = action_counts.get(entry.action_type, 0) + 1

        return {
            "run_id": str(self.run_id),
            "session_start": self.session_start.isoformat(),
            "session_duration_seconds": round(session_duration, 2),
            "total_log_entries": len(self.session_buffer),
            "action_type_counts": action_counts,
            "log_file": str(self.session_log_file),
        }

"""Progress tracking for verification runs."""

import json
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Union


def _now() -> str:
    return datetime.utcnow().isoformat() + "Z"


class ProgressTracker:
    """Tracks suite progress in ``run-progress.json``.

    Timestamps live only here; reports never carry them.
    """

    PROGRESS_FILE = "run-progress.json"

    def __init__(self, work_dir: Union[str, Path]):
        """Initialize progress tracker.

        Args:
            work_dir: Working directory for storing progress file.
        """
        self.work_dir = Path(work_dir)
        self.work_dir.mkdir(parents=True, exist_ok=True)
        self.progress_file = self.work_dir / self.PROGRESS_FILE
        self._lock = threading.Lock()

    def init_progress(self, project_name: str, command: str = "verify") -> None:
        """Start a fresh progress record.

        Args:
            project_name: Name of the configured project.
            command: CLI command being run.
        """
        progress = {
            "project": project_name,
            "command": command,
            "started_at": _now(),
            "suites": {},
        }
        with self._lock:
            self._write_progress(progress)

    def _update(self, suite: str, fields: Dict[str, Any]) -> None:
        with self._lock:
            progress = self.read_progress() or {"suites": {}}
            progress["suites"].setdefault(suite, {}).update(fields)
            self._write_progress(progress)

    def mark_suite_started(self, suite: str) -> None:
        self._update(suite, {"status": "in_progress", "started_at": _now()})

    def mark_suite_completed(self, suite: str, summary: str = "") -> None:
        """Mark a suite as completed.

        Args:
            suite: Suite name.
            summary: Short result summary.
        """
        self._update(suite, {"status": "completed", "completed_at": _now(), "summary": summary})

    def mark_suite_failed(self, suite: str, error: str = "") -> None:
        """Mark a suite as failed.

        Args:
            suite: Suite name.
            error: Gate or exception message.
        """
        self._update(suite, {"status": "failed", "failed_at": _now(), "error": error})

    def mark_finished(self, passed: bool) -> None:
        with self._lock:
            progress = self.read_progress() or {"suites": {}}
            progress.update({"finished_at": _now(), "passed": passed})
            self._write_progress(progress)

    def read_progress(self) -> Optional[Dict[str, Any]]:
        """Read current progress.

        Returns:
            Progress dictionary or None if file doesn't exist.
        """
        if not self.progress_file.exists():
            return None

        with open(self.progress_file) as f:
            return json.load(f)

    def _write_progress(self, progress: Dict[str, Any]) -> None:
        with open(self.progress_file, "w") as f:
            json.dump(progress, f, indent=2)

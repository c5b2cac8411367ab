"""Suite runner for executing one verification suite."""

import logging

import numpy as np

from moller_workbench.errors import ConfigurationError, NumericFailure, OracleCapError
from moller_workbench.pipeline.gates import GateError, validate_suite_gate
from moller_workbench.pipeline.suites import SUITES, WorkbenchContext, suite_seed
from moller_workbench.schema import SuiteResult
from moller_workbench.state.progress import ProgressTracker

logger = logging.getLogger(__name__)

CONFIGURATION_ERRORS = (ConfigurationError, OracleCapError)


class SuiteRunner:
    """Runs a single verification suite."""

    def __init__(
        self,
        context: WorkbenchContext,
        progress_tracker: ProgressTracker,
        suite: str,
        index: int,
    ):
        """Initialize suite runner.

        Args:
            context: Shared objects of the run.
            progress_tracker: Progress tracker instance.
            suite: Suite name, a key of ``SUITES``.
            index: Position of the suite; mixed into its seed.
        """
        if suite not in SUITES:
            raise ConfigurationError(f"Unknown suite {suite!r}")
        self.context = context
        self.progress_tracker = progress_tracker
        self.suite = suite
        self.seed = suite_seed(context.battery.seed, index)

    def run(self) -> SuiteResult:
        """Run the suite and classify its outcome.

        Gate failures give a ``failed`` result; exceptions give an ``error``
        result tagged as a configuration or numeric problem.
        """
        self.progress_tracker.mark_suite_started(self.suite)
        logger.info("suite %s started (seed %d)", self.suite, self.seed)

        try:
            checks = SUITES[self.suite](self.context, self.seed)
        except CONFIGURATION_ERRORS as e:
            logger.warning("suite %s refused: %s", self.suite, e)
            return self._error(str(e), "configuration")
        except (NumericFailure, np.linalg.LinAlgError) as e:
            return self._error(str(e), "numeric")
        except Exception as e:
            logger.exception("suite %s crashed", self.suite)
            return self._error(f"{type(e).__name__}: {e}", "numeric")

        result = SuiteResult(suite=self.suite, status="passed", checks=checks)
        try:
            validate_suite_gate(result)
        except GateError as e:
            self.progress_tracker.mark_suite_failed(self.suite, str(e))
            logger.info("suite %s failed: %s", self.suite, e)
            return result.model_copy(update={"status": "failed"})

        self.progress_tracker.mark_suite_completed(
            self.suite, f"{len(checks)} identities passed"
        )
        logger.info("suite %s passed", self.suite)
        return result

    def _error(self, message: str, kind: str) -> SuiteResult:
        self.progress_tracker.mark_suite_failed(self.suite, message)
        return SuiteResult(suite=self.suite, status="error", error=message, error_kind=kind)

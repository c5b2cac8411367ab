"""Validation gates applied to suite results."""

from moller_workbench.schema import SuiteResult, VerifyReport


class GateError(Exception):
    """Raised when a validation gate fails."""

    pass


def validate_suite_gate(result: SuiteResult) -> None:
    """Validate one suite result.

    Args:
        result: Suite result to validate.

    Raises:
        GateError: If the suite errored, ran no checks or any identity failed.
    """
    if result.status == "error":
        raise GateError(f"Suite {result.suite} errored: {result.error}")

    if not result.checks:
        raise GateError(f"Suite {result.suite} must run at least one check")

    failing = [check.identity for check in result.checks if not check.passed]
    if failing:
        raise GateError(f"Suite {result.suite} failed identities: {', '.join(failing)}")


def validate_report_gate(report: VerifyReport) -> None:
    """Validate an assembled verify report.

    Raises:
        GateError: If a suite is missing or the pass flag disagrees with the suites.
    """
    if not report.suites:
        raise GateError("Report must contain at least one suite")

    names = [suite.suite for suite in report.suites]
    if len(set(names)) != len(names):
        raise GateError("Report lists a suite twice")

    all_passed = all(suite.status == "passed" for suite in report.suites)
    if report.passed != all_passed:
        raise GateError("Report pass flag does not match its suites")

"""Orchestrator coordinating verification suites, scenarios and state dumps."""

import logging
from typing import Any, Dict, List, Optional, Sequence

import anyio
import numpy as np
from anyio import to_thread

from moller_workbench.config import config_hash, load_config
from moller_workbench.errors import ConfigurationError
from moller_workbench.fields import Bundle, SpinorSection
from moller_workbench.funcalg.checks import random_functional
from moller_workbench.funcalg.conventions import STAR_NORMALIZATION
from moller_workbench.funcalg.products import algebra_moller, peierls, star
from moller_workbench.green import advanced, causal, retarded
from moller_workbench.moller import moller_apply, moller_inverse_apply
from moller_workbench.pipeline.gates import validate_report_gate
from moller_workbench.pipeline.runner import SuiteRunner
from moller_workbench.pipeline.suites import (
    SUITES,
    WorkbenchContext,
    funcalg_suite,
    hadamard_suite,
    suite_seed,
    theorem_suite,
)
from moller_workbench.schema import Config, IdentityCheck, SourceSpec, VerifyReport
from moller_workbench.state.manager import ReportStore
from moller_workbench.state.progress import ProgressTracker

logger = logging.getLogger(__name__)


class Orchestrator:
    """Runs the workbench commands for one configuration."""

    SUITES = list(SUITES)

    def __init__(self, config: Config):
        """Initialize orchestrator.

        Args:
            config: Validated workbench configuration.
        """
        self.config = config
        self.store = ReportStore(config.work_dir)
        self.progress_tracker = ProgressTracker(config.work_dir)
        self._context: Optional[WorkbenchContext] = None

    @classmethod
    def from_config_file(cls, config_path: str) -> "Orchestrator":
        """Create orchestrator from configuration file.

        Args:
            config_path: Path to configuration file.

        Returns:
            Orchestrator instance.
        """
        config = load_config(config_path)
        return cls(config)

    @property
    def context(self) -> WorkbenchContext:
        """Shared operators; built on first use so construction errors surface there."""
        if self._context is None:
            self._context = WorkbenchContext(self.config)
        return self._context

    def conventions(self) -> Dict[str, str]:
        return {
            "signature": self.config.convention.signature,
            "hermiticity": self.config.convention.hermiticity,
            "star_normalization": repr(STAR_NORMALIZATION),
            "functional_derivative": "right",
            "zero_mode_policy": self.config.state.zero_mode_policy,
        }

    def _header(self) -> Dict[str, Any]:
        return {
            "schema_version": 1,
            "project_name": self.config.project_name,
            "config_hash": config_hash(self.config),
            "seed": self.config.battery.seed,
            "conventions": self.conventions(),
        }

    # ── verify ──

    async def run_suites(self, names: Optional[Sequence[str]] = None) -> VerifyReport:
        """Run suites concurrently and assemble the report in suite order.

        Args:
            names: Suites to run; all of ``SUITES`` by default.

        Returns:
            The validated report, also written as ``verify-report.json``.

        Raises:
            ConfigurationError: If a suite name is unknown or the shared
                operators cannot be built.
        """
        names = list(names) if names is not None else list(self.SUITES)
        self.progress_tracker.init_progress(self.config.project_name, "verify")
        runners = [
            SuiteRunner(self.context, self.progress_tracker, name, self.SUITES.index(name))
            for name in names
        ]
        limiter = anyio.CapacityLimiter(self.config.max_parallel_suites)
        results: Dict[str, Any] = {}

        async def run_one(runner: SuiteRunner) -> None:
            results[runner.suite] = await to_thread.run_sync(runner.run, limiter=limiter)

        async with anyio.create_task_group() as tg:
            for runner in runners:
                tg.start_soon(run_one, runner)

        suites = [results[name] for name in names]
        report = VerifyReport(
            **self._header(),
            suites=suites,
            passed=all(s.status == "passed" for s in suites),
        )
        validate_report_gate(report)
        self.store.save_report("verify", report)
        self.progress_tracker.mark_finished(report.passed)
        logger.info("verify finished passed=%s", report.passed)
        return report

    # ── scenario ──

    def _source(self, spec: SourceSpec) -> SpinorSection:
        grid = self.context.grid
        fiber = self.context.rep.fiber
        region = grid.box_region(spec.lower, spec.upper)
        rng = np.random.default_rng(spec.seed)
        values = np.zeros(grid.shape + (fiber,), dtype=complex)
        count = int(region.sum())
        values[region] = rng.normal(size=(count, fiber)) + 1j * rng.normal(size=(count, fiber))
        return SpinorSection(grid, Bundle.UNCHARGED, values)

    def run_scenario(self) -> Dict[str, Any]:
        """Dump Green-operator and Møller outputs for each configured source.

        Raises:
            ConfigurationError: If no sources are configured.
            CausalDomainError: If a source touches a slab end or its cone wraps.
        """
        sources = self.config.scenario.sources
        if not sources:
            raise ConfigurationError("scenario needs at least one source")
        ctx = self.context
        binary = self.config.scenario.binary
        entries = []
        for spec in sources:
            f = self._source(spec)
            t = f.retag(Bundle.CHARGED)
            outputs = {
                "source": f,
                "retarded": retarded(ctx.free, f),
                "advanced": advanced(ctx.free, f),
                "causal": causal(ctx.free, f),
                "moller": moller_apply(ctx.moller, f),
                "moller-inverse": moller_inverse_apply(ctx.moller, t),
            }
            files: List[str] = []
            for label, section in outputs.items():
                paths = self.store.save_section(f"{spec.name}-{label}", section, binary)
                files.extend(p.name for p in paths)
            entries.append(
                {
                    "name": spec.name,
                    "support_sites": int(f.support().sum()),
                    "files": files,
                }
            )
            logger.info("scenario source %s: %d files", spec.name, len(files))
        report = {**self._header(), "grid": ctx.grid.describe(), "sources": entries}
        self.store.save_report("scenario", report)
        return report

    # ── state ──

    def _checked(self, checks: List[IdentityCheck]) -> Dict[str, Any]:
        return {
            "checks": [c.model_dump(by_alias=True) for c in checks],
            "passed": all(c.passed for c in checks),
        }

    def run_state(self) -> Dict[str, Any]:
        """Write the vacuum and pulled-back kernels with their condition residuals."""
        ctx = self.context
        checks = hadamard_suite(ctx, suite_seed(ctx.battery.seed, self.SUITES.index("hadamard")))
        kernels = []
        for name, state in (("vacuum-state", ctx.vacuum()), ("pullback-state", ctx.pulled_back())):
            extra = {
                "provenance": state.provenance,
                "zero_mode_policy": state.zero_mode_policy,
                "metadata": dict(state.metadata),
            }
            kernels.append(self.store.save_kernel(name, state.kernel, extra).name)
        report = {
            **self._header(),
            "grid": ctx.dense_moller().grid.describe(),
            "kernels": kernels,
            **self._checked(checks),
        }
        self.store.save_report("state", report)
        return report

    # ── quantize ──

    def run_quantize(self) -> Dict[str, Any]:
        """Functional-algebra demos: products of random functionals and their charged images."""
        ctx = self.context
        seed = suite_seed(ctx.battery.seed, self.SUITES.index("funcalg"))
        basis = ctx.mode_basis()
        pair = ctx.mode_pair()
        n = basis.n_modes
        cap = self.config.state.max_degree
        rng = np.random.default_rng(seed)
        f = random_functional(rng, n, [1], Bundle.UNCHARGED, cap)
        g = random_functional(rng, n, [0, 1, 2], Bundle.UNCHARGED, cap)
        charged = random_functional(rng, n, [1, 2], Bundle.CHARGED, cap)

        written = {
            "f": self.store.save_functional("demo-f", f),
            "g": self.store.save_functional("demo-g", g),
            "star": self.store.save_functional("demo-star", star(f, g, basis, ctx.vacuum())),
            "peierls": self.store.save_functional("demo-peierls", peierls(f, g, basis)),
            "charged": self.store.save_functional("demo-charged", charged),
            "moller": self.store.save_functional("demo-moller", algebra_moller(charged, pair)),
        }
        checks = funcalg_suite(ctx, seed)
        checks += theorem_suite(ctx, suite_seed(ctx.battery.seed, self.SUITES.index("theorem")))
        report = {
            **self._header(),
            "n_modes": n,
            "fit_residual": pair.fit_residual,
            "functionals": {k: p.name for k, p in written.items()},
            **self._checked(checks),
        }
        self.store.save_report("quantize", report)
        return report

    def get_status(self) -> Optional[dict]:
        """Get the progress of the last run.

        Returns:
            Progress dictionary or None if nothing has run.
        """
        return self.progress_tracker.read_progress()

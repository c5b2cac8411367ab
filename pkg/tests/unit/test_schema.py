"""Tests for schema models."""

import pytest
from pydantic import ValidationError

from moller_workbench.schema import (
    ComponentRecord,
    Config,
    FunctionalRecord,
    GridSpec,
    IdentityCheck,
    PotentialSpec,
    SuiteResult,
    Tolerances,
    VerifyReport,
)


class TestGridSpec:
    """Tests for GridSpec model."""

    def test_defaults(self):
        grid = GridSpec()
        assert grid.dim == 2
        assert grid.spatial_topology == "periodic"

    def test_cfl_above_one_rejected(self):
        """Test that dt/dx > 1 is refused."""
        with pytest.raises(ValidationError, match="cfl"):
            GridSpec(dt=0.2, dx=0.1)

    def test_unsupported_dimension(self):
        with pytest.raises(ValidationError):
            GridSpec(dim=3)


class TestPotentialSpec:
    """Tests for PotentialSpec model."""

    def test_zero_profile_needs_nothing(self):
        assert PotentialSpec().profile == "zero"

    def test_bump_needs_corners(self):
        """Test that boxed profiles require both corners."""
        with pytest.raises(ValidationError, match="corners"):
            PotentialSpec(profile="gaussian_bump", lower=[2, 3])

    def test_csv_needs_path(self):
        with pytest.raises(ValidationError, match="csv_path"):
            PotentialSpec(profile="custom_csv")


class TestTolerances:
    """Tests for Tolerances model."""

    def test_defaults(self):
        tol = Tolerances()
        assert tol.composed == 1e-10
        assert tol.single == 1e-12
        assert tol.state == 1e-8

    def test_tolerances_must_be_positive(self):
        with pytest.raises(ValidationError):
            Tolerances(composed=0.0)


class TestConfig:
    """Tests for Config model."""

    def test_valid_config(self, sample_config):
        config = Config(**sample_config)
        assert config.schema_version == 1
        assert config.battery.size == 8

    def test_config_missing_work_dir(self, sample_config):
        """Test that work_dir is required."""
        del sample_config["work_dir"]
        with pytest.raises(ValidationError):
            Config(**sample_config)

    def test_config_empty_work_dir(self, sample_config):
        sample_config["work_dir"] = "   "
        with pytest.raises(ValidationError, match="work_dir"):
            Config(**sample_config)

    def test_config_unknown_schema_version(self, sample_config):
        sample_config["schema_version"] = 2
        with pytest.raises(ValidationError):
            Config(**sample_config)


class TestIdentityCheck:
    """Tests for IdentityCheck model."""

    def test_judge_pass_and_fail(self):
        passed = IdentityCheck.judge("adjoint", 1e-13, 1e-10, "composed", 32, seed=4)
        failed = IdentityCheck.judge("adjoint", 1e-9, 1e-10, "composed", 32, seed=4)
        assert passed.passed
        assert not failed.passed

    def test_exact_needs_zero(self):
        assert IdentityCheck.judge("support", 0.0, 0.0, "exact", 1).passed
        assert not IdentityCheck.judge("support", 1.0, 0.0, "exact", 1).passed

    def test_monitor_never_fails(self):
        assert IdentityCheck.judge("order", 5.0, 0.0, "monitor", 3).passed

    def test_dump_uses_report_keys(self):
        """Test that reports carry the hyphenated field names."""
        dumped = IdentityCheck.judge("adjoint", 0.5, 1.0, "single", 8, seed=1).model_dump(
            by_alias=True
        )
        assert dumped["identity-id"] == "adjoint"
        assert dumped["battery-size"] == 8
        assert dumped["max-residual"] == 0.5
        assert dumped["pass"] is True

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            IdentityCheck.judge("adjoint", 0.0, 1.0, "approximate", 1)


class TestVerifyReport:
    """Tests for VerifyReport model."""

    def test_valid_report(self):
        suite = SuiteResult(
            suite="clifford",
            status="passed",
            checks=[IdentityCheck.judge("anticommutator", 0.0, 1e-14, "single", 1)],
        )
        report = VerifyReport(
            project_name="p",
            config_hash="0" * 64,
            seed=0,
            conventions={"signature": "mostly_minus"},
            suites=[suite],
            passed=True,
        )
        assert report.suites[0].checks[0].identity == "anticommutator"

    def test_error_kind_restricted(self):
        with pytest.raises(ValidationError):
            SuiteResult(suite="green", status="error", error="boom", error_kind="disk")


class TestFunctionalRecord:
    """Tests for functional records."""

    def test_valid_record(self):
        record = FunctionalRecord(
            n_modes=3,
            bundle="charged",
            components=[
                ComponentRecord(degree=2, indices=[[0, 2]], real=[1.0], imag=[0.0]),
            ],
        )
        assert record.components[0].indices == [[0, 2]]

    def test_unaligned_entries(self):
        with pytest.raises(ValidationError, match="equal length"):
            ComponentRecord(degree=1, indices=[[0], [1]], real=[1.0], imag=[0.0])

    def test_wrong_degree(self):
        with pytest.raises(ValidationError, match="degree"):
            ComponentRecord(degree=2, indices=[[0]], real=[1.0], imag=[0.0])

    def test_indices_must_increase(self):
        """Test that repeated or descending indices are refused."""
        with pytest.raises(ValidationError, match="increasing"):
            ComponentRecord(degree=2, indices=[[1, 1]], real=[1.0], imag=[0.0])

    def test_unknown_bundle(self):
        with pytest.raises(ValidationError):
            FunctionalRecord(n_modes=2, bundle="neutral")

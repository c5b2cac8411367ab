"""Pydantic models for workbench configuration and reports."""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class GridSpec(BaseModel):
    """Lattice geometry of the spacetime slab."""

    dim: Literal[2, 4] = Field(default=2, description="Spacetime dimension")
    nt: int = Field(default=32, ge=2, description="Number of time slices")
    nx: int = Field(default=64, ge=2, description="Sites per spatial axis")
    dt: float = Field(default=0.05, gt=0, description="Time step")
    dx: float = Field(default=0.05, gt=0, description="Spatial step")
    spatial_topology: Literal["periodic", "bounded"] = Field(
        default="periodic", description="Boundary condition of the spatial axes"
    )

    @model_validator(mode="after")
    def cfl_within_bound(self) -> "GridSpec":
        """Reject steps that violate the discrete causality bound."""
        if self.dt / self.dx > 1.0 + 1e-12:
            raise ValueError(f"cfl = dt/dx = {self.dt / self.dx:g} exceeds 1")
        return self


class ConventionSpec(BaseModel):
    """Sign conventions carried into every report."""

    signature: Literal["mostly_minus", "mostly_plus"] = Field(
        default="mostly_minus", description="Metric signature"
    )
    hermiticity: str = Field(
        default="h_hermitian_clifford", description="Hermiticity rule for Clifford multiplication"
    )


class PotentialSpec(BaseModel):
    """Compactly supported background potential."""

    profile: Literal["zero", "gaussian_bump", "box", "custom_csv"] = Field(
        default="zero", description="Shape of the potential"
    )
    amplitude: float = Field(default=0.0, description="Peak coupling strength")
    direction: Optional[List[float]] = Field(
        default=None, description="Covector direction of the potential (defaults to time)"
    )
    lower: Optional[List[int]] = Field(default=None, description="Lower support corner (t, x..)")
    upper: Optional[List[int]] = Field(
        default=None, description="Upper support corner (t, x..), inclusive"
    )
    charge: float = Field(default=1.0, description="Charge multiplying the potential")
    csv_path: Optional[str] = Field(default=None, description="CSV file for custom profiles")
    window_end: Optional[int] = Field(
        default=None, description="Last slice of the no-wraparound window"
    )

    @model_validator(mode="after")
    def profile_has_inputs(self) -> "PotentialSpec":
        """Boxed profiles need corners; CSV profiles need a path."""
        if self.profile in ("gaussian_bump", "box") and (self.lower is None or self.upper is None):
            raise ValueError(f"profile {self.profile!r} needs lower and upper corners")
        if self.profile == "custom_csv" and not self.csv_path:
            raise ValueError("profile 'custom_csv' needs csv_path")
        return self


class BatterySpec(BaseModel):
    """Randomized test sections used by the identity checks."""

    size: int = Field(default=32, ge=1, description="Sections per battery")
    seed: int = Field(default=0, ge=0, description="Root seed of every suite")
    kind: Literal["random", "delta"] = Field(
        default="random", description="Random interior sections or single-site deltas"
    )


class Tolerances(BaseModel):
    """Acceptance thresholds for the identity checks."""

    composed: float = Field(default=1e-10, gt=0, description="Identities through solver chains")
    single: float = Field(default=1e-12, gt=0, description="Single-application identities")
    gauge_covariance: float = Field(
        default=1e-6, gt=0, description="Dirac-level gauge covariance residual"
    )
    state: float = Field(default=1e-8, gt=0, description="Two-point state conditions")
    algebra: float = Field(default=1e-10, gt=0, description="Functional-algebra identities")
    dense: float = Field(default=1e-11, gt=0, description="Factorizations of dense oracle kernels")


class OracleSpec(BaseModel):
    """Dense-matrix oracle settings."""

    cap: int = Field(default=20000, ge=1, description="Largest dense index dimension")
    dense: bool = Field(default=False, description="Run dense checks in verify")
    nt: int = Field(default=24, ge=4, description="Time slices of the dense oracle grid")
    nx: int = Field(default=24, ge=4, description="Sites per axis of the dense oracle grid")


class StateSpec(BaseModel):
    """Vacuum state and functional-algebra settings."""

    zero_mode_policy: Literal["split", "exclude"] = Field(
        default="split", description="Weight of zero modes in the positive projector"
    )
    modes: int = Field(default=3, ge=1, le=16, description="Mode pairs of the algebra demos")
    mixing: float = Field(default=0.25, ge=0, description="Off-diagonal mixing of charged modes")
    max_degree: int = Field(default=6, ge=1, le=6, description="Largest functional degree")


class GaugeCheckSpec(BaseModel):
    """Gauge-independence diagnostic settings."""

    enabled: bool = Field(default=True, description="Run the gauge diagnostic")
    amplitude: float = Field(default=1e-4, description="Peak of the compact gauge phase")
    radius: float = Field(default=4.0, gt=0, description="Phase radius in cells")


class SourceSpec(BaseModel):
    """Seeded random source filling a box."""

    name: str = Field(..., description="Name used in dump file names")
    lower: List[int] = Field(..., description="Lower box corner (t, x..)")
    upper: List[int] = Field(..., description="Upper box corner (t, x..), inclusive")
    seed: int = Field(default=0, ge=0, description="Seed of the source values")


class ScenarioSpec(BaseModel):
    """Sources dumped by the scenario command."""

    sources: List[SourceSpec] = Field(default_factory=list, description="Scenario sources")
    binary: bool = Field(default=True, description="Also write binary dumps")


class Config(BaseModel):
    """Main workbench configuration."""

    schema_version: Literal[1] = Field(default=1, description="Configuration schema version")
    project_name: str = Field(default="moller-workbench", description="Project name")
    work_dir: str = Field(..., description="Directory for reports, dumps and progress")
    grid: GridSpec = Field(default_factory=GridSpec)
    convention: ConventionSpec = Field(default_factory=ConventionSpec)
    mass: float = Field(default=0.0, ge=0, description="Fermion mass")
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    battery: BatterySpec = Field(default_factory=BatterySpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    state: StateSpec = Field(default_factory=StateSpec)
    gauge_check: GaugeCheckSpec = Field(default_factory=GaugeCheckSpec)
    scenario: ScenarioSpec = Field(default_factory=ScenarioSpec)
    max_parallel_suites: int = Field(default=2, ge=1, description="Suites run concurrently")

    @field_validator("work_dir")
    @classmethod
    def work_dir_not_empty(cls, v: str) -> str:
        """Ensure the work directory is named."""
        if not v.strip():
            raise ValueError("work_dir cannot be empty")
        return v


# ── Reports ──────────────────────────────────────────────────────────────


class IdentityCheck(BaseModel):
    """Outcome of one verified identity."""

    model_config = ConfigDict(populate_by_name=True)

    identity: str = Field(..., alias="identity-id", description="Identity name")
    battery_size: int = Field(..., alias="battery-size", description="Sections checked")
    seed: Optional[int] = Field(default=None, description="Seed of the battery")
    max_residual: float = Field(..., alias="max-residual", description="Worst residual")
    tolerance: float = Field(..., description="Threshold applied")
    kind: Literal["composed", "single", "exact", "monitor"] = Field(
        ..., description="Tolerance class; monitors never fail"
    )
    passed: bool = Field(..., alias="pass", description="Whether the identity holds")
    details: str = Field(default="", description="Free-form notes")

    @classmethod
    def judge(
        cls,
        identity: str,
        residual: float,
        tolerance: float,
        kind: str,
        battery_size: int,
        seed: Optional[int] = None,
        details: str = "",
    ) -> "IdentityCheck":
        """Build a check, passing when ``residual <= tolerance`` (monitors always pass)."""
        passed = kind == "monitor" or bool(residual <= tolerance)
        return cls(
            identity=identity,
            battery_size=battery_size,
            seed=seed,
            max_residual=float(residual),
            tolerance=tolerance,
            kind=kind,
            passed=passed,
            details=details,
        )


class SuiteResult(BaseModel):
    """Checks of one suite."""

    suite: str = Field(..., description="Suite name")
    status: Literal["passed", "failed", "error"] = Field(..., description="Suite outcome")
    checks: List[IdentityCheck] = Field(default_factory=list, description="Identity checks")
    error: Optional[str] = Field(default=None, description="Error message when status is error")
    error_kind: Optional[Literal["configuration", "numeric"]] = Field(
        default=None, description="Class of the error"
    )


class VerifyReport(BaseModel):
    """Output of the verify command."""

    schema_version: Literal[1] = 1
    project_name: str = Field(..., description="Project name")
    config_hash: str = Field(..., description="SHA-256 of the canonical configuration")
    seed: int = Field(..., description="Root seed")
    conventions: Dict[str, str] = Field(
        default_factory=dict, description="Sign and normalization conventions in force"
    )
    suites: List[SuiteResult] = Field(..., description="Suite results in run order")
    passed: bool = Field(..., description="Whether every identity passed")


# ── Functional records ───────────────────────────────────────────────────


class ComponentRecord(BaseModel):
    """Nonzero increasing-index entries of one homogeneous component."""

    degree: int = Field(..., ge=0, description="Number of mode legs")
    indices: List[List[int]] = Field(default_factory=list, description="Increasing index tuples")
    real: List[float] = Field(default_factory=list, description="Real parts")
    imag: List[float] = Field(default_factory=list, description="Imaginary parts")

    @model_validator(mode="after")
    def entries_align(self) -> "ComponentRecord":
        """Every index tuple needs one value of the component's degree."""
        if not len(self.indices) == len(self.real) == len(self.imag):
            raise ValueError("indices, real and imag must have equal length")
        for idx in self.indices:
            if len(idx) != self.degree:
                raise ValueError(f"index {idx} does not have degree {self.degree}")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index {idx} is not strictly increasing")
        return self


class FunctionalRecord(BaseModel):
    """Serialized fermionic functional."""

    schema_version: Literal[1] = 1
    n_modes: int = Field(..., ge=1, description="Number of mode legs")
    bundle: Literal["uncharged", "charged"] = Field(..., description="Bundle tag")
    max_degree: int = Field(default=6, ge=0, description="Degree cap")
    components: List[ComponentRecord] = Field(default_factory=list)


class SeriesRecord(BaseModel):
    """Serialized formal power series in ħ."""

    schema_version: Literal[1] = 1
    coefficients: List[FunctionalRecord] = Field(..., description="Coefficient of ħⁿ at index n")

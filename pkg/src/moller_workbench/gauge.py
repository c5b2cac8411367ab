"""Compactly supported U(1) potentials, the pointwise coupling and entwining maps.

Potentials are stored as purely imaginary components ``𝒜_μ = i·a_μ`` in the
preferred global gauge, so the entwining maps copy components and flip the
bundle tag. The coupling acts pointwise as ``A s = i γ^μ 𝒜_μ s``.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from moller_workbench.clifford import CliffordRep
from moller_workbench.errors import BundleMismatchError, ConfigurationError, ShapeError
from moller_workbench.fields import (
    Bundle,
    DoubledSection,
    FieldMap,
    SectionSpace,
    SpinorSection,
    relative_residual,
)
from moller_workbench.grid import Region, SpacetimeGrid, check_region, cone_wraps, seminorm

logger = logging.getLogger(__name__)

PROFILES = ("zero", "gaussian_bump", "box", "custom_csv")

Section = Union[SpinorSection, DoubledSection]


@dataclass(frozen=True, eq=False)
class GaugePotential:
    """u(1)-valued one-form samples with an explicit support mask.

    ``components`` has shape ``(d,) + grid.shape`` and purely imaginary
    entries; everything outside ``support`` is zero bitwise.
    """

    grid: SpacetimeGrid
    components: np.ndarray
    support: Region

    def __post_init__(self) -> None:
        comps = np.asarray(self.components, dtype=complex)
        if comps.shape != (self.grid.dim,) + self.grid.shape:
            expected = (self.grid.dim,) + self.grid.shape
            raise ShapeError(f"potential components must have shape {expected}")
        support = check_region(self.grid, self.support)
        if np.any(comps.real != 0):
            raise ConfigurationError("potential components must be purely imaginary")
        comps = np.where(support[None], comps, 0.0 + 0.0j)
        if support[0].any() or support[-1].any():
            raise ConfigurationError("potential support must lie strictly inside the time slab")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "support", support.copy())

    @classmethod
    def zero(cls, grid: SpacetimeGrid) -> "GaugePotential":
        return cls(grid, np.zeros((grid.dim,) + grid.shape, dtype=complex), grid.empty_region())

    @property
    def is_zero(self) -> bool:
        return not np.any(self.components)

    def active_slices(self) -> np.ndarray:
        axes = tuple(range(1, self.grid.dim))
        return np.flatnonzero(np.any(self.support, axis=axes) if axes else self.support)


@dataclass(frozen=True, eq=False)
class GaugeFunction:
    """Real phase ``α`` per site; the U(1) element is ``e^{iα}``."""

    grid: SpacetimeGrid
    alpha: np.ndarray

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != self.grid.shape:
            raise ShapeError(f"gauge function must have shape {self.grid.shape}")
        if not np.all(np.isfinite(alpha)):
            raise ConfigurationError("gauge function must be finite everywhere")
        object.__setattr__(self, "alpha", alpha)

    def gradient(self) -> np.ndarray:
        """Centered differences; periodic in space, one-sided at slab ends."""
        grid = self.grid
        grads = [np.gradient(self.alpha, grid.dt, axis=0)]
        for axis in range(1, grid.dim):
            if grid.periodic:
                diff = np.roll(self.alpha, -1, axis=axis) - np.roll(self.alpha, 1, axis=axis)
                grads.append(diff / (2.0 * grid.dx))
            else:
                grads.append(np.gradient(self.alpha, grid.dx, axis=axis))
        return np.stack(grads)


# ── Loading ──────────────────────────────────────────────────────────────


def build_potential(
    grid: SpacetimeGrid,
    profile: str,
    amplitude: float = 0.0,
    direction: Optional[Sequence[float]] = None,
    lower: Optional[Sequence[int]] = None,
    upper: Optional[Sequence[int]] = None,
    charge: float = 1.0,
    csv_path: Optional[str] = None,
    window_end: Optional[int] = None,
) -> GaugePotential:
    """Build a potential from a named profile inside an index box.

    Args:
        grid: Target grid.
        profile: One of ``PROFILES``.
        amplitude: Peak value of ``a_μ`` before the direction weights.
        direction: Real weights ``w_μ``; defaults to the time direction.
        lower: Lower corner of the support box (inclusive indices).
        upper: Upper corner of the support box (inclusive indices).
        charge: Scalar charge multiplier.
        csv_path: Rows ``t, x.., mu, value`` for ``custom_csv``.
        window_end: Last slice of the observation window for the wrap check.

    Raises:
        ConfigurationError: Unknown profile, bad box or a wrapping cone.
    """
    if profile not in PROFILES:
        raise ConfigurationError(f"Unknown potential profile {profile!r}")
    if profile == "zero":
        return GaugePotential.zero(grid)
    if lower is None or upper is None:
        raise ConfigurationError("potential profile needs a support box")
    if len(lower) != grid.dim or len(upper) != grid.dim:
        raise ConfigurationError("support box corners need one index per axis")
    for lo, hi, n in zip(lower, upper, grid.shape):
        if not 0 <= lo <= hi < n:
            raise ConfigurationError(f"support box [{lo}, {hi}] outside axis of length {n}")

    support = grid.box_region(lower, upper)
    weights = np.zeros(grid.dim) if direction is None else np.asarray(direction, dtype=float)
    if direction is None:
        weights[0] = 1.0
    if weights.shape != (grid.dim,):
        raise ConfigurationError("direction weights need one entry per axis")

    if profile == "box":
        envelope = support.astype(float)
    elif profile == "gaussian_bump":
        envelope = _gaussian_envelope(grid, lower, upper) * support
    else:
        return _potential_from_csv(grid, support, csv_path, charge, window_end)

    comps = 1j * charge * amplitude * weights[(slice(None),) + (None,) * grid.dim] * envelope[None]
    potential = GaugePotential(grid, comps, support)
    validate_no_wrap(potential, window_end)
    return potential


def _gaussian_envelope(
    grid: SpacetimeGrid, lower: Sequence[int], upper: Sequence[int]
) -> np.ndarray:
    idx = np.indices(grid.shape, dtype=float)
    r2 = np.zeros(grid.shape)
    for axis, (lo, hi) in enumerate(zip(lower, upper)):
        center = 0.5 * (lo + hi)
        width = max(0.25 * (hi - lo + 1), 0.5)
        r2 += ((idx[axis] - center) / width) ** 2
    return np.exp(-0.5 * r2)


def _potential_from_csv(
    grid: SpacetimeGrid,
    support: Region,
    csv_path: Optional[str],
    charge: float,
    window_end: Optional[int],
) -> GaugePotential:
    if csv_path is None or not Path(csv_path).exists():
        raise ConfigurationError(f"custom_csv potential file not found: {csv_path}")
    rows = np.atleast_2d(np.loadtxt(csv_path, delimiter=",", comments="#"))
    if rows.shape[1] != grid.dim + 2:
        raise ConfigurationError("custom_csv rows must be t, x.., mu, value")
    comps = np.zeros((grid.dim,) + grid.shape, dtype=complex)
    for row in rows:
        site = tuple(int(v) for v in row[: grid.dim])
        comps[(int(row[grid.dim]),) + site] = 1j * charge * row[-1]
    potential = GaugePotential(grid, comps, support)
    validate_no_wrap(potential, window_end)
    return potential


def validate_no_wrap(potential: GaugePotential, window_end: Optional[int] = None) -> None:
    """Refuse supports whose forward cone wraps inside the observation window."""
    grid = potential.grid
    if not potential.support.any():
        return
    end = grid.nt if window_end is None else min(window_end + 1, grid.nt)
    if end <= 0:
        return
    window = SpacetimeGrid(grid.dim, end, grid.nx, grid.dt, grid.dx, grid.spatial_topology)
    if window.nt >= 2 and cone_wraps(window, potential.support[:end]):
        raise ConfigurationError(
            "forward cone of the potential support wraps around the periodic direction "
            "inside the observation window"
        )


# ── Entwining maps ───────────────────────────────────────────────────────


def _retag(section: Section, source: Bundle, target: Bundle) -> Section:
    if section.bundle != source:
        raise BundleMismatchError(f"expected a {source.value} section, got {section.bundle.value}")
    if isinstance(section, DoubledSection):
        return DoubledSection(section.u1.retag(target), section.u2.retag(target))
    return section.retag(target)


def entwine_i(section: Section) -> Section:
    """Uncharged → charged, component identity in the preferred gauge."""
    return _retag(section, Bundle.UNCHARGED, Bundle.CHARGED)


def entwine_p(section: Section) -> Section:
    """Charged → uncharged, inverse of :func:`entwine_i`."""
    return _retag(section, Bundle.CHARGED, Bundle.UNCHARGED)


def entwine_map(space: SectionSpace, target: Bundle) -> FieldMap:
    """Entwining map as a flat linear map from ``space`` to ``target``."""
    if space.bundle == target:
        raise BundleMismatchError("entwining map must change the bundle")
    name = "entwine_i" if target == Bundle.CHARGED else "entwine_p"
    return FieldMap(name, space, space.retag(target), lambda x: x.copy())


# ── Coupling ─────────────────────────────────────────────────────────────


def coupling_blocks(
    rep: CliffordRep, potential: GaugePotential, gauge: Optional[GaugeFunction] = None
) -> np.ndarray:
    """Per-site matrices ``i γ^μ 𝒜_μ`` of shape ``grid.shape + (F, F)``.

    With ``gauge`` the Maurer–Cartan term ``i ∂_μ α`` is removed from the
    components first, which is how the map reads in a transformed frame.
    """
    comps = potential.components
    if gauge is not None:
        comps = comps - 1j * gauge.gradient()
    return 1j * np.einsum("m...,mij->...ij", comps, rep.gammas)


def apply_A(
    rep: CliffordRep,
    potential: GaugePotential,
    section: Section,
    gauge: Optional[GaugeFunction] = None,
) -> Section:
    """Apply the coupling pointwise to a charged section.

    The conjugate leg is acted on by the conjugate blocks.

    Raises:
        BundleMismatchError: If the section is uncharged.
        ShapeError: If grids differ.
    """
    if section.bundle != Bundle.CHARGED:
        raise BundleMismatchError("the coupling acts on charged sections only")
    if section.grid != potential.grid:
        raise ShapeError("section and potential live on different grids")
    blocks = coupling_blocks(rep, potential, gauge)
    if isinstance(section, DoubledSection):
        return DoubledSection(
            _apply_blocks(blocks, section.u1), _apply_blocks(blocks.conj(), section.u2)
        )
    return _apply_blocks(blocks.conj() if section.conjugate else blocks, section)


def _apply_blocks(blocks: np.ndarray, section: SpinorSection) -> SpinorSection:
    return section.with_values(np.einsum("...ij,...j->...i", blocks, section.values))


# ── Gauge transformations ────────────────────────────────────────────────


def gauge_transform(potential: GaugePotential, chi: GaugeFunction) -> GaugePotential:
    """Shift ``𝒜_μ → 𝒜_μ + i ∂_μ α`` with centered differences.

    Raises:
        ConfigurationError: If the transformed support reaches the slab ends.
    """
    grad = chi.gradient()
    support = potential.support | np.any(grad != 0, axis=0)
    if support[0].any() or support[-1].any():
        raise ConfigurationError("transformed potential support escapes the grid margin")
    return GaugePotential(potential.grid, potential.components + 1j * grad, support)


def transform_section(section: Section, chi: GaugeFunction) -> Section:
    """``s ↦ e^{-iα} s`` on spinor legs, ``e^{+iα}`` on conjugate legs."""
    phase = np.exp(-1j * chi.alpha)[..., None]
    if isinstance(section, DoubledSection):
        return DoubledSection(
            section.u1.with_values(phase * section.u1.values),
            section.u2.with_values(phase.conj() * section.u2.values),
        )
    use = phase.conj() if section.conjugate else phase
    return section.with_values(use * section.values)


def inverse_chi(chi: GaugeFunction) -> GaugeFunction:
    return GaugeFunction(chi.grid, -chi.alpha)


@dataclass(frozen=True)
class GaugeCheck:
    """Residuals of the gauge-independence diagnostic."""

    coupling_residual: float
    covariance_residual: Optional[float]


def check_gauge_independence(
    rep: CliffordRep,
    potential: GaugePotential,
    chi: GaugeFunction,
    sections: Sequence[SpinorSection],
    dirac_factory: Optional[Callable[[GaugePotential], FieldMap]] = None,
) -> GaugeCheck:
    """Compare the coupling (and optionally the Dirac operator) across gauges.

    The coupling residual compares ``e^{iα} A'(e^{-iα} s)`` against ``A s``,
    where ``A'`` is read in the transformed frame; it is exact up to rounding.
    The covariance residual compares ``e^{iα} Dᴳ'(e^{-iα} s)`` against
    ``Dᴳ s``; it carries the lattice error of the gradient and of the time links.
    """
    transformed = gauge_transform(potential, chi)
    back = inverse_chi(chi)
    lhs, rhs = [], []
    for s in sections:
        moved = transform_section(s, chi)
        lhs.append(transform_section(apply_A(rep, transformed, moved, gauge=chi), back).values)
        rhs.append(apply_A(rep, potential, s).values)
    coupling = relative_residual(np.stack(lhs), np.stack(rhs))

    covariance = None
    if dirac_factory is not None:
        original = dirac_factory(potential)
        shifted = dirac_factory(transformed)
        lhs, rhs = [], []
        for s in sections:
            lhs.append(transform_section(shifted(transform_section(s, chi)), back).values)
            rhs.append(original(s).values)
        covariance = relative_residual(np.stack(lhs), np.stack(rhs))
    logger.debug("gauge check coupling=%.3e covariance=%s", coupling, covariance)
    return GaugeCheck(coupling, covariance)


# ── Boundedness monitor ──────────────────────────────────────────────────


def entwine_bound_ratio(
    grid: SpacetimeGrid,
    potential: GaugePotential,
    sections: Sequence[Section],
    region: Region,
    n: int,
) -> float:
    """Largest ratio of the charged seminorm of ``𝔦 s`` to the seminorm of ``s``."""
    worst = 0.0
    for s in sections:
        base = seminorm(grid, s, region, n)
        if base == 0.0:
            continue
        worst = max(worst, seminorm(grid, entwine_i(s), region, n, potential) / base)
    return worst

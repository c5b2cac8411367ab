"""Discretized product spacetime with causal-set queries and seminorms.

Regions are boolean masks of shape ``(nt, nx, ..)``. The discrete lightcone
advances one cell per slice in Chebyshev distance, which matches the radius
of the Dirac transfer step at ``cfl = 1``.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from moller_workbench.errors import BoundaryError, ConfigurationError, ShapeError

if TYPE_CHECKING:
    from moller_workbench.gauge import GaugePotential

logger = logging.getLogger(__name__)

Region = np.ndarray

TOPOLOGIES = ("periodic", "bounded")
_CFL_SLACK = 1e-12


@dataclass(frozen=True)
class SpacetimeGrid:
    """Uniform grid over ``[0, nt·dt) × Σ`` with ``Σ`` a torus or a box."""

    dim: int
    nt: int
    nx: int
    dt: float
    dx: float
    spatial_topology: str = "periodic"

    def __post_init__(self) -> None:
        if self.dim not in (2, 4):
            raise ConfigurationError(f"Unsupported grid dimension {self.dim}")
        if self.nt < 2 or self.nx < 2:
            raise ConfigurationError("Grid needs nt >= 2 and nx >= 2")
        if self.dt <= 0 or self.dx <= 0:
            raise ConfigurationError("Grid steps must be positive")
        if self.spatial_topology not in TOPOLOGIES:
            raise ConfigurationError(f"Unknown spatial topology {self.spatial_topology!r}")
        if self.cfl > 1.0 + _CFL_SLACK:
            raise ConfigurationError(f"cfl = dt/dx = {self.cfl:g} exceeds 1")

    @property
    def cfl(self) -> float:
        return self.dt / self.dx

    @property
    def periodic(self) -> bool:
        return self.spatial_topology == "periodic"

    @property
    def spatial_shape(self) -> Tuple[int, ...]:
        return (self.nx,) * (self.dim - 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nt,) + self.spatial_shape

    @property
    def sites_per_slice(self) -> int:
        return self.nx ** (self.dim - 1)

    @property
    def volume(self) -> float:
        """Uniform volume weight dt·dx^(d-1)."""
        return self.dt * self.dx ** (self.dim - 1)

    def empty_region(self) -> Region:
        return np.zeros(self.shape, dtype=bool)

    def site_region(self, sites: Iterable[Sequence[int]]) -> Region:
        region = self.empty_region()
        for site in sites:
            region[tuple(site)] = True
        return region

    def box_region(self, lower: Sequence[int], upper: Sequence[int]) -> Region:
        """Closed index box ``lower <= index <= upper`` per axis."""
        region = self.empty_region()
        region[tuple(slice(lo, hi + 1) for lo, hi in zip(lower, upper))] = True
        return region

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "nt": self.nt,
            "nx": self.nx,
            "dt": self.dt,
            "dx": self.dx,
            "spatial_topology": self.spatial_topology,
            "cfl": self.cfl,
        }


def check_region(grid: SpacetimeGrid, region: Region) -> Region:
    region = np.asarray(region)
    if region.shape != grid.shape or region.dtype != bool:
        raise ShapeError(f"region must be a bool mask of shape {grid.shape}")
    return region


def _dilate(grid: SpacetimeGrid, mask: np.ndarray) -> np.ndarray:
    mode = "wrap" if grid.periodic else "constant"
    grown = ndimage.maximum_filter(mask.astype(np.uint8), size=3, mode=mode, cval=0)
    return grown.astype(bool)


def causal_future(grid: SpacetimeGrid, region: Region) -> Region:
    """Sites reachable from ``region`` at lightspeed one cell per slice."""
    region = check_region(grid, region)
    out = region.copy()
    for t in range(1, grid.nt):
        if out[t - 1].any():
            out[t] |= _dilate(grid, out[t - 1])
    return out


def causal_past(grid: SpacetimeGrid, region: Region) -> Region:
    """Time mirror of :func:`causal_future`."""
    region = check_region(grid, region)
    out = region.copy()
    for t in range(grid.nt - 2, -1, -1):
        if out[t + 1].any():
            out[t] |= _dilate(grid, out[t + 1])
    return out


def time_mirror(region: Region) -> Region:
    return np.ascontiguousarray(region[::-1])


def cone_wraps(grid: SpacetimeGrid, region: Region, future: bool = True) -> bool:
    """True if the cone of ``region`` wraps around a periodic spatial axis.

    Detected by comparing the periodic cone with the cone of the same region
    on an unwrapped, bounded copy of the grid.
    """
    if not grid.periodic or not region.any():
        return False
    bounded = SpacetimeGrid(grid.dim, grid.nt, grid.nx, grid.dt, grid.dx, "bounded")
    query = causal_future if future else causal_past
    return not np.array_equal(query(grid, region), query(bounded, region))


def encode_region(region: Region) -> List[int]:
    """Run-length encode a mask in C order, starting with a ``False`` run."""
    flat = np.asarray(region, dtype=bool).ravel()
    runs: List[int] = []
    current, count = False, 0
    for value in flat:
        if bool(value) == current:
            count += 1
        else:
            runs.append(count)
            current, count = not current, 1
    runs.append(count)
    return runs


def decode_region(grid: SpacetimeGrid, runs: Sequence[int]) -> Region:
    values = []
    current = False
    for count in runs:
        values.extend([current] * int(count))
        current = not current
    if len(values) != int(np.prod(grid.shape)):
        raise ShapeError("run lengths do not cover the grid")
    return np.array(values, dtype=bool).reshape(grid.shape)


# ── Seminorms ──────────────────────────────────────────────────────────────


def _difference(grid: SpacetimeGrid, values: np.ndarray, axis: int) -> np.ndarray:
    step = grid.dt if axis == 0 else grid.dx
    if axis > 0 and grid.periodic:
        return (np.roll(values, -1, axis=axis) - values) / step
    forward = np.diff(values, axis=axis) / step
    last = np.take(forward, [-1], axis=axis)
    return np.concatenate([forward, last], axis=axis)


def covariant_difference(
    grid: SpacetimeGrid,
    values: np.ndarray,
    axis: int,
    potential: Optional["GaugePotential"] = None,
    charge: int = 1,
) -> np.ndarray:
    """First covariant difference along one axis of a leg ``(nt, .., F)``.

    ``charge`` is +1 on the spinor leg and -1 on the conjugate leg.
    """
    out = _difference(grid, values, axis)
    if potential is not None:
        comp = potential.components[axis]
        if charge < 0:
            comp = comp.conj()
        out = out + comp[..., None] * values
    return out


def seminorm(
    grid: SpacetimeGrid,
    section,
    region: Region,
    n: int,
    potential: Optional["GaugePotential"] = None,
) -> float:
    """Discrete ``C^n`` seminorm of a section over a region.

    Args:
        grid: The grid the section lives on.
        section: A ``SpinorSection`` or ``DoubledSection``.
        region: Nonempty mask; the sup is taken over its sites.
        n: Highest derivative order.
        potential: Gauge potential for charged sections; ignored otherwise.

    Returns:
        max over i <= n of the sup-norm of all i-th iterated differences.

    Raises:
        BoundaryError: If ``n`` is at least the length of a non-periodic axis.
    """
    region = check_region(grid, region)
    if n < 0:
        raise ValueError("seminorm order must be non-negative")
    if not region.any():
        raise ValueError("seminorm region must be nonempty")
    lengths = [grid.nt] + ([] if grid.periodic else list(grid.spatial_shape))
    if n >= min(lengths):
        raise BoundaryError(f"order {n} exceeds the stencil width available on this grid")

    legs = section.legs()
    use_potential = potential if section.is_charged else None
    level: List[List[np.ndarray]] = [[leg.values for leg in legs]]
    best = _sup_norm(level[0], region)
    for _ in range(n):
        nxt = []
        for arrays in level:
            for axis in range(grid.dim):
                nxt.append(
                    [
                        covariant_difference(grid, arr, axis, use_potential, leg.charge)
                        for arr, leg in zip(arrays, legs)
                    ]
                )
        level = nxt
        best = max(best, max(_sup_norm(arrays, region) for arrays in level))
    return best


def _sup_norm(arrays: List[np.ndarray], region: Region) -> float:
    sq = sum(np.sum(np.abs(a) ** 2, axis=-1) for a in arrays)
    return float(np.sqrt(np.max(sq[region])))



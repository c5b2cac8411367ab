"""Discrete section spaces, the doubled space and its pairing.

Cospinors are stored as conjugate component arrays in the same frame, so the
conjugation maps are componentwise complex conjugation. Every section carries
a bundle tag and every binary operation checks it.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from moller_workbench.clifford import CliffordRep
from moller_workbench.errors import BundleMismatchError, ShapeError
from moller_workbench.grid import SpacetimeGrid


class Bundle(str, Enum):
    """Which spinor bundle a section belongs to."""

    UNCHARGED = "uncharged"
    CHARGED = "charged"


@dataclass(frozen=True)
class Leg:
    """One component array of a section with the sign of its U(1) charge."""

    values: np.ndarray
    charge: int


def _require_same_bundle(a: Bundle, b: Bundle) -> None:
    if a != b:
        raise BundleMismatchError(f"cannot combine {a.value} with {b.value} sections")


@dataclass(frozen=True, eq=False)
class SpinorSection:
    """Grid function with values of shape ``(nt, nx, .., F)``.

    ``conjugate`` marks a section of the conjugate bundle (a cospinor).
    """

    grid: SpacetimeGrid
    bundle: Bundle
    values: np.ndarray
    conjugate: bool = False

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape[:-1] != self.grid.shape or values.ndim != self.grid.dim + 1:
            raise ShapeError(
                f"section values must have shape {self.grid.shape} + (F,), got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(
        cls, grid: SpacetimeGrid, fiber: int, bundle: Bundle, conjugate: bool = False
    ) -> "SpinorSection":
        return cls(grid, bundle, np.zeros(grid.shape + (fiber,), dtype=complex), conjugate)

    @property
    def fiber(self) -> int:
        return int(self.values.shape[-1])

    @property
    def is_charged(self) -> bool:
        return self.bundle == Bundle.CHARGED

    def legs(self) -> List[Leg]:
        return [Leg(self.values, -1 if self.conjugate else 1)]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray) -> "SpinorSection":
        return SpinorSection(self.grid, self.bundle, values, self.conjugate)

    def retag(self, bundle: Bundle) -> "SpinorSection":
        return SpinorSection(self.grid, bundle, self.values.copy(), self.conjugate)

    def support(self) -> np.ndarray:
        return np.any(self.values != 0, axis=-1)

    def _check(self, other: "SpinorSection") -> None:
        _require_same_bundle(self.bundle, other.bundle)
        if other.grid != self.grid or other.conjugate != self.conjugate:
            raise ShapeError("sections live on different grids or fibers")

    def __add__(self, other: "SpinorSection") -> "SpinorSection":
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SpinorSection") -> "SpinorSection":
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: complex) -> "SpinorSection":
        return self.with_values(scalar * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DoubledSection:
    """Element ``(u1, u2)`` of the spinor ⊕ cospinor space."""

    u1: SpinorSection
    u2: SpinorSection

    def __post_init__(self) -> None:
        _require_same_bundle(self.u1.bundle, self.u2.bundle)
        if self.u1.grid != self.u2.grid:
            raise ShapeError("doubled section parts live on different grids")
        if self.u1.conjugate or not self.u2.conjugate:
            raise ShapeError("doubled section needs (spinor, cospinor) parts")

    @classmethod
    def zeros(cls, grid: SpacetimeGrid, fiber: int, bundle: Bundle) -> "DoubledSection":
        return cls(
            SpinorSection.zeros(grid, fiber, bundle),
            SpinorSection.zeros(grid, fiber, bundle, conjugate=True),
        )

    @classmethod
    def from_arrays(
        cls, grid: SpacetimeGrid, bundle: Bundle, v1: np.ndarray, v2: np.ndarray
    ) -> "DoubledSection":
        return cls(SpinorSection(grid, bundle, v1), SpinorSection(grid, bundle, v2, True))

    @property
    def grid(self) -> SpacetimeGrid:
        return self.u1.grid

    @property
    def bundle(self) -> Bundle:
        return self.u1.bundle

    @property
    def fiber(self) -> int:
        return self.u1.fiber

    @property
    def is_charged(self) -> bool:
        return self.bundle == Bundle.CHARGED

    def legs(self) -> List[Leg]:
        return self.u1.legs() + self.u2.legs()

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u1.flat(), self.u2.flat()])

    def support(self) -> np.ndarray:
        return self.u1.support() | self.u2.support()

    def __add__(self, other: "DoubledSection") -> "DoubledSection":
        return DoubledSection(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "DoubledSection") -> "DoubledSection":
        return DoubledSection(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: complex) -> "DoubledSection":
        return DoubledSection(scalar * self.u1, scalar * self.u2)

    __rmul__ = __mul__


Section = Union[SpinorSection, DoubledSection]


@dataclass(frozen=True)
class SectionSpace:
    """Shape and tags of a section space; the domain/codomain of linear maps."""

    grid: SpacetimeGrid
    fiber: int
    bundle: Bundle
    kind: str = "spinor"

    @classmethod
    def of(cls, section: Section) -> "SectionSpace":
        if isinstance(section, DoubledSection):
            kind = "doubled"
        else:
            kind = "cospinor" if section.conjugate else "spinor"
        return cls(section.grid, section.fiber, section.bundle, kind)

    @property
    def leg_shape(self) -> Tuple[int, ...]:
        return self.grid.shape + (self.fiber,)

    @property
    def leg_dim(self) -> int:
        return int(np.prod(self.leg_shape))

    @property
    def dim(self) -> int:
        return 2 * self.leg_dim if self.kind == "doubled" else self.leg_dim

    def retag(self, bundle: Bundle) -> "SectionSpace":
        return SectionSpace(self.grid, self.fiber, bundle, self.kind)

    def from_flat(self, x: np.ndarray) -> Section:
        if x.shape != (self.dim,):
            raise ShapeError(f"flat vector must have length {self.dim}, got {x.shape}")
        if self.kind == "doubled":
            half = self.leg_dim
            return DoubledSection.from_arrays(
                self.grid,
                self.bundle,
                x[:half].reshape(self.leg_shape),
                x[half:].reshape(self.leg_shape),
            )
        return SpinorSection(
            self.grid, self.bundle, x.reshape(self.leg_shape), self.kind == "cospinor"
        )

    def check(self, section: Section) -> None:
        other = SectionSpace.of(section)
        _require_same_bundle(self.bundle, other.bundle)
        if other != self:
            raise ShapeError(f"expected a {self.kind} section on {self.grid.shape}")


@dataclass(frozen=True)
class FieldMap:
    """Linear map between section spaces acting on flattened values.

    ``apply_flat`` takes ``(dim,)`` or ``(dim, k)`` arrays, so dense
    materialization can push identity blocks through in one call.
    """

    name: str
    domain: SectionSpace
    codomain: SectionSpace
    apply_flat: Callable[[np.ndarray], np.ndarray]

    def __call__(self, section: Section) -> Section:
        self.domain.check(section)
        return self.codomain.from_flat(self.apply_flat(section.flat()))


# ── Pointwise fiber algebra ───────────────────────────────────────────────


def apply_pointwise(blocks: np.ndarray, x: np.ndarray, fiber: int) -> np.ndarray:
    """Multiply each site's fiber block into a flat slice vector or batch.

    Args:
        blocks: ``(F, F)`` for a constant matrix or ``(n_sites, F, F)``.
        x: ``(n_sites·F,)`` or ``(n_sites·F, k)``.
        fiber: Fiber dimension ``F``.
    """
    batch = x.shape[1:]
    xs = x.reshape((-1, fiber) + batch)
    if blocks.ndim == 2:
        out = np.einsum("ij,sj...->si...", blocks, xs)
    else:
        out = np.einsum("sij,sj...->si...", blocks, xs)
    return out.reshape(x.shape)


# ── Involution, pairings, integration ─────────────────────────────────────


def involution(u: DoubledSection) -> DoubledSection:
    """``u* = (C u2, C⁻¹ u1)`` with C componentwise conjugation."""
    return DoubledSection(
        SpinorSection(u.grid, u.bundle, u.u2.values.conj(), conjugate=False),
        SpinorSection(u.grid, u.bundle, u.u1.values.conj(), conjugate=True),
    )


def leg_pairing(rep: CliffordRep, spinor: np.ndarray, cospinor: np.ndarray) -> np.ndarray:
    """Pointwise ``(φ, ξ) = ξᵀ h φ`` over stacked leg arrays."""
    return np.einsum("...j,jk,...k->...", cospinor, rep.h, spinor)


def doubled_pairing(rep: CliffordRep, u: DoubledSection, v: DoubledSection) -> np.ndarray:
    """Pointwise symmetric pairing ``(v1, u2) + (u1, v2)``.

    Raises:
        BundleMismatchError: If ``u`` and ``v`` carry different bundle tags.
    """
    _require_same_bundle(u.bundle, v.bundle)
    if u.grid != v.grid:
        raise ShapeError("sections live on different grids")
    # a + b == b + a in IEEE arithmetic, so swapping u and v is exact
    return leg_pairing(rep, v.u1.values, u.u2.values) + leg_pairing(rep, u.u1.values, v.u2.values)


def integrate(grid: SpacetimeGrid, field: np.ndarray) -> complex:
    """Weighted sum ``Σ field · dt·dx^(d-1)``."""
    field = np.asarray(field)
    if field.shape != grid.shape:
        raise ShapeError(f"scalar field must have shape {grid.shape}")
    return complex(np.sum(field) * grid.volume)


def global_pairing(rep: CliffordRep, u: DoubledSection, v: DoubledSection) -> complex:
    """Symmetric bilinear ``⟨u, v⟩ = ∫ (u, v)``."""
    return integrate(u.grid, doubled_pairing(rep, u, v))


def hermitian_pairing(rep: CliffordRep, s: SpinorSection, t: SpinorSection) -> complex:
    """Hermitian ``⟨s, t⟩ = ∫ conj(s)ᵀ h t`` on spinor sections of one bundle."""
    s._check(t)
    local = np.einsum("...j,jk,...k->...", s.values.conj(), rep.h, t.values)
    return integrate(s.grid, local)


def relative_residual(lhs: np.ndarray, rhs: np.ndarray, scale: float = 0.0) -> float:
    """``‖lhs - rhs‖ / max(‖lhs‖, ‖rhs‖, scale)`` with Frobenius norms.

    ``scale`` keeps identities whose target is zero meaningful.
    """
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    denom = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)), scale, 1e-300)
    return float(np.linalg.norm(lhs - rhs)) / denom


def column_residual(lhs: np.ndarray, rhs: np.ndarray, scale: float = 0.0) -> float:
    """Worst ``relative_residual`` over the columns of a ``(dim, k)`` battery."""
    lhs = np.asarray(lhs).reshape(lhs.shape[0], -1)
    rhs = np.asarray(rhs).reshape(rhs.shape[0], -1)
    return max(relative_residual(lhs[:, j], rhs[:, j], scale) for j in range(lhs.shape[1]))


# ── Test batteries ────────────────────────────────────────────────────────


def flat_battery(
    space: SectionSpace,
    rng: np.random.Generator,
    size: int,
    kind: str = "random",
    interior: bool = True,
    region: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Seeded ``(space.dim, size)`` block of test sections.

    Args:
        space: Section space the columns live in.
        rng: Generator the values are drawn from.
        size: Number of columns.
        kind: ``"random"`` for complex Gaussian values, ``"delta"`` for
            single-site unit vectors.
        interior: Keep the first and last time slices empty.
        region: Optional mask further restricting the support.
    """
    grid = space.grid
    mask = np.ones(grid.shape, dtype=bool)
    if interior:
        mask[0] = False
        mask[-1] = False
    if region is not None:
        mask &= region
    legs = 2 if space.kind == "doubled" else 1
    leg_mask = np.broadcast_to(mask[..., None], space.leg_shape).reshape(-1)
    entry_mask = np.tile(leg_mask, legs)
    out = np.zeros((space.dim, size), dtype=complex)
    allowed = np.flatnonzero(entry_mask)
    if allowed.size == 0:
        return out
    if kind == "delta":
        out[rng.choice(allowed, size=size), np.arange(size)] = 1.0
        return out
    values = rng.normal(size=(allowed.size, size)) + 1j * rng.normal(size=(allowed.size, size))
    out[allowed] = values
    return out


def involution_flat(x: np.ndarray, leg_dim: int) -> np.ndarray:
    """``involution`` on flat doubled vectors or batches."""
    return np.concatenate([x[leg_dim:].conj(), x[:leg_dim].conj()])

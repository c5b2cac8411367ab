"""Finite mode bases of doubled sections and their kernel matrices.

An uncharged basis holds ``n`` interior-supported spinor bumps ``φ_k`` in the
pairs ``(φ_k, 0)`` and ``(0, conj φ_k)``, so the doubled involution permutes
modes. The charged partner basis is the image of a mixed copy under the
adjoint inverse Møller map; with it the adjoint Møller map sends charged
modes into the uncharged span, which makes the algebra-level Møller map a
finite contraction. An independently placed charged basis is fitted the same
way and reported as in or out of that span.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from moller_workbench.clifford import CliffordRep
from moller_workbench.errors import BundleMismatchError, ConfigurationError, NumericFailure
from moller_workbench.fields import (
    Bundle,
    DoubledSection,
    SectionSpace,
    apply_pointwise,
    relative_residual,
)
from moller_workbench.funcalg.conventions import DEFAULT_MAX_MODES
from moller_workbench.green import DiracOperator, doubled_green
from moller_workbench.grid import SpacetimeGrid
from moller_workbench.hadamard import TwoPointState
from moller_workbench.moller import MollerMap

logger = logging.getLogger(__name__)

_GRAM_CONDITION_LIMIT = 1e10
FIT_TOLERANCE = 1e-10


def pairing_apply(rep: CliffordRep, grid: SpacetimeGrid, x: np.ndarray) -> np.ndarray:
    """``P x`` with ``⟨u, v⟩ = uᵀ P v`` on flat doubled vectors or batches."""
    half = x.shape[0] // 2
    top = apply_pointwise(rep.h.T, x[half:], rep.fiber)
    bottom = apply_pointwise(rep.h, x[:half], rep.fiber)
    return grid.volume * np.concatenate([top, bottom])


@dataclass(eq=False)
class ModeBasis:
    """Columns of ``vectors`` are the flat doubled modes ``φ_a``.

    ``involution`` is the permutation ``J`` with ``φ_a* = φ_{J(a)}``.
    """

    dirac: DiracOperator
    space: SectionSpace
    vectors: np.ndarray
    involution: np.ndarray
    gram: np.ndarray = field(init=False)
    _causal: Optional[np.ndarray] = field(default=None, init=False, repr=False)
    _two_point: Dict[int, Tuple[TwoPointState, np.ndarray]] = field(
        default_factory=dict, init=False, repr=False
    )
    _lock: Any = field(default_factory=threading.RLock, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dirac.bundle != self.space.bundle:
            raise BundleMismatchError("mode basis and Dirac operator carry different bundles")
        if self.space.kind != "doubled":
            raise ConfigurationError("mode bases live in the doubled space")
        if self.vectors.shape[0] != self.space.dim:
            raise ConfigurationError("mode vectors do not match the section space")
        if sorted(self.involution.tolist()) != list(range(self.n_modes)):
            raise ConfigurationError("mode involution must be a permutation")
        self.gram = self.vectors.T @ self.pair(self.vectors)
        cond = np.linalg.cond(self.gram)
        if not np.isfinite(cond) or cond > _GRAM_CONDITION_LIMIT:
            raise NumericFailure(f"mode Gram matrix is singular (condition {cond:.3g})")

    @property
    def rep(self) -> CliffordRep:
        return self.dirac.rep

    @property
    def n_modes(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def bundle(self) -> Bundle:
        return self.space.bundle

    @property
    def grid(self) -> SpacetimeGrid:
        return self.space.grid

    def pair(self, x: np.ndarray) -> np.ndarray:
        return pairing_apply(self.rep, self.grid, x)

    def modes(self) -> List[DoubledSection]:
        return [self.space.from_flat(self.vectors[:, a]) for a in range(self.n_modes)]

    def section(self, coordinates: np.ndarray) -> DoubledSection:
        return self.space.from_flat(self.vectors @ np.asarray(coordinates, dtype=complex))

    def coordinates(self, u: DoubledSection) -> np.ndarray:
        """Least-squares coordinates of ``u`` in the basis."""
        self.space.check(u)
        coeffs, *_ = np.linalg.lstsq(self.vectors, u.flat(), rcond=None)
        return coeffs

    def duals(self, coordinates: np.ndarray) -> np.ndarray:
        """``ℓ_a(u) = ⟨φ_a, u⟩`` for ``u`` given by coordinates."""
        return self.gram @ np.asarray(coordinates, dtype=complex)

    def check_bundle(self, bundle: Bundle, what: str) -> None:
        if bundle != self.bundle:
            raise BundleMismatchError(
                f"{what} is {bundle.value} but the mode basis is {self.bundle.value}"
            )

    # ── Kernels ──

    def causal_kernel(self) -> np.ndarray:
        """``K_ab = ⟨φ_a, S⊕ φ_b⟩``, symmetrized; built once, safe across threads."""
        with self._lock:
            if self._causal is None:
                images = doubled_green(self.dirac).causal.apply_flat(self.vectors)
                k = self.vectors.T @ self.pair(images)
                self._causal = 0.5 * (k + k.T)
            return self._causal

    def two_point_kernel(self, state: TwoPointState) -> np.ndarray:
        """``W_ab = ω(φ_a, φ_b)``."""
        self.check_bundle(state.bundle, "the state")
        if state.space.grid != self.grid:
            raise ConfigurationError("state and mode basis live on different grids")
        with self._lock:
            cached = self._two_point.get(id(state))
            if cached is not None and cached[0] is state:
                return cached[1]
            w = self.vectors.T @ (state.matrix @ self.vectors)
            self._two_point[id(state)] = (state, w)
            return w

    def kernel_consistency(self, state: TwoPointState) -> float:
        """Relative size of ``W + Wᵀ − iK``."""
        w = self.two_point_kernel(state)
        k = self.causal_kernel()
        return relative_residual(w + w.T, 1j * k)


def _bump(grid: SpacetimeGrid, center: Tuple[int, ...], width: float) -> np.ndarray:
    idx = np.indices(grid.shape)
    dist2 = np.zeros(grid.shape)
    cheb = np.zeros(grid.shape, dtype=int)
    for axis, c in enumerate(center):
        delta = idx[axis] - c
        if axis > 0:
            n = grid.shape[axis]
            delta = (delta + n // 2) % n - n // 2
        dist2 += delta**2
        cheb = np.maximum(cheb, np.abs(delta))
    values = np.exp(-dist2 / (2.0 * width**2))
    values[cheb > 2] = 0.0
    values[0] = 0.0
    values[-1] = 0.0
    return values


def _bump_columns(
    rep: CliffordRep,
    space: SectionSpace,
    n_pairs: int,
    seed: int,
    self_conjugate: bool,
    width: float,
) -> Tuple[np.ndarray, np.ndarray]:
    grid = space.grid
    rng = np.random.default_rng(seed)
    _, eigvecs = np.linalg.eigh(rep.h)
    top = eigvecs[:, -1]

    spinors = []
    for k in range(n_pairs):
        t_c = int(rng.integers(2, grid.nt - 2))
        spatial = tuple(
            int((k + 1) * n // (n_pairs + 1) + rng.integers(-1, 2)) % n
            for n in grid.spatial_shape
        )
        direction = np.exp(2j * np.pi * rng.random()) * top
        noise = rng.normal(size=rep.fiber) + 1j * rng.normal(size=rep.fiber)
        direction = direction + 0.2 * noise
        profile = _bump(grid, (t_c,) + spatial, width)
        spinors.append((profile[..., None] * direction).reshape(-1))

    zero = np.zeros(space.leg_dim, dtype=complex)
    if self_conjugate:
        columns = [np.concatenate([s, s.conj()]) for s in spinors]
        involution = np.arange(n_pairs)
    else:
        columns = [np.concatenate([s, zero]) for s in spinors]
        columns += [np.concatenate([zero, s.conj()]) for s in spinors]
        involution = np.concatenate([np.arange(n_pairs, 2 * n_pairs), np.arange(n_pairs)])
    return np.stack(columns, axis=1), involution


def build_mode_basis(
    op: DiracOperator,
    n_pairs: int = 3,
    seed: int = 0,
    self_conjugate: bool = False,
    width: float = 1.0,
) -> ModeBasis:
    """Uncharged basis of seeded interior bumps.

    Args:
        op: Uncharged Dirac operator; its grid needs at least six slices.
        n_pairs: Number of spinor bumps.
        seed: Seed of bump placement and spinor directions.
        self_conjugate: Use the ``n_pairs`` self-conjugate modes
            ``(φ_k, conj φ_k)`` instead of conjugate pairs.
        width: Gaussian width in cells.

    Raises:
        ConfigurationError: If the grid is too small or too many modes are requested.
    """
    if op.charged:
        raise ConfigurationError("mode bases start from the uncharged operator")
    rep, grid = op.rep, op.grid
    n_modes = n_pairs if self_conjugate else 2 * n_pairs
    if n_pairs < 1 or n_modes > DEFAULT_MAX_MODES:
        raise ConfigurationError(f"mode count must lie in 1..{DEFAULT_MAX_MODES}")
    if grid.nt < 6:
        raise ConfigurationError("mode bumps need at least six time slices")
    space = SectionSpace(grid, rep.fiber, Bundle.UNCHARGED, "doubled")
    vectors, involution = _bump_columns(rep, space, n_pairs, seed, self_conjugate, width)
    basis = ModeBasis(op, space, vectors, involution)
    logger.debug("built %d uncharged modes (seed %d)", basis.n_modes, seed)
    return basis


# ── Charged partners ──────────────────────────────────────────────────────


@dataclass(eq=False)
class ModePair:
    """Uncharged basis, charged partner basis and the Møller mode matrices.

    ``forward`` is ``M`` with ``𝓡_A* φ^G = φ M``; ``inverse`` is ``N`` with
    ``𝓡̂_A* φ = φ^G N``.
    """

    uncharged: ModeBasis
    charged: ModeBasis
    forward: np.ndarray
    inverse: np.ndarray
    moller: MollerMap
    fit_residual: float
    in_span: bool = True


def _fit(target: np.ndarray, basis: np.ndarray) -> Tuple[np.ndarray, float]:
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return coeffs, relative_residual(basis @ coeffs, target)


def _check_partner_inputs(basis: ModeBasis, m: MollerMap) -> None:
    basis.check_bundle(Bundle.UNCHARGED, "the Møller map's domain")
    if basis.dirac is not m.free:
        raise ConfigurationError("mode basis was not built on the Møller map's free operator")
    if basis.grid != m.grid:
        raise ConfigurationError("mode basis and Møller map live on different grids")


def charged_partner(
    basis: ModeBasis, m: MollerMap, mixing: float = 0.25, seed: int = 0
) -> ModePair:
    """Charged basis ``φ^G = 𝓡̂_A*(φ Q)`` with a seeded involution-compatible ``Q``.

    Raises:
        BundleMismatchError: If ``basis`` is not uncharged.
        ConfigurationError: If the grids differ.
        NumericFailure: If a mode matrix cannot be fitted.
    """
    _check_partner_inputs(basis, m)
    n = basis.n_modes
    rng = np.random.default_rng(seed)
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    perm = np.eye(n)[basis.involution]
    q = np.eye(n) + mixing * (b + perm @ b.conj() @ perm.T)
    if m.trivial:
        # zero potential: partners are the uncharged modes themselves
        q = np.eye(n)

    lifted = m.doubled_inverse_adjoint_map().apply_flat(basis.vectors @ q)
    charged = ModeBasis(
        m.charged, basis.space.retag(Bundle.CHARGED), lifted, basis.involution.copy()
    )
    forward, res_f = _fit(m.doubled_adjoint_map().apply_flat(charged.vectors), basis.vectors)
    inverse, res_i = _fit(m.doubled_inverse_adjoint_map().apply_flat(basis.vectors), lifted)
    residual = max(res_f, res_i)
    if residual > FIT_TOLERANCE:
        raise NumericFailure(f"Møller mode matrices fit only to {residual:.3g}")
    logger.info("charged partner basis of %d modes (fit residual %.3g)", n, residual)
    return ModePair(basis, charged, forward, inverse, m, residual)


def independent_partner(
    basis: ModeBasis, m: MollerMap, seed: int = 1, width: float = 1.0
) -> ModePair:
    """Charged bumps placed independently of ``basis``, with fitted mode matrices.

    Nothing forces ``𝓡_A* φ^G`` into the uncharged span here. A fit residual
    above ``FIT_TOLERANCE`` returns the pair with ``in_span=False`` instead
    of failing.

    Raises:
        BundleMismatchError: If ``basis`` is not uncharged.
        ConfigurationError: If the grids differ.
    """
    _check_partner_inputs(basis, m)
    n = basis.n_modes
    self_conjugate = bool(np.array_equal(basis.involution, np.arange(n)))
    n_pairs = n if self_conjugate else n // 2
    space = basis.space.retag(Bundle.CHARGED)
    vectors, involution = _bump_columns(basis.rep, space, n_pairs, seed, self_conjugate, width)
    charged = ModeBasis(m.charged, space, vectors, involution)

    forward, res_f = _fit(m.doubled_adjoint_map().apply_flat(vectors), basis.vectors)
    inverse, res_i = _fit(m.doubled_inverse_adjoint_map().apply_flat(basis.vectors), vectors)
    residual = max(res_f, res_i)
    in_span = residual <= FIT_TOLERANCE
    if not in_span:
        logger.warning(
            "independent charged modes are out of the uncharged span (fit residual %.3g)",
            residual,
        )
    return ModePair(basis, charged, forward, inverse, m, residual, in_span)

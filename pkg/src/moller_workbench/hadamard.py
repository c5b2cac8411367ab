"""Discrete two-point functions of positive-frequency type and their pullback.

The free vacuum splits every slice by the spectral projector of the one-step
transfer onto positive frequencies. With ``Π`` that projector (zero modes
weighted by the configured policy) applied slicewise and ``S`` the dense
causal propagator, the bidistribution on doubled sections is

    ω(u, v) = i·vol·[ u₁ᵀ (H Π S)ᵀ v₂ + u₂ᵀ H (1 − Π) S v₁ ]

with ``H`` the fiber metric on every site. Kernels are dense; only grids
below the oracle cap can carry a state. The wavefront-set condition is not
checked on the lattice.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from moller_workbench.clifford import CliffordRep
from moller_workbench.errors import BundleMismatchError, ConfigurationError, NumericFailure
from moller_workbench.fields import (
    Bundle,
    DoubledSection,
    SectionSpace,
    apply_pointwise,
    flat_battery,
    involution_flat,
    relative_residual,
)
from moller_workbench.green import (
    DEFAULT_ORACLE_CAP,
    DenseKernel,
    DiracOperator,
    doubled_green,
    to_dense,
)
from moller_workbench.grid import SpacetimeGrid
from moller_workbench.moller import MollerMap
from moller_workbench.schema import IdentityCheck, Tolerances

logger = logging.getLogger(__name__)

ZERO_MODE_POLICIES = ("split", "exclude")
_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class TwoPointState:
    """Dense bidistribution on doubled sections of one bundle."""

    kernel: DenseKernel
    bundle: Bundle
    provenance: str
    zero_mode_policy: str
    projector: Optional[np.ndarray] = None
    zero_projector: Optional[np.ndarray] = None
    metadata: Dict[str, float] = field(default_factory=dict)

    @property
    def matrix(self) -> np.ndarray:
        return self.kernel.matrix

    @property
    def space(self) -> SectionSpace:
        return self.kernel.domain


# ── Vacuum ────────────────────────────────────────────────────────────────


def spectral_projectors(op: DiracOperator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Projectors onto positive and zero frequencies of the transfer.

    The frequencies are the eigenvalues of ``(U† − U)/2i``; both projectors
    are functions of ``U`` and commute with it.

    Returns:
        ``(P₊, P₀, frequencies)``.

    Raises:
        NumericFailure: If the diagonalization fails.
    """
    transfer = op.transfer.toarray()
    generator = (transfer.conj().T - transfer) / 2j
    generator = 0.5 * (generator + generator.conj().T)
    try:
        freqs, vecs = np.linalg.eigh(generator)
    except np.linalg.LinAlgError as e:
        raise NumericFailure(f"slice Hamiltonian diagonalization failed: {e}") from e
    positive = freqs > _ZERO_TOL
    zero = np.abs(freqs) <= _ZERO_TOL
    p_plus = vecs[:, positive] @ vecs[:, positive].conj().T
    p_zero = vecs[:, zero] @ vecs[:, zero].conj().T
    logger.debug(
        "spectral split: %d positive, %d zero, %d negative",
        int(positive.sum()),
        int(zero.sum()),
        int(freqs.size - positive.sum() - zero.sum()),
    )
    return p_plus, p_zero, freqs


def _slicewise(grid: SpacetimeGrid, projector: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    blocks = matrix.reshape(grid.nt, projector.shape[0], -1)
    return np.einsum("ab,tbn->tan", projector, blocks).reshape(matrix.shape)


def _doubled_space(grid: SpacetimeGrid, fiber: int, bundle: Bundle) -> SectionSpace:
    return SectionSpace(grid, fiber, bundle, "doubled")


def build_vacuum_state(
    rep: CliffordRep,
    grid: SpacetimeGrid,
    mass: float,
    zero_mode_policy: str = "split",
    cap: int = DEFAULT_ORACLE_CAP,
) -> TwoPointState:
    """Positive-frequency two-point function of the free theory.

    Args:
        rep: Clifford representation.
        grid: Grid fitting under ``cap``.
        mass: Non-negative mass.
        zero_mode_policy: ``"split"`` gives zero modes half weight,
            ``"exclude"`` leaves them out of the positive part.
        cap: Dense oracle cap.

    Raises:
        ConfigurationError: On an unknown zero-mode policy.
        OracleCapError: If the grid is too large.
    """
    if zero_mode_policy not in ZERO_MODE_POLICIES:
        raise ConfigurationError(
            f"zero_mode_policy must be one of {ZERO_MODE_POLICIES}, got {zero_mode_policy!r}"
        )
    op = DiracOperator(rep, grid, mass, allow_wrap=True)
    causal = to_dense(op.causal_map(), cap).matrix
    p_plus, p_zero, freqs = spectral_projectors(op)
    weight = 0.5 if zero_mode_policy == "split" else 0.0
    projector = p_plus + weight * p_zero if weight else p_plus

    positive = _slicewise(grid, projector, causal)
    w12 = 1j * grid.volume * apply_pointwise(rep.h, positive, rep.fiber).T
    w21 = 1j * grid.volume * apply_pointwise(rep.h, causal - positive, rep.fiber)
    n = causal.shape[0]
    matrix = np.zeros((2 * n, 2 * n), dtype=complex)
    matrix[:n, n:] = w12
    matrix[n:, :n] = w21

    space = _doubled_space(grid, rep.fiber, Bundle.UNCHARGED)
    n_zero = int(np.sum(np.abs(freqs) <= _ZERO_TOL))
    logger.info(
        "vacuum state on %dx%d, mass=%g, %d zero modes (%s)",
        grid.nt,
        grid.nx,
        mass,
        n_zero,
        zero_mode_policy,
    )
    return TwoPointState(
        kernel=DenseKernel(matrix, space, space, weights="bilinear"),
        bundle=Bundle.UNCHARGED,
        provenance="vacuum-construction",
        zero_mode_policy=zero_mode_policy,
        projector=p_plus,
        zero_projector=p_zero,
        metadata={"zero_modes": float(n_zero), "mass": float(mass)},
    )


def projector_defect(state: TwoPointState) -> float:
    """``max |P₊² − P₊|`` of the positive-frequency projector."""
    if state.projector is None:
        raise ConfigurationError("state carries no projector")
    p = state.projector
    return float(np.max(np.abs(p @ p - p)))


# ── Pullback ──────────────────────────────────────────────────────────────


def pullback_state(
    omega: TwoPointState, m: MollerMap, cap: int = DEFAULT_ORACLE_CAP
) -> TwoPointState:
    """``ω_G(u, v) = ω(𝓡_A* u, 𝓡_A* v)`` as a dense kernel.

    Raises:
        BundleMismatchError: If ``omega`` is not uncharged.
    """
    if omega.bundle != Bundle.UNCHARGED:
        raise BundleMismatchError("only uncharged states can be pulled back")
    if omega.space.grid != m.grid:
        raise ConfigurationError("state and Møller map live on different grids")
    adjoint = to_dense(m.doubled_adjoint_map(), cap).matrix
    matrix = adjoint.T @ omega.matrix @ adjoint
    space = _doubled_space(m.grid, m.rep.fiber, Bundle.CHARGED)
    logger.info("pulled back state through %s", m.doubled_adjoint_map().name)
    return TwoPointState(
        kernel=DenseKernel(matrix, space, space, weights="bilinear"),
        bundle=Bundle.CHARGED,
        provenance="pullback",
        zero_mode_policy=omega.zero_mode_policy,
        metadata=dict(omega.metadata),
    )


def evaluate(state: TwoPointState, u: DoubledSection, v: DoubledSection) -> complex:
    """``ω(u, v)`` on two doubled sections of the state's bundle."""
    for s in (u, v):
        if s.bundle != state.bundle:
            raise BundleMismatchError(
                f"{state.bundle.value} state evaluated on a {s.bundle.value} section"
            )
    return complex(u.flat() @ state.matrix @ v.flat())


def _forms(state: TwoPointState, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ik,ij,jk->k", u, state.matrix, v)


def _pairing_matrix(rep: CliffordRep, grid: SpacetimeGrid) -> np.ndarray:
    n = grid.nt * grid.sites_per_slice * rep.fiber
    metric = np.kron(np.eye(n // rep.fiber), rep.h)
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, n:] = grid.volume * metric.T
    out[n:, :n] = grid.volume * metric
    return out


# ── Checks ────────────────────────────────────────────────────────────────


def check_anticommutator(
    state: TwoPointState,
    op: DiracOperator,
    seed: int = 0,
    size: int = 16,
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``ω(u,v) + ω(v,u) = i·(u, S⊕v)`` on a battery, with ``S⊕`` from ``op``."""
    tol = (tolerances or Tolerances()).state
    rng = np.random.default_rng(seed)
    u = flat_battery(state.space, rng, size, interior=False)
    v = flat_battery(state.space, rng, size, interior=False)
    lhs = _forms(state, u, v) + _forms(state, v, u)
    sv = doubled_green(op).causal.apply_flat(v)
    rhs = 1j * np.einsum("ik,ij,jk->k", u, _pairing_matrix(op.rep, op.grid), sv)
    residual = relative_residual(lhs, rhs)
    return IdentityCheck.judge("anticommutator", residual, tol, "composed", size, seed)


def check_anticommutator_dense(
    state: TwoPointState,
    op: DiracOperator,
    cap: int = DEFAULT_ORACLE_CAP,
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """Entrywise ``ω + ωᵀ = i·Pair·S⊕``."""
    tol = (tolerances or Tolerances()).state
    causal = to_dense(doubled_green(op).causal, cap).matrix
    lhs = state.matrix + state.matrix.T
    rhs = 1j * _pairing_matrix(op.rep, op.grid) @ causal
    residual = relative_residual(lhs, rhs)
    return IdentityCheck.judge("anticommutator_dense", residual, tol, "composed", lhs.shape[0])


def check_bisolution(
    state: TwoPointState,
    op: DiracOperator,
    seed: int = 0,
    size: int = 16,
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``ω(D⊕u, v) = 0`` and ``ω(u, D⊕v) = 0`` on interior sections.

    Each value is normalized by its Cauchy–Schwarz bound.
    """
    tol = (tolerances or Tolerances()).state
    rng = np.random.default_rng(seed)
    u = flat_battery(state.space, rng, size)
    v = flat_battery(state.space, rng, size)
    dirac = doubled_green(op).dirac
    du, dv = dirac.apply_flat(u), dirac.apply_flat(v)
    worst = 0.0
    for left, right in ((du, v), (u, dv)):
        values = np.abs(_forms(state, left, right))
        bound = np.linalg.norm(left, axis=0) * np.linalg.norm(state.matrix @ right, axis=0)
        worst = max(worst, float(np.max(values / np.maximum(bound, 1e-300))))
    return IdentityCheck.judge("bisolution", worst, tol, "composed", size, seed)


def check_hermiticity(
    state: TwoPointState, seed: int = 0, size: int = 16, tolerances: Optional[Tolerances] = None
) -> IdentityCheck:
    """``conj(ω(u*, v)) = ω(v*, u)``."""
    tol = (tolerances or Tolerances()).composed
    rng = np.random.default_rng(seed)
    u = flat_battery(state.space, rng, size, interior=False)
    v = flat_battery(state.space, rng, size, interior=False)
    half = state.space.leg_dim
    lhs = _forms(state, involution_flat(u, half), v).conj()
    rhs = _forms(state, involution_flat(v, half), u)
    residual = relative_residual(lhs, rhs)
    return IdentityCheck.judge("state_hermiticity", residual, tol, "composed", size, seed)


def check_pullback_paths(
    charged: TwoPointState,
    vacuum: TwoPointState,
    m: MollerMap,
    seed: int = 0,
    size: int = 8,
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """Dense pullback against ``ω(𝓡_A* u, 𝓡_A* v)`` through operator application."""
    tol = (tolerances or Tolerances()).composed
    rng = np.random.default_rng(seed)
    u = flat_battery(charged.space, rng, size, interior=False)
    v = flat_battery(charged.space, rng, size, interior=False)
    adjoint = m.doubled_adjoint_map().apply_flat
    lhs = _forms(charged, u, v)
    rhs = _forms(vacuum, adjoint(u), adjoint(v))
    residual = relative_residual(lhs, rhs)
    return IdentityCheck.judge("pullback_paths", residual, tol, "composed", size, seed)


def hermitian_spectrum(state: TwoPointState) -> Tuple[float, float]:
    """Extreme eigenvalues of the sesquilinear form ``(u, v) ↦ ω(u*, v)``.

    Reported only; no positivity is asserted.
    """
    n = state.space.leg_dim
    swapped = np.concatenate([state.matrix[n:], state.matrix[:n]])
    form = 0.5 * (swapped + swapped.conj().T)
    vals = np.linalg.eigvalsh(form)
    return float(vals[0]), float(vals[-1])

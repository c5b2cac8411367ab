"""Classical Møller maps between the free and the charged Dirac theory.

``R_A = 𝔦 − S₋ᴳ A 𝔦`` carries uncharged sections to charged ones; its
two-sided inverse is ``R̂_A = 𝔭 + S₋ 𝔭 A`` and its adjoint for the
weighted hermitian pairing is ``R̄_A* = R_A^♯``, swept backwards through the
charged transfer. ``R̄_D = 𝔭 − 𝔭 A S₊ᴳ`` is the right factor of the
advanced charged Green operator; it agrees with ``R̄_A*`` after the free
propagator. On the doubled space the cospinor leg is acted on by the
complex-conjugate maps. The ``verify_*`` functions check the operator
identities on seeded batteries and return ``IdentityCheck``s.

``S₋ᴳ A`` only ever sees ``A`` through the time links, so ``R_A`` is
computed as a propagation of the link kicks ``(1 − V_s) x_s``; outside the
causal future of the potential the result is the input bitwise.
"""

import logging
from typing import Optional

import numpy as np

from moller_workbench.errors import BundleMismatchError, ConfigurationError
from moller_workbench.fields import (
    Bundle,
    DoubledSection,
    FieldMap,
    SectionSpace,
    Section,
    SpinorSection,
    apply_pointwise,
    column_residual,
    flat_battery,
    involution_flat,
    relative_residual,
)
from moller_workbench.gauge import GaugePotential, validate_no_wrap
from moller_workbench.green import DiracOperator, direct_sum, to_dense
from moller_workbench.grid import causal_future
from moller_workbench.schema import IdentityCheck, Tolerances

logger = logging.getLogger(__name__)


class MollerMap:
    """Møller map for one potential, with its inverse and adjoints.

    Args:
        free: Uncharged Dirac operator.
        potential: Compactly supported potential.
        inverse: ``as_map`` yields ``R̂_A`` instead of ``R_A``.
        doubled: ``as_map`` acts on doubled sections.
        window_end: Last slice of the no-wraparound window.

    Raises:
        ConfigurationError: If the operator is charged, grids differ or the
            potential's forward cone wraps.
    """

    def __init__(
        self,
        free: DiracOperator,
        potential: GaugePotential,
        inverse: bool = False,
        doubled: bool = False,
        window_end: Optional[int] = None,
    ):
        if free.charged:
            raise ConfigurationError("the Møller map starts from the uncharged operator")
        if potential.grid != free.grid:
            raise ConfigurationError("potential and operator live on different grids")
        validate_no_wrap(potential, window_end)

        self.free = free
        self.potential = potential
        self.charged = free.with_potential(potential)
        self.inverse = inverse
        self.doubled = doubled
        self.trivial = potential.is_zero
        self.uncharged_space = free.space
        self.charged_space = self.charged.space

    @property
    def rep(self):
        return self.free.rep

    @property
    def grid(self):
        return self.free.grid

    # -- flat kernels --

    def forward_flat(self, x: np.ndarray) -> np.ndarray:
        if self.trivial:
            return np.array(x, dtype=complex)
        return x - self.charged.propagate_flat(self.charged.link_kick_flat(x))

    def inverse_flat(self, x: np.ndarray) -> np.ndarray:
        if self.trivial:
            return np.array(x, dtype=complex)
        return x - self.free.propagate_flat(self.charged.link_kick_flat(x, inverse=True))

    def adjoint_flat(self, x: np.ndarray) -> np.ndarray:
        """``R̄_A* = R_A^♯``."""
        if self.trivial:
            return np.array(x, dtype=complex)
        swept = self.charged.propagate_adjoint_flat(x)
        return x - self.charged.link_kick_flat(swept, adjoint=True)

    def inverse_adjoint_flat(self, x: np.ndarray) -> np.ndarray:
        """``R̂_A^‡ = R̂_A^♯``."""
        if self.trivial:
            return np.array(x, dtype=complex)
        swept = self.free.propagate_adjoint_flat(x)
        return x - self.charged.link_kick_flat(swept, inverse=True, adjoint=True)

    def advanced_factor_flat(self, x: np.ndarray) -> np.ndarray:
        """``R̄_D = 𝔭 − 𝔭 A S₊ᴳ``."""
        if self.trivial:
            return np.array(x, dtype=complex)
        return x - self.charged.coupling_flat(self.charged.backward_flat(x))

    def cutoff_flat(self, x: np.ndarray) -> np.ndarray:
        """``o = −S₋ 𝔭 A`` from charged to uncharged sections."""
        if self.trivial:
            return np.zeros_like(x, dtype=complex)
        return self.free.propagate_flat(self.charged.link_kick_flat(x, inverse=True))

    # -- maps --

    def forward_map(self) -> FieldMap:
        return FieldMap("R_A", self.uncharged_space, self.charged_space, self.forward_flat)

    def inverse_map(self) -> FieldMap:
        return FieldMap("R̂_A", self.charged_space, self.uncharged_space, self.inverse_flat)

    def adjoint_map(self) -> FieldMap:
        return FieldMap("R̄_A*", self.charged_space, self.uncharged_space, self.adjoint_flat)

    def inverse_adjoint_map(self) -> FieldMap:
        return FieldMap(
            "R̂_A‡", self.uncharged_space, self.charged_space, self.inverse_adjoint_flat
        )

    def advanced_factor_map(self) -> FieldMap:
        return FieldMap(
            "R̄_D", self.charged_space, self.uncharged_space, self.advanced_factor_flat
        )

    def doubled_map(self) -> FieldMap:
        return direct_sum(self.forward_map(), sign=1.0)

    def doubled_adjoint_map(self) -> FieldMap:
        return direct_sum(self.adjoint_map(), sign=1.0)

    def doubled_inverse_adjoint_map(self) -> FieldMap:
        return direct_sum(self.inverse_adjoint_map(), sign=1.0)

    def as_map(self) -> FieldMap:
        """The map selected by the direction and doubling flags."""
        base = self.inverse_map() if self.inverse else self.forward_map()
        return direct_sum(base, sign=1.0) if self.doubled else base


# ── Public operations ─────────────────────────────────────────────────────


def _expect(section: Section, bundle: Bundle) -> None:
    if section.bundle != bundle:
        raise BundleMismatchError(f"expected a {bundle.value} section, got {section.bundle.value}")


def moller_apply(m: MollerMap, s: SpinorSection) -> SpinorSection:
    """``R_A s = 𝔦s − S₋ᴳ(A 𝔦s)``."""
    _expect(s, Bundle.UNCHARGED)
    return m.forward_map()(s)


def moller_inverse_apply(m: MollerMap, s: SpinorSection) -> SpinorSection:
    """``R̂_A s = 𝔭s + S₋(𝔭 A s)``."""
    _expect(s, Bundle.CHARGED)
    return m.inverse_map()(s)


def moller_adjoint_apply(m: MollerMap, s: Section) -> Section:
    """Adjoint Møller map on a charged spinor, cospinor or doubled section.

    Spinors get ``R̄_A*``, cospinors its conjugate ``R_A*``, doubled sections
    ``𝓡_A* = R̄_A* ⊕ R_A*``.
    """
    _expect(s, Bundle.CHARGED)
    if isinstance(s, DoubledSection):
        return m.doubled_adjoint_map()(s)
    if s.conjugate:
        out = m.adjoint_map()(SpinorSection(s.grid, Bundle.CHARGED, s.values.conj()))
        return SpinorSection(s.grid, Bundle.UNCHARGED, out.values.conj(), conjugate=True)
    return m.adjoint_map()(s)


def doubled_moller_apply(m: MollerMap, u: DoubledSection) -> DoubledSection:
    """``𝓡_A u = (R_A u1, R̄_A u2)``."""
    _expect(u, Bundle.UNCHARGED)
    return m.doubled_map()(u)


# ── Identity checks ──────────────────────────────────────────────────────


def _tolerances(tolerances: Optional[Tolerances]) -> Tolerances:
    return tolerances if tolerances is not None else Tolerances()


def _drop_last_slice(m: MollerMap, x: np.ndarray) -> np.ndarray:
    return x.reshape(m.grid.nt, -1, x.shape[-1])[:-1].reshape(-1, x.shape[-1])


def _pair(m: MollerMap, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise weighted hermitian pairing of two flat batteries."""
    hb = apply_pointwise(m.rep.h, b, m.rep.fiber)
    return m.grid.volume * np.sum(a.conj() * hb, axis=0)


def _check(
    name: str,
    residual: float,
    tolerance: float,
    kind: str,
    size: int,
    seed: Optional[int],
    details: str = "",
) -> IdentityCheck:
    check = IdentityCheck.judge(name, residual, tolerance, kind, size, seed, details)
    logger.debug("%s residual=%.3e tol=%.1e pass=%s", name, residual, tolerance, check.passed)
    return check


def verify_intertwining(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``Dᴳ ∘ R_A = 𝔦 ∘ D``, compared away from the last slice."""
    tol = _tolerances(tolerances).composed
    x = flat_battery(m.uncharged_space, np.random.default_rng(seed), size, kind)
    lhs = m.charged.apply_flat(m.forward_flat(x))
    rhs = m.free.apply_flat(x)
    residual = column_residual(_drop_last_slice(m, lhs), _drop_last_slice(m, rhs))
    return _check("intertwining", residual, tol, "composed", size, seed)


def verify_retardation(m: MollerMap, seed: int = 0, size: int = 32) -> IdentityCheck:
    """``R_A s`` equals ``𝔦s`` bitwise outside the causal future of the potential."""
    x = flat_battery(m.uncharged_space, np.random.default_rng(seed), size, interior=False)
    outside = ~causal_future(m.grid, m.potential.support)
    mask = np.broadcast_to(outside[..., None], m.uncharged_space.leg_shape).reshape(-1)
    diff = m.forward_flat(x)[mask] - x[mask]
    residual = float(np.max(np.abs(diff))) if diff.size else 0.0
    return _check("retardation", residual, 0.0, "exact", size, seed)


def verify_inverse(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``R̂_A ∘ R_A = id`` and ``R_A ∘ R̂_A = id``."""
    tol = _tolerances(tolerances).composed
    rng = np.random.default_rng(seed)
    s = flat_battery(m.uncharged_space, rng, size, kind, interior=False)
    t = flat_battery(m.charged_space, rng, size, kind, interior=False)
    left = column_residual(m.inverse_flat(m.forward_flat(s)), s)
    right = column_residual(m.forward_flat(m.inverse_flat(t)), t)
    details = f"left={left:.3e} right={right:.3e}"
    return _check("two_sided_inverse", max(left, right), tol, "composed", size, seed, details)


def verify_adjoint(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``⟨R_A u, v⟩_G = ⟨u, R̄_A* v⟩`` on random pairs."""
    tol = _tolerances(tolerances).composed
    rng = np.random.default_rng(seed)
    u = flat_battery(m.uncharged_space, rng, size, kind, interior=False)
    v = flat_battery(m.charged_space, rng, size, kind, interior=False)
    lhs = _pair(m, m.forward_flat(u), v)
    rhs = _pair(m, u, m.adjoint_flat(v))
    residual = relative_residual(lhs, rhs)
    return _check("adjoint", residual, tol, "composed", size, seed)


def verify_dense_adjoint(
    m: MollerMap, cap: int, tolerances: Optional[Tolerances] = None
) -> IdentityCheck:
    """Dense ``R̄_A*`` against the metric-weighted conjugate transpose of dense ``R_A``.

    Raises:
        OracleCapError: If the grid does not fit under ``cap``.
    """
    tol = _tolerances(tolerances).single
    forward = to_dense(m.forward_map(), cap).matrix
    adjoint = to_dense(m.adjoint_map(), cap).matrix
    metric = np.kron(np.eye(m.grid.nt * m.grid.sites_per_slice), m.rep.h)
    expected = np.linalg.solve(metric, forward.conj().T @ metric)
    residual = column_residual(adjoint, expected)
    return _check("dense_adjoint", residual, tol, "single", forward.shape[1], None)


def verify_involution(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``(𝓡_A u)* = 𝓡_A(u*)``."""
    tol = _tolerances(tolerances).single
    doubled = m.doubled_map()
    space = SectionSpace(m.grid, m.rep.fiber, Bundle.UNCHARGED, "doubled")
    u = flat_battery(space, np.random.default_rng(seed), size, kind, interior=False)
    half = space.leg_dim
    lhs = involution_flat(doubled.apply_flat(u), half)
    rhs = doubled.apply_flat(involution_flat(u, half))
    residual = column_residual(lhs, rhs)
    return _check("involution_compatibility", residual, tol, "single", size, seed)


def verify_factorization(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``R_A − 𝔦 = R_A ∘ o ∘ 𝔦`` with ``o = −S₋ 𝔭 A``."""
    tol = _tolerances(tolerances).composed
    x = flat_battery(m.uncharged_space, np.random.default_rng(seed), size, kind, interior=False)
    lhs = m.forward_flat(x) - x
    rhs = m.forward_flat(m.cutoff_flat(x))
    residual = column_residual(lhs, rhs)
    return _check("cutoff_factorization", residual, tol, "composed", size, seed)


def verify_green_factorization(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``S₋ᴳ = R_A S₋ 𝔭`` and ``S₊ᴳ = 𝔦 S₊ R̄_D`` on interior charged sources."""
    tol = _tolerances(tolerances).composed
    u = flat_battery(m.charged_space, np.random.default_rng(seed), size, kind)
    ret = column_residual(m.charged.forward_flat(u), m.forward_flat(m.free.forward_flat(u)))
    adv = column_residual(
        m.charged.backward_flat(u), m.free.backward_flat(m.advanced_factor_flat(u))
    )
    details = f"retarded={ret:.3e} advanced={adv:.3e}"
    return _check("green_factorization", max(ret, adv), tol, "composed", size, seed, details)


def verify_advanced_factor(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``S R̄_D = S R̄_A*``: both adjoint factors agree on what the propagator sees."""
    tol = _tolerances(tolerances).composed
    u = flat_battery(m.charged_space, np.random.default_rng(seed), size, kind, interior=False)
    lhs = m.free.causal_flat(m.advanced_factor_flat(u))
    rhs = m.free.causal_flat(m.adjoint_flat(u))
    residual = column_residual(lhs, rhs)
    return _check("advanced_factor_agreement", residual, tol, "composed", size, seed)


def verify_causal_factorization(
    m: MollerMap,
    seed: int = 0,
    size: int = 32,
    kind: str = "random",
    tolerances: Optional[Tolerances] = None,
) -> IdentityCheck:
    """``Sᴳ = R_A S R̄_A*`` on interior charged sources."""
    tol = _tolerances(tolerances).composed
    u = flat_battery(m.charged_space, np.random.default_rng(seed), size, kind)
    lhs = m.charged.causal_flat(u)
    rhs = m.forward_flat(m.free.causal_flat(m.adjoint_flat(u)))
    residual = column_residual(lhs, rhs)
    return _check("causal_factorization", residual, tol, "composed", size, seed)


# ── Dense factorizations ─────────────────────────────────────────────────


def _dense_note(m: MollerMap) -> str:
    return f"dense grid nt={m.grid.nt} nx={m.grid.nx}"


def verify_dense_green_factorization(
    m: MollerMap, cap: int, tolerances: Optional[Tolerances] = None
) -> IdentityCheck:
    """Dense ``S₋ᴳ = R_A S₋`` and ``S₊ᴳ = S₊ R̄_D`` as matrix identities.

    Raises:
        OracleCapError: If the grid does not fit under ``cap``.
    """
    tol = _tolerances(tolerances).dense
    forward = to_dense(m.forward_map(), cap).matrix
    ret = relative_residual(
        to_dense(m.charged.retarded_map(), cap).matrix,
        forward @ to_dense(m.free.retarded_map(), cap).matrix,
    )
    adv = relative_residual(
        to_dense(m.charged.advanced_map(), cap).matrix,
        to_dense(m.free.advanced_map(), cap).matrix
        @ to_dense(m.advanced_factor_map(), cap).matrix,
    )
    details = f"retarded={ret:.3e} advanced={adv:.3e}; {_dense_note(m)}"
    return _check(
        "dense_green_factorization", max(ret, adv), tol, "single", forward.shape[1], None, details
    )


def verify_dense_causal_factorization(
    m: MollerMap, cap: int, tolerances: Optional[Tolerances] = None
) -> IdentityCheck:
    """Dense ``Sᴳ = R_A S R̄_A*`` as a matrix identity."""
    tol = _tolerances(tolerances).dense
    forward = to_dense(m.forward_map(), cap).matrix
    causal = to_dense(m.free.causal_map(), cap).matrix
    rhs = forward @ causal @ to_dense(m.adjoint_map(), cap).matrix
    residual = relative_residual(to_dense(m.charged.causal_map(), cap).matrix, rhs)
    return _check(
        "dense_causal_factorization",
        residual,
        tol,
        "single",
        forward.shape[1],
        None,
        _dense_note(m),
    )

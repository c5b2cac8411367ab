"""Peierls bracket, star product and the algebra-level Møller map."""

import logging
from math import factorial
from typing import Dict, List

import numpy as np

from moller_workbench.errors import ConfigurationError, DegreeOverflowError
from moller_workbench.fields import Bundle, relative_residual
from moller_workbench.funcalg.conventions import (
    STAR_NORMALIZATION,
    bracket_sign,
    right_derivative_sign,
)
from moller_workbench.funcalg.functional import FermionicFunctional, HbarSeries, wedge
from moller_workbench.funcalg.modes import ModeBasis, ModePair
from moller_workbench.funcalg.tensors import shuffle, transform_legs
from moller_workbench.hadamard import TwoPointState

logger = logging.getLogger(__name__)


def _accumulate(comps: Dict[int, np.ndarray], degree: int, term: np.ndarray) -> None:
    comps[degree] = comps[degree] + term if degree in comps else term


def _cap(*functionals: FermionicFunctional) -> int:
    return max(f.max_degree for f in functionals)


def _contract(a: np.ndarray, b: np.ndarray, kernel: np.ndarray, n: int) -> np.ndarray:
    """``Σ a[a₁..aₙ, I] kernel[a₁b₁]⋯kernel[aₙbₙ] b[b₁..bₙ, J]`` as a tensor."""
    x = a
    for _ in range(n):
        x = np.tensordot(x, kernel, axes=([0], [0]))
    p = a.ndim
    return np.tensordot(x, b, axes=(list(range(p - n, p)), list(range(n))))


def peierls(
    F: FermionicFunctional, G: FermionicFunctional, basis: ModeBasis
) -> FermionicFunctional:
    """Bracket ``{F, G} = F ∂⃖_a K_ab ∂⃗_b G`` with ``K`` the causal propagator on modes."""
    for f in (F, G):
        basis.check_bundle(f.bundle, "the functional")
    k = basis.causal_kernel()
    comps: Dict[int, np.ndarray] = {}
    for p, a in F.components.items():
        for q, b in G.components.items():
            if p == 0 or q == 0:
                continue
            term = bracket_sign(p) * shuffle(_contract(a, b, k, 1), p - 1)
            _accumulate(comps, p + q - 2, term)
    return FermionicFunctional(F.n_modes, F.bundle, comps, _cap(F, G))


def _gamma(a: np.ndarray, b: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    p = a.ndim
    weight = right_derivative_sign(p, n) * STAR_NORMALIZATION**n / factorial(n)
    return weight * shuffle(_contract(a, b, w, n), p - n)


def star_kernel(
    F: FermionicFunctional, G: FermionicFunctional, w: np.ndarray
) -> HbarSeries:
    """``F ⋆ G = Σ_n ħⁿ Γⁿ(F, G)`` for an explicit two-point matrix on mode legs."""
    cap = _cap(F, G)
    order = min(F.degree, G.degree)
    coefficients: List[FermionicFunctional] = [wedge(F, G)]
    for n in range(1, order + 1):
        comps: Dict[int, np.ndarray] = {}
        for p, a in F.components.items():
            for q, b in G.components.items():
                if min(p, q) < n:
                    continue
                if p + q - 2 * n > cap:
                    raise DegreeOverflowError(
                        f"Γ^{n} of degrees {p} and {q} exceeds the cap of {cap}"
                    )
                _accumulate(comps, p + q - 2 * n, _gamma(a, b, w, n))
        coefficients.append(FermionicFunctional(F.n_modes, F.bundle, comps, cap))
    return HbarSeries(coefficients, max(cap, order))


def star(
    F: FermionicFunctional, G: FermionicFunctional, basis: ModeBasis, state: TwoPointState
) -> HbarSeries:
    """Star product with the two-point function ``state`` restricted to ``basis``.

    Raises:
        BundleMismatchError: If the functionals, basis and state disagree on the bundle.
    """
    for f in (F, G):
        basis.check_bundle(f.bundle, "the functional")
    return star_kernel(F, G, basis.two_point_kernel(state))


def star_series(
    left: HbarSeries, right: HbarSeries, basis: ModeBasis, state: TwoPointState
) -> HbarSeries:
    """Star product of two ħ-series, collected by total power of ħ."""
    totals: Dict[int, FermionicFunctional] = {}
    for i, f in enumerate(left.coefficients):
        for j, g in enumerate(right.coefficients):
            for n, term in enumerate(star(f, g, basis, state).coefficients):
                k = i + j + n
                totals[k] = totals[k] + term if k in totals else term
    order = max(totals)
    zero = FermionicFunctional.zero(left.n_modes, left.bundle)
    coeffs = [totals.get(k, zero) for k in range(order + 1)]
    return HbarSeries(coeffs, max(left.max_order, right.max_order, order))


# ── Møller map on functionals ─────────────────────────────────────────────


def _transport(
    F: FermionicFunctional, matrix: np.ndarray, bundle: Bundle
) -> FermionicFunctional:
    comps = {p: transform_legs(t, matrix) for p, t in F.components.items()}
    return FermionicFunctional(F.n_modes, bundle, comps, F.max_degree)


def algebra_moller(F: FermionicFunctional, pair: ModePair) -> FermionicFunctional:
    """Pull a charged functional back to an uncharged one along ``𝓡_A``."""
    pair.charged.check_bundle(F.bundle, "the functional")
    if pair.moller.trivial:
        return F.retag(Bundle.UNCHARGED)
    return _transport(F, pair.forward, Bundle.UNCHARGED)


def algebra_moller_inverse(F: FermionicFunctional, pair: ModePair) -> FermionicFunctional:
    """Pull an uncharged functional back to a charged one along ``𝓡̂_A``."""
    pair.uncharged.check_bundle(F.bundle, "the functional")
    if pair.moller.trivial:
        return F.retag(Bundle.CHARGED)
    return _transport(F, pair.inverse, Bundle.CHARGED)


def check_state_provenance(
    pair: ModePair, omega: TwoPointState, omega_g: TwoPointState, tolerance: float = 1e-10
) -> float:
    """Require ``ω_G`` to be the pullback of ``ω`` on the mode legs.

    Returns:
        Relative mismatch between ``W^G`` and ``Mᵀ W M``.

    Raises:
        ConfigurationError: If ``ω_G`` is not a pullback or does not match ``ω``.
    """
    if omega_g.provenance != "pullback":
        raise ConfigurationError(f"charged state has provenance {omega_g.provenance!r}")
    w = pair.uncharged.two_point_kernel(omega)
    w_g = pair.charged.two_point_kernel(omega_g)
    mismatch = relative_residual(w_g, pair.forward.T @ w @ pair.forward)
    if mismatch > tolerance:
        raise ConfigurationError(
            f"charged state is not the pullback of the uncharged one (mismatch {mismatch:.3g})"
        )
    logger.debug("state provenance mismatch %.3g", mismatch)
    return mismatch

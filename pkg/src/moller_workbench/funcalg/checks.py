"""Seeded identity checks of the functional algebra and the algebra-level Møller map."""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from moller_workbench.fields import Bundle
from moller_workbench.funcalg.conventions import graded_sign
from moller_workbench.funcalg.functional import (
    FermionicFunctional,
    HbarSeries,
    derivative,
    functional_involution,
    wedge,
)
from moller_workbench.funcalg.modes import ModeBasis, ModePair
from moller_workbench.funcalg.products import (
    algebra_moller,
    algebra_moller_inverse,
    check_state_provenance,
    peierls,
    star,
    star_series,
)
from moller_workbench.funcalg.tensors import random_antisymmetric
from moller_workbench.hadamard import TwoPointState
from moller_workbench.schema import IdentityCheck, Tolerances

logger = logging.getLogger(__name__)

Algebraic = Union[FermionicFunctional, HbarSeries]


def random_functional(
    rng: np.random.Generator,
    n_modes: int,
    degrees: Sequence[int],
    bundle: Bundle,
    max_degree: int = 6,
) -> FermionicFunctional:
    """Functional with random canonical components in the given degrees."""
    comps = {}
    for p in degrees:
        if p == 0:
            comps[0] = np.asarray(rng.normal() + 1j * rng.normal())
        else:
            comps[p] = random_antisymmetric(rng, n_modes, p)
    return FermionicFunctional(n_modes, bundle, comps, max_degree)


def relative_difference(a: Algebraic, b: Algebraic) -> float:
    """Largest coefficient difference over the larger coefficient scale."""
    scale = max(a.scale(), b.scale())
    diff = a.max_abs_diff(b)
    return diff / scale if scale > 0 else diff


def _check(
    name: str, residual: float, tolerance: float, kind: str, size: int, seed: Optional[int]
) -> IdentityCheck:
    check = IdentityCheck.judge(name, residual, tolerance, kind, size, seed)
    logger.debug("%s residual=%.3e tol=%.1e pass=%s", name, residual, tolerance, check.passed)
    return check


def _tolerances(tolerances: Optional[Tolerances]) -> Tolerances:
    return tolerances if tolerances is not None else Tolerances()


def _tol(tolerances: Optional[Tolerances]) -> float:
    return _tolerances(tolerances).algebra


def _law_tol(tolerances: Optional[Tolerances]) -> float:
    return _tolerances(tolerances).single


# ── Classical structure ───────────────────────────────────────────────────


def verify_wedge_laws(
    n_modes: int, seed: int = 0, size: int = 4, tolerances: Optional[Tolerances] = None
) -> List[IdentityCheck]:
    """Graded commutativity and associativity of the wedge product."""
    rng = np.random.default_rng(seed)
    commute, assoc = 0.0, 0.0
    for _ in range(size):
        f = random_functional(rng, n_modes, [1], Bundle.UNCHARGED)
        g = random_functional(rng, n_modes, [2], Bundle.UNCHARGED)
        h = random_functional(rng, n_modes, [1], Bundle.UNCHARGED)
        commute = max(commute, relative_difference(wedge(f, g), graded_sign(1, 2) * wedge(g, f)))
        assoc = max(assoc, relative_difference(wedge(wedge(f, g), h), wedge(f, wedge(g, h))))
    tol = _law_tol(tolerances)
    return [
        _check("wedge_graded_commutative", commute, tol, "single", size, seed),
        _check("wedge_associative", assoc, tol, "single", size, seed),
    ]


def verify_leibniz(
    n_modes: int, seed: int = 0, size: int = 4, tolerances: Optional[Tolerances] = None
) -> IdentityCheck:
    """``d_h(F∧G) = d_hF ∧ G + (−1)^p F ∧ d_hG`` on degree-(1, 2) pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(size):
        f = random_functional(rng, n_modes, [1], Bundle.UNCHARGED)
        g = random_functional(rng, n_modes, [2], Bundle.UNCHARGED)
        h = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
        lhs = derivative(wedge(f, g), h)
        rhs = wedge(derivative(f, h), g) - wedge(f, derivative(g, h))
        worst = max(worst, relative_difference(lhs, rhs))
    return _check("graded_leibniz", worst, _law_tol(tolerances), "single", size, seed)


def verify_peierls_laws(
    basis: ModeBasis, seed: int = 0, size: int = 4, tolerances: Optional[Tolerances] = None
) -> List[IdentityCheck]:
    """Graded antisymmetry and the graded Jacobi identity of the bracket."""
    rng = np.random.default_rng(seed)
    n, tag = basis.n_modes, basis.bundle
    antisym, jacobi = 0.0, 0.0
    for _ in range(size):
        f = random_functional(rng, n, [1], tag)
        g = random_functional(rng, n, [1], tag)
        h = random_functional(rng, n, [2], tag)
        antisym = max(
            antisym,
            relative_difference(peierls(h, f, basis), -graded_sign(2, 1) * peierls(f, h, basis)),
        )
        terms = [
            graded_sign(1, 2) * peierls(f, peierls(g, h, basis), basis),
            graded_sign(1, 1) * peierls(g, peierls(h, f, basis), basis),
            graded_sign(2, 1) * peierls(h, peierls(f, g, basis), basis),
        ]
        total = terms[0] + terms[1] + terms[2]
        scale = max(t.scale() for t in terms)
        jacobi = max(jacobi, total.scale() / scale if scale > 0 else total.scale())
    tol = _law_tol(tolerances)
    return [
        _check("peierls_graded_antisymmetry", antisym, tol, "single", size, seed),
        _check("peierls_graded_jacobi", jacobi, tol, "single", size, seed),
    ]


# ── Quantum structure ─────────────────────────────────────────────────────


def verify_star_laws(
    basis: ModeBasis,
    state: TwoPointState,
    seed: int = 0,
    size: int = 3,
    tolerances: Optional[Tolerances] = None,
) -> List[IdentityCheck]:
    """Associativity, the classical limit and the anticommutator of linear functionals.

    Each law is judged at the single-application tolerance against the mode
    kernel ``K``. How far the state's ``W + Wᵀ`` sits from ``iK`` is a
    separate check at the state tolerance.
    """
    rng = np.random.default_rng(seed)
    n, tag = basis.n_modes, basis.bundle
    k = basis.causal_kernel()
    assoc, limit, car = 0.0, 0.0, 0.0
    for _ in range(size):
        f = random_functional(rng, n, [1, 2], tag)
        g = random_functional(rng, n, [1], tag)
        h = random_functional(rng, n, [0, 2], tag)
        left = star_series(star(f, g, basis, state), HbarSeries.of(h), basis, state)
        right = star_series(HbarSeries.of(f), star(g, h, basis, state), basis, state)
        assoc = max(assoc, relative_difference(left, right))
        classical = star(f, h, basis, state).coefficient(0)
        limit = max(limit, relative_difference(classical, wedge(f, h)))

        a = random_functional(rng, n, [1], tag)
        b = random_functional(rng, n, [1], tag)
        anti = star(a, b, basis, state) + star(b, a, basis, state)
        expected = 1j * complex(a.component(1) @ k @ b.component(1))
        target = FermionicFunctional.constant(n, tag, expected)
        car = max(car, relative_difference(anti.coefficient(1), target))
        car = max(car, anti.coefficient(0).scale())
    tol = _law_tol(tolerances)
    state_tol = _tolerances(tolerances).state
    return [
        _check("star_associative", assoc, tol, "single", size, seed),
        _check("star_classical_limit", limit, 0.0, "exact", size, seed),
        _check("star_anticommutator", car, tol, "single", size, seed),
        _check(
            "mode_kernel_consistency",
            basis.kernel_consistency(state),
            state_tol,
            "composed",
            1,
            None,
        ),
    ]


def verify_involution_laws(
    basis: ModeBasis, seed: int = 0, size: int = 4
) -> IdentityCheck:
    """``(F*)* = F`` bitwise."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(size):
        f = random_functional(rng, basis.n_modes, [0, 1, 2, 3], basis.bundle)
        twice = functional_involution(functional_involution(f, basis.involution), basis.involution)
        worst = max(worst, twice.max_abs_diff(f))
    return _check("involution_twice", worst, 0.0, "exact", size, seed)


# ── Møller map on the algebra ─────────────────────────────────────────────


def verify_algebra_moller(
    pair: ModePair,
    omega: TwoPointState,
    omega_g: TwoPointState,
    seed: int = 0,
    size: int = 3,
    tolerances: Optional[Tolerances] = None,
) -> List[IdentityCheck]:
    """Star homomorphism, ∗-compatibility and bijectivity of the algebra-level map.

    Raises:
        ConfigurationError: If ``omega_g`` is not the pullback of ``omega``.
    """
    tol = _tol(tolerances)
    provenance = check_state_provenance(pair, omega, omega_g, tol)
    rng = np.random.default_rng(seed)
    n = pair.charged.n_modes
    hom, inv, trip = 0.0, 0.0, 0.0
    for _ in range(size):
        f = random_functional(rng, n, [1, 2], Bundle.CHARGED)
        h = random_functional(rng, n, [1], Bundle.CHARGED)
        lhs = star(f, h, pair.charged, omega_g)
        lhs = HbarSeries([algebra_moller(c, pair) for c in lhs.coefficients], lhs.max_order)
        rhs = star(algebra_moller(f, pair), algebra_moller(h, pair), pair.uncharged, omega)
        hom = max(hom, relative_difference(lhs, rhs))

        j = pair.charged.involution
        inv = max(
            inv,
            relative_difference(
                algebra_moller(functional_involution(f, j), pair),
                functional_involution(algebra_moller(f, pair), pair.uncharged.involution),
            ),
        )
        back = algebra_moller_inverse(algebra_moller(f, pair), pair)
        trip = max(trip, relative_difference(back, f))
    return [
        _check("state_provenance", provenance, tol, "composed", 1, None),
        _check("star_homomorphism", hom, tol, "composed", size, seed),
        _check("involution_compatible", inv, tol, "composed", size, seed),
        _check("algebra_bijective", trip, tol, "composed", size, seed),
    ]

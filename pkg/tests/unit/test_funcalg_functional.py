"""Tests for antisymmetric tensors, functionals and their serialization."""

import json
from itertools import permutations
from pathlib import Path

import numpy as np
import pytest

from moller_workbench.errors import BundleMismatchError, DegreeOverflowError, ShapeError
from moller_workbench.fields import Bundle
from moller_workbench.funcalg.checks import random_functional, verify_leibniz, verify_wedge_laws
from moller_workbench.funcalg.functional import (
    FermionicFunctional,
    HbarSeries,
    derivative,
    evaluate,
    functional_involution,
    wedge,
)
from moller_workbench.funcalg.tensors import (
    antisymmetrize,
    permutation_parity,
    random_antisymmetric,
)
from moller_workbench.schema import FunctionalRecord

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def _vectors(rng, count, n):
    return [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(count)]


def test_permutation_parity():
    """Transpositions are odd, three-cycles even."""
    assert permutation_parity([0, 1, 2]) == 1
    assert permutation_parity([1, 0, 2]) == -1
    assert permutation_parity([1, 2, 0]) == 1


def test_canonical_storage_is_exactly_antisymmetric(rng):
    """Swapping two indices flips the sign bitwise; repeated indices hold zeros."""
    t = random_antisymmetric(rng, 4, 3)
    assert np.array_equal(t, -np.transpose(t, (1, 0, 2)))
    assert np.array_equal(t, -np.transpose(t, (0, 2, 1)))
    assert not t[1, 1, 2] and not t[3, 0, 3]


def test_evaluate_repeated_argument_is_zero(rng):
    """u ∧ u gives exactly zero."""
    f = random_functional(rng, 4, [2], Bundle.UNCHARGED)
    u = _vectors(rng, 1, 4)[0]
    assert evaluate(f, [u, u]) == 0


def test_evaluate_is_alternating(rng):
    """Swapping two arguments flips the sign exactly."""
    f = random_functional(rng, 5, [3], Bundle.UNCHARGED)
    u, v, w = _vectors(rng, 3, 5)
    assert evaluate(f, [u, v, w]) == -evaluate(f, [v, u, w])
    assert evaluate(f, [u, v, w]) == -evaluate(f, [w, v, u])


def test_evaluate_single_mode_gives_coefficient(rng):
    """A degree-1 functional on a unit mode vector returns its coefficient."""
    f = random_functional(rng, 4, [1], Bundle.UNCHARGED)
    e = np.zeros(4)
    e[2] = 1.0
    assert evaluate(f, [e]) == f.component(1)[2]


def test_evaluate_matches_permutation_sum(rng):
    """Degree 3: equal to the explicit antisymmetrized sum over all orderings."""
    f = random_functional(rng, 4, [3], Bundle.UNCHARGED)
    t = f.component(3)
    args = _vectors(rng, 3, 4)
    oracle = 0j
    for perm in permutations(range(3)):
        a, b, c = (args[i] for i in perm)
        oracle += permutation_parity(perm) * np.einsum("ijk,i,j,k->", t, a, b, c)
    assert evaluate(f, args) == pytest.approx(oracle / 6, rel=1e-12)


def test_evaluate_with_gram(rng):
    """Coordinates are turned into mode pairings through the Gram matrix."""
    f = random_functional(rng, 3, [1], Bundle.UNCHARGED)
    gram = rng.normal(size=(3, 3))
    x = rng.normal(size=3)
    assert evaluate(f, [x], gram) == pytest.approx(f.component(1) @ gram @ x, rel=1e-13)


def test_wedge_with_unit(rng):
    """F ∧ 1 = F."""
    f = random_functional(rng, 4, [1, 2], Bundle.UNCHARGED)
    one = FermionicFunctional.constant(4, Bundle.UNCHARGED)
    assert wedge(f, one).max_abs_diff(f) == 0.0
    assert wedge(one, f).max_abs_diff(f) == 0.0


def test_wedge_of_linear_functionals(rng):
    """(f∧g)(u₁, u₂) = f(u₁)g(u₂) − f(u₂)g(u₁)."""
    f = random_functional(rng, 4, [1], Bundle.UNCHARGED)
    g = random_functional(rng, 4, [1], Bundle.UNCHARGED)
    u1, u2 = _vectors(rng, 2, 4)
    expected = evaluate(f, [u1]) * evaluate(g, [u2]) - evaluate(f, [u2]) * evaluate(g, [u1])
    assert evaluate(wedge(f, g), [u1, u2]) == pytest.approx(expected, rel=1e-12)


def test_wedge_matches_antisymmetrization(rng):
    """Degree (2, 2): the shuffle sum equals 4!/(2!2!) times the antisymmetrized product."""
    f = random_functional(rng, 5, [2], Bundle.UNCHARGED)
    g = random_functional(rng, 5, [2], Bundle.UNCHARGED)
    oracle = 6.0 * antisymmetrize(np.multiply.outer(f.component(2), g.component(2)))
    np.testing.assert_allclose(wedge(f, g).component(4), oracle, rtol=0, atol=1e-12)


def test_wedge_laws():
    """Graded commutativity and associativity hold on random inputs."""
    assert all(check.passed for check in verify_wedge_laws(5, seed=1))


def test_wedge_degree_overflow(rng):
    """Products beyond the degree cap are a hard error."""
    f = random_functional(rng, 4, [1], Bundle.UNCHARGED, max_degree=2)
    g = random_functional(rng, 4, [2], Bundle.UNCHARGED, max_degree=2)
    with pytest.raises(DegreeOverflowError):
        wedge(f, g)
    with pytest.raises(DegreeOverflowError):
        FermionicFunctional(4, Bundle.UNCHARGED, {3: random_antisymmetric(rng, 4, 3)}, 2)


def test_wedge_refuses_mixed_bundles(rng):
    """Charged and uncharged functionals do not multiply."""
    f = random_functional(rng, 3, [1], Bundle.UNCHARGED)
    g = random_functional(rng, 3, [1], Bundle.CHARGED)
    with pytest.raises(BundleMismatchError):
        wedge(f, g)


def test_derivative_lowers_degree(rng):
    """d_h of a constant vanishes; d_h d_h F is zero up to rounding."""
    h = _vectors(rng, 1, 4)[0]
    one = FermionicFunctional.constant(4, Bundle.UNCHARGED)
    assert derivative(one, h).is_zero()

    f = random_functional(rng, 4, [3], Bundle.UNCHARGED)
    twice = derivative(derivative(f, h), h)
    assert twice.degrees in ([], [1])
    assert twice.scale() < 1e-12 * f.scale() * np.linalg.norm(h) ** 2


def test_derivative_inserts_first_argument(rng):
    """d_h F(u) = F(h, u)."""
    f = random_functional(rng, 4, [2], Bundle.UNCHARGED)
    h, u = _vectors(rng, 2, 4)
    assert evaluate(derivative(f, h), [u]) == pytest.approx(evaluate(f, [h, u]), rel=1e-12)


def test_derivative_rejects_wrong_length(rng):
    f = random_functional(rng, 4, [1], Bundle.UNCHARGED)
    with pytest.raises(ShapeError):
        derivative(f, np.ones(3))


def test_graded_leibniz():
    """d_h(F∧G) = d_hF∧G + (−1)^p F∧d_hG on degree-(1, 2) pairs."""
    assert verify_leibniz(5, seed=2).passed


def test_involution_examples(rng):
    """Zero stays zero, real self-conjugate linear functionals are fixed, (F*)* = F."""
    swap = np.array([2, 3, 0, 1])
    zero = FermionicFunctional.zero(4, Bundle.UNCHARGED)
    assert functional_involution(zero, swap).is_zero()

    real = FermionicFunctional.homogeneous(rng.normal(size=3), Bundle.UNCHARGED)
    fixed = functional_involution(real, np.arange(3))
    assert np.array_equal(fixed.component(1), real.component(1))

    f = random_functional(rng, 4, [2], Bundle.UNCHARGED)
    twice = functional_involution(functional_involution(f, swap), swap)
    assert np.array_equal(twice.component(2), f.component(2))


def test_involution_reverses_and_conjugates(rng):
    """(F*)(u, v) = conj F(v*, u*) with the mode involution swapping pairs."""
    swap = np.array([2, 3, 0, 1])
    f = random_functional(rng, 4, [2], Bundle.UNCHARGED)
    u, v = _vectors(rng, 2, 4)
    star_u, star_v = u.conj()[swap], v.conj()[swap]
    expected = np.conj(evaluate(f, [star_v, star_u]))
    assert evaluate(functional_involution(f, swap), [u, v]) == pytest.approx(expected, rel=1e-12)


def test_golden_functional_round_trip():
    """The stored record loads and serializes back unchanged."""
    payload = json.loads((FIXTURES / "golden_functional.json").read_text())
    f = FermionicFunctional.from_record(FunctionalRecord.model_validate(payload))
    assert f.component(0) == 1.5
    assert f.component(1)[0] == 0.5 + 0.25j
    assert f.component(2)[2, 1] == 3j
    assert f.to_record().model_dump() == payload


def test_series_length_is_capped(rng):
    """A series may not outgrow its order cap."""
    f = random_functional(rng, 3, [1], Bundle.UNCHARGED)
    with pytest.raises(DegreeOverflowError):
        HbarSeries([f, f, f], max_order=1)
    series = HbarSeries([f, f])
    assert series.coefficient(5).is_zero()
    assert HbarSeries.from_record(series.to_record()).max_abs_diff(series) == 0.0

"""Tests for the discrete Dirac operator, its Green operators and the dense oracle."""

import numpy as np
import pytest

from moller_workbench.clifford import Convention, build_rep
from moller_workbench.errors import (
    BundleMismatchError,
    CausalDomainError,
    ConfigurationError,
    OracleCapError,
)
from moller_workbench.fields import (
    Bundle,
    DoubledSection,
    SpinorSection,
    global_pairing,
    hermitian_pairing,
    relative_residual,
)
from moller_workbench.gauge import (
    GaugeFunction,
    GaugePotential,
    build_potential,
    check_gauge_independence,
    entwine_i,
)
from moller_workbench.green import (
    DiracOperator,
    advanced,
    apply_D,
    causal,
    convergence_monitor,
    doubled_green,
    retarded,
    to_dense,
)
from moller_workbench.grid import SpacetimeGrid, causal_future, causal_past


@pytest.fixture
def grid():
    return SpacetimeGrid(dim=2, nt=16, nx=32, dt=0.1, dx=0.1)


@pytest.fixture
def small_grid():
    return SpacetimeGrid(dim=2, nt=6, nx=8, dt=0.1, dx=0.1)


@pytest.fixture
def rep():
    return build_rep(2)


@pytest.fixture
def potential(grid):
    return build_potential(
        grid, "gaussian_bump", amplitude=0.4, direction=[1.0, 0.5], lower=[5, 12], upper=[9, 18]
    )


def _compact_source(grid, rng, lower, upper, bundle=Bundle.UNCHARGED):
    values = np.zeros(grid.shape + (2,), dtype=complex)
    box = tuple(slice(lo, hi + 1) for lo, hi in zip(lower, upper))
    shape = values[box].shape
    values[box] = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return SpinorSection(grid, bundle, values)


def _random_section(grid, rng, bundle=Bundle.UNCHARGED):
    shape = grid.shape + (2,)
    return SpinorSection(grid, bundle, rng.normal(size=shape) + 1j * rng.normal(size=shape))


def _smooth_section(grid, bundle=Bundle.CHARGED):
    t, x = np.meshgrid(np.arange(grid.nt), np.arange(grid.nx), indexing="ij")
    wave = np.exp(1j * (0.2 * t + 2 * np.pi * x / grid.nx))
    return SpinorSection(grid, bundle, np.stack([wave, 0.3 * wave.conj()], axis=-1))


def _compact_alpha(grid, amplitude, center, radius):
    t, x = np.indices(grid.shape, dtype=float)
    r = np.sqrt((t - center[0]) ** 2 + (x - center[1]) ** 2) / radius
    return amplitude * np.where(r < 1.0, np.cos(0.5 * np.pi * r) ** 4, 0.0)


# ── Construction ──


def test_transfer_is_unitary(grid, rep):
    """U†U = 1 to rounding, with and without mass."""
    assert DiracOperator(rep, grid).unitarity_defect() < 1e-14
    assert DiracOperator(rep, grid, mass=1.3).unitarity_defect() < 1e-14


def test_transfer_is_unitary_in_four_dimensions():
    """The composed axis shifts stay unitary in d = 4."""
    grid4 = SpacetimeGrid(dim=4, nt=4, nx=4, dt=0.1, dx=0.1)
    assert DiracOperator(build_rep(4), grid4, mass=0.5).unitarity_defect() < 1e-13


def test_operator_requires_unit_cfl(rep):
    """cfl < 1 is a configuration error naming cfl."""
    grid = SpacetimeGrid(dim=2, nt=8, nx=8, dt=0.05, dx=0.1)
    with pytest.raises(ConfigurationError, match="cfl"):
        DiracOperator(rep, grid)


def test_operator_requires_mostly_minus(grid):
    """The transport axes are only defined in the mostly-minus signature."""
    with pytest.raises(ConfigurationError):
        DiracOperator(build_rep(2, Convention(signature="mostly_plus")), grid)


def test_operator_rejects_negative_mass(grid, rep):
    """Mass must be non-negative."""
    with pytest.raises(ConfigurationError):
        DiracOperator(rep, grid, mass=-1.0)


# ── Dirac operator ──


def test_dirac_plus_coupling(grid, rep, potential):
    """Dᴳ(𝔦s) − 𝔦(Ds) = A(𝔦s) for the discrete coupling A."""
    s = _random_section(grid, np.random.default_rng(0))
    free = DiracOperator(rep, grid, mass=0.7)
    charged = free.with_potential(potential)
    lhs = apply_D(charged, entwine_i(s)).values - apply_D(free, s).values
    rhs = charged.coupling_map()(entwine_i(s)).values
    assert relative_residual(lhs, rhs) <= 1e-12


def test_zero_potential_agrees_bitwise(grid, rep):
    """With 𝒜 = 0 the charged operators reproduce the uncharged ones exactly."""
    rng = np.random.default_rng(1)
    s = _random_section(grid, rng)
    free = DiracOperator(rep, grid, mass=0.4)
    charged = free.with_potential(GaugePotential.zero(grid))
    assert apply_D(charged, entwine_i(s)).values.tobytes() == apply_D(free, s).values.tobytes()

    f = _compact_source(grid, rng, [4, 13], [6, 17])
    assert retarded(charged, entwine_i(f)).values.tobytes() == retarded(free, f).values.tobytes()


def test_dirac_is_block_bidiagonal(small_grid, rep):
    """Dense D only couples slice t to slices t and t + 1."""
    op = DiracOperator(rep, small_grid, mass=0.9)
    n = op.slice_dim
    nt = small_grid.nt
    blocks = to_dense(op.as_map()).matrix.reshape(nt, n, nt, n)
    for t in range(nt):
        for s in range(nt):
            if s not in (t, t + 1):
                assert not blocks[t, :, s, :].any(), (t, s)
        assert np.abs(blocks[t, :, t, :]).max() > 0


def test_transported_slices_solve_dirac_without_doubler(grid, rep):
    """ψ_t = Uᵗφ solves Dψ = 0 off the last row; (−1)ᵗUᵗφ does not."""
    rng = np.random.default_rng(2)
    op = DiracOperator(rep, grid, mass=0.6)
    psi = np.empty((grid.nt, op.slice_dim), dtype=complex)
    psi[0] = rng.normal(size=op.slice_dim) + 1j * rng.normal(size=op.slice_dim)
    for t in range(grid.nt - 1):
        psi[t + 1] = op.transfer @ psi[t]

    solution = op.apply_flat(psi.reshape(-1)).reshape(psi.shape)
    assert np.max(np.abs(solution[:-1])) < 1e-12

    signs = (-1.0) ** np.arange(grid.nt)
    staggered = op.apply_flat((signs[:, None] * psi).reshape(-1)).reshape(psi.shape)
    assert np.max(np.abs(staggered[:-1])) > 1.0


def test_wrong_bundle_refused(grid, rep, potential):
    """A charged operator never acts on uncharged sections."""
    op = DiracOperator(rep, grid, potential=potential)
    with pytest.raises(BundleMismatchError):
        apply_D(op, _random_section(grid, np.random.default_rng(3)))


# ── Green operators ──


def test_massless_delta_closed_form(rep):
    """A delta source moves along the two characteristics, one cell per slice."""
    grid = SpacetimeGrid(dim=2, nt=12, nx=32, dt=0.1, dx=0.1)
    t0, x0 = 3, 16
    values = np.zeros(grid.shape + (2,), dtype=complex)
    values[t0, x0] = [1.0 - 0.5j, 2.0j]
    f = SpinorSection(grid, Bundle.UNCHARGED, values)
    psi = retarded(DiracOperator(rep, grid), f).values.copy()

    step = -1j * grid.dt
    for t in range(t0 + 1, grid.nt):
        reach = t - t0
        assert psi[t, x0 - reach, 0] == pytest.approx(step * values[t0, x0, 1], abs=1e-15)
        assert psi[t, x0 + reach, 1] == pytest.approx(step * values[t0, x0, 0], abs=1e-15)
        psi[t, x0 - reach, 0] = 0
        psi[t, x0 + reach, 1] = 0
    assert np.max(np.abs(psi)) < 1e-15


def test_retarded_and_advanced_supports(grid, rep, potential):
    """supp S₋f ⊆ J⁺(supp f) and supp S₊f ⊆ J⁻(supp f)."""
    f = _compact_source(grid, np.random.default_rng(4), [4, 13], [6, 17], Bundle.CHARGED)
    op = DiracOperator(rep, grid, mass=1.1, potential=potential)
    region = f.support()
    assert not (retarded(op, f).support() & ~causal_future(grid, region)).any()
    assert not (advanced(op, f).support() & ~causal_past(grid, region)).any()


def test_green_operators_invert_dirac(grid, rep, potential):
    """D∘S₋ = id off the last row; D∘S₊ = id; S±∘D = id on compact sections."""
    rng = np.random.default_rng(5)
    op = DiracOperator(rep, grid, mass=0.8, potential=potential)
    f = _compact_source(grid, rng, [4, 13], [6, 17], Bundle.CHARGED)

    forward = apply_D(op, retarded(op, f)).values
    assert relative_residual(forward[:-1], f.values[:-1]) <= 1e-10
    backward = apply_D(op, advanced(op, f)).values
    assert relative_residual(backward, f.values) <= 1e-10

    g = _random_section(grid, rng, Bundle.CHARGED)
    assert relative_residual(apply_D(op, op.advanced_map()(g)).values, g.values) <= 1e-10

    s = _compact_source(grid, rng, [3, 12], [7, 19], Bundle.CHARGED)
    Ds = apply_D(op, s)
    assert relative_residual(op.retarded_map()(Ds).values, s.values) <= 1e-10
    assert relative_residual(op.advanced_map()(Ds).values, s.values) <= 1e-10


def test_retarded_and_advanced_are_adjoint(grid, rep, potential):
    """⟨s, S₋t⟩ = ⟨S₊s − i·dt·γ⁰s, t⟩ on arbitrary sections."""
    rng = np.random.default_rng(6)
    op = DiracOperator(rep, grid, mass=0.5, potential=potential)
    s = _random_section(grid, rng, Bundle.CHARGED)
    t = _random_section(grid, rng, Bundle.CHARGED)
    contact = s.with_values(op.contact_flat(s.flat()).reshape(s.values.shape))
    lhs = hermitian_pairing(rep, s, op.retarded_map()(t))
    rhs = hermitian_pairing(rep, op.advanced_map()(s) - contact, t)
    assert lhs == pytest.approx(rhs, rel=1e-11)

    without = hermitian_pairing(rep, op.advanced_map()(s), t)
    assert abs(without - lhs) > 1e-6 * abs(lhs)


def test_causal_kernel_is_skew(grid, rep, potential):
    """⟨s, St⟩ = −⟨Ss, t⟩: the contact terms cancel in S = S₋ − S₊."""
    rng = np.random.default_rng(16)
    op = DiracOperator(rep, grid, mass=0.5, potential=potential)
    s = _random_section(grid, rng, Bundle.CHARGED)
    t = _random_section(grid, rng, Bundle.CHARGED)
    lhs = hermitian_pairing(rep, s, op.causal_map()(t))
    rhs = hermitian_pairing(rep, op.causal_map()(s), t)
    assert lhs == pytest.approx(-rhs, rel=1e-11)


def test_time_links_are_unitary(grid, rep, potential):
    """Every link V_s and the transfer stay unitary; links sit on the support only."""
    op = DiracOperator(rep, grid, mass=0.5, potential=potential)
    assert op.unitarity_defect() < 1e-14
    assert set(op.links) == set(int(t) for t in potential.active_slices())
    for s, link in op.links.items():
        assert set(link.sites) == set(np.flatnonzero(potential.support[s].reshape(-1)))


def test_propagation_adjoint_matches_pairing(grid, rep, potential):
    """⟨a, P b⟩ = ⟨P^♯ a, b⟩ for the kick propagation and its backward sweep."""
    rng = np.random.default_rng(17)
    op = DiracOperator(rep, grid, mass=0.5, potential=potential)
    a = _random_section(grid, rng, Bundle.CHARGED)
    b = _random_section(grid, rng, Bundle.CHARGED)
    forward = b.with_values(op.propagate_flat(b.flat()).reshape(b.values.shape))
    backward = a.with_values(op.propagate_adjoint_flat(a.flat()).reshape(a.values.shape))
    lhs = hermitian_pairing(rep, a, forward)
    rhs = hermitian_pairing(rep, backward, b)
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_source_on_boundary_slice_refused(grid, rep):
    """Sources touching the first or last slice are refused."""
    op = DiracOperator(rep, grid)
    values = np.zeros(grid.shape + (2,), dtype=complex)
    values[0, 16] = [1.0, 0.0]
    with pytest.raises(CausalDomainError):
        retarded(op, SpinorSection(grid, Bundle.UNCHARGED, values))


def test_wrapping_cone_refused_unless_allowed(grid, rep):
    """A source near the seam wraps; allow_wrap lets it through."""
    f = _compact_source(grid, np.random.default_rng(7), [3, 0], [4, 2])
    with pytest.raises(CausalDomainError):
        retarded(DiracOperator(rep, grid), f)
    wrapped = retarded(DiracOperator(rep, grid, allow_wrap=True), f)
    assert wrapped.support()[-1].any()


# ── Doubled operators ──


def test_doubled_causal_is_symmetric(grid, rep, potential):
    """⟨S⊕u, v⟩ = ⟨u, S⊕v⟩."""
    rng = np.random.default_rng(8)
    green = doubled_green(DiracOperator(rep, grid, mass=0.6, potential=potential))

    def doubled():
        shape = grid.shape + (2,)
        v1 = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        v2 = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return DoubledSection.from_arrays(grid, Bundle.CHARGED, v1, v2)

    u, v = doubled(), doubled()
    lhs = global_pairing(rep, green.causal(u), v)
    rhs = global_pairing(rep, u, green.causal(v))
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_doubled_spinor_leg_matches_causal(grid, rep):
    """The spinor leg of S⊕ reproduces the causal propagator bitwise."""
    rng = np.random.default_rng(9)
    op = DiracOperator(rep, grid, mass=0.3)
    f = _compact_source(grid, rng, [5, 14], [7, 16])
    u = DoubledSection(f, SpinorSection.zeros(grid, 2, Bundle.UNCHARGED, conjugate=True))
    out = doubled_green(op).causal(u)
    assert out.u1.values.tobytes() == causal(op, f).values.tobytes()
    assert not out.u2.values.any()


# ── Dense oracle ──


def test_dense_kernels_of_free_green_operators(small_grid, rep):
    """Free S₋ has blocks −i·dt·U^(t−s)·γ⁰ below the diagonal; S₊ i·dt·U^(t−s)·γ⁰ on and above."""
    op = DiracOperator(rep, small_grid, mass=0.9)
    n = op.slice_dim
    nt = small_grid.nt
    ret = to_dense(op.retarded_map()).matrix.reshape(nt, n, nt, n)
    adv = to_dense(op.advanced_map()).matrix.reshape(nt, n, nt, n)
    transfer = op.transfer.toarray()
    transfer_inv = op.transfer_inv.toarray()
    gamma0 = np.kron(np.eye(small_grid.sites_per_slice), rep.gammas[0])
    dt = small_grid.dt
    zero = np.zeros((n, n))
    for t in range(nt):
        for s in range(nt):
            gap = t - s
            if gap > 0:
                expected = -1j * dt * np.linalg.matrix_power(transfer, gap) @ gamma0
            else:
                expected = zero
            np.testing.assert_allclose(ret[t, :, s, :], expected, atol=1e-14)
            if gap <= 0:
                expected = 1j * dt * np.linalg.matrix_power(transfer_inv, -gap) @ gamma0
            else:
                expected = zero
            np.testing.assert_allclose(adv[t, :, s, :], expected, atol=1e-14)


def test_dense_operators_satisfy_adjoint_identities(small_grid, rep):
    """h·S₋ = (h·(S₊ − C))† with contact C = i·dt·γ⁰; h·S is antihermitian."""
    rng = np.random.default_rng(10)
    comps = np.zeros((2,) + small_grid.shape, dtype=complex)
    comps[:, 2:4, 3:5] = 1j * rng.normal(size=(2, 2, 2))
    pot = GaugePotential(small_grid, comps, small_grid.box_region([2, 3], [3, 4]))
    op = DiracOperator(rep, small_grid, mass=0.4, potential=pot, allow_wrap=True)
    h = np.kron(np.eye(small_grid.nt * small_grid.sites_per_slice), rep.h)
    contact = 1j * small_grid.dt * np.kron(
        np.eye(small_grid.nt * small_grid.sites_per_slice), rep.gammas[0]
    )

    ret = h @ to_dense(op.retarded_map()).matrix
    adv = h @ (to_dense(op.advanced_map()).matrix - contact)
    np.testing.assert_allclose(ret, adv.conj().T, atol=1e-13)
    causal = h @ to_dense(op.causal_map()).matrix
    np.testing.assert_allclose(causal, -causal.conj().T, atol=1e-13)


def test_dense_coupling_columns_follow_support(small_grid, rep):
    """Nonzero columns of dense(A) sit on supp 𝒜 only."""
    comps = np.zeros((2,) + small_grid.shape, dtype=complex)
    comps[0, 2, 5] = 0.5j
    pot = GaugePotential(small_grid, comps, small_grid.site_region([(2, 5)]))
    op = DiracOperator(rep, small_grid, mass=0.3, potential=pot, allow_wrap=True)
    matrix = to_dense(op.coupling_map()).matrix
    columns = np.flatnonzero(np.any(matrix != 0, axis=0))
    site = 2 * small_grid.nx + 5
    assert set(columns) <= {2 * site, 2 * site + 1}
    assert columns.size > 0


def test_dense_cap_enforced(grid, rep):
    """Materializations above the cap are refused."""
    with pytest.raises(OracleCapError):
        to_dense(DiracOperator(rep, grid).as_map(), cap=100)


def test_dense_doubled_dimensions(small_grid, rep):
    """Doubled kernels act on twice the spinor dimension."""
    kernel = to_dense(doubled_green(DiracOperator(rep, small_grid)).causal)
    dim = 2 * small_grid.nt * small_grid.nx * 2
    assert kernel.shape == (dim, dim)
    assert kernel.sidecar()["domain_kind"] == "doubled"


# ── Diagnostics ──


def test_gauge_covariance_residual_is_linear_in_phase(grid, rep, potential):
    """The Dirac-level covariance residual shrinks with the phase amplitude."""
    op = DiracOperator(rep, grid, mass=0.5, potential=potential, allow_wrap=True)
    sections = [_smooth_section(grid)]

    def factory(pot):
        return op.with_potential(pot).as_map()

    residuals = []
    for amplitude in (1e-3, 1e-4):
        chi = GaugeFunction(grid, _compact_alpha(grid, amplitude, (8, 15), 4.0))
        check = check_gauge_independence(rep, potential, chi, sections, factory)
        assert check.coupling_residual <= 1e-12
        residuals.append(check.covariance_residual)
    assert np.all(np.isfinite(residuals))
    assert residuals[1] < residuals[0] / 5


def test_convergence_monitor_observes_first_order(rep):
    """S₋ of a steady smooth source converges at order one, with and without mass."""
    for mass in (0.0, 0.5):
        report = convergence_monitor(rep, mass=mass)
        assert report.sizes == [32, 64, 128, 256]
        assert len(report.errors) == 3
        assert len(report.orders) == 2
        assert report.errors[0] > report.errors[1] > report.errors[2] > 0
        assert 0.7 < report.orders[-1] < 1.3, (mass, report.orders)


def test_convergence_monitor_needs_whole_steps(rep):
    """A duration that is not a whole number of steps is refused."""
    with pytest.raises(ConfigurationError, match="whole number"):
        convergence_monitor(rep, mass=0.5, duration=1.0)

"""Verification suites and the shared objects they run against.

A suite is a function ``(context, seed) -> List[IdentityCheck]``. The
context builds the grid, operators and Møller map from a ``Config`` once;
the dense objects (vacuum state, pullback, mode bases) are built on first
use and shared between suites.
"""

import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from moller_workbench.clifford import (
    Convention,
    anticommutator_defect,
    build_rep,
    hermiticity_defect,
)
from moller_workbench.fields import (
    Bundle,
    SpinorSection,
    apply_pointwise,
    column_residual,
    flat_battery,
    relative_residual,
)
from moller_workbench.funcalg.checks import (
    verify_algebra_moller,
    verify_involution_laws,
    verify_leibniz,
    verify_peierls_laws,
    verify_star_laws,
    verify_wedge_laws,
)
from moller_workbench.funcalg.modes import (
    FIT_TOLERANCE,
    ModeBasis,
    ModePair,
    build_mode_basis,
    charged_partner,
    independent_partner,
)
from moller_workbench.gauge import (
    GaugeFunction,
    GaugePotential,
    build_potential,
    check_gauge_independence,
    entwine_bound_ratio,
)
from moller_workbench.green import DiracOperator, convergence_monitor
from moller_workbench.grid import (
    SpacetimeGrid,
    causal_future,
    causal_past,
    decode_region,
    encode_region,
    time_mirror,
)
from moller_workbench.hadamard import (
    TwoPointState,
    build_vacuum_state,
    check_anticommutator,
    check_anticommutator_dense,
    check_bisolution,
    check_hermiticity,
    check_pullback_paths,
    hermitian_spectrum,
    projector_defect,
    pullback_state,
)
from moller_workbench.moller import (
    MollerMap,
    verify_advanced_factor,
    verify_adjoint,
    verify_causal_factorization,
    verify_dense_adjoint,
    verify_dense_causal_factorization,
    verify_dense_green_factorization,
    verify_factorization,
    verify_green_factorization,
    verify_intertwining,
    verify_involution,
    verify_inverse,
    verify_retardation,
)
from moller_workbench.schema import Config, IdentityCheck

logger = logging.getLogger(__name__)

Suite = Callable[["WorkbenchContext", int], List[IdentityCheck]]

# Doubled index dimension up to which dense suites run on the main grid.
DENSE_LIMIT = 4096
CLIFFORD_TOLERANCE = 1e-14
WEDGE_MODES = 10


def suite_seed(root: int, index: int) -> int:
    """Seed of suite ``index`` derived from the root seed."""
    return int(np.random.SeedSequence([root, index]).generate_state(1)[0])


def _rescale_corner(
    corner: Optional[Sequence[int]], old: SpacetimeGrid, new: SpacetimeGrid
) -> Optional[List[int]]:
    if corner is None:
        return None
    old_sizes = (old.nt,) + old.spatial_shape
    new_sizes = (new.nt,) + new.spatial_shape
    return [
        min(max(int(round(c * n_new / n_old)), 1), n_new - 2)
        for c, n_old, n_new in zip(corner, old_sizes, new_sizes)
    ]


class WorkbenchContext:
    """Objects shared by the suites of one run.

    Args:
        config: Validated configuration.

    Raises:
        ConfigurationError: If the grid, operator, potential or Møller map
            cannot be built from ``config``.
    """

    def __init__(self, config: Config):
        self.config = config
        self.tolerances = config.tolerances
        self.battery = config.battery
        spec = config.grid
        self.convention = Convention(config.convention.signature, config.convention.hermiticity)
        self.grid = SpacetimeGrid(
            spec.dim, spec.nt, spec.nx, spec.dt, spec.dx, spec.spatial_topology
        )
        self.rep = build_rep(spec.dim, self.convention)
        self.free = DiracOperator(self.rep, self.grid, config.mass)
        self.potential = self._potential(self.grid)
        self.moller = MollerMap(self.free, self.potential, window_end=config.potential.window_end)
        self.charged = self.moller.charged
        self._lock = threading.RLock()
        self._cache: Dict[str, Any] = {}

    def _potential(self, grid: SpacetimeGrid) -> GaugePotential:
        spec = self.config.potential.model_dump()
        if grid != self.grid:
            spec["lower"] = _rescale_corner(spec["lower"], self.grid, grid)
            spec["upper"] = _rescale_corner(spec["upper"], self.grid, grid)
            spec["window_end"] = None
        return build_potential(grid, **spec)

    def _cached(self, key: str, factory: Callable[[], Any]) -> Any:
        with self._lock:
            if key not in self._cache:
                logger.info("building %s", key)
                self._cache[key] = factory()
            return self._cache[key]

    # ── Dense objects ──

    @property
    def doubled_dim(self) -> int:
        return 2 * self.grid.nt * self.grid.sites_per_slice * self.rep.fiber

    @property
    def dense_grid(self) -> SpacetimeGrid:
        """Main grid when it is small, forced dense or custom; otherwise the oracle grid."""
        oracle = self.config.oracle
        if (
            oracle.dense
            or self.doubled_dim <= DENSE_LIMIT
            or self.config.potential.profile == "custom_csv"
        ):
            return self.grid
        spec = self.config.grid
        return SpacetimeGrid(
            spec.dim, oracle.nt, oracle.nx, spec.dt, spec.dx, spec.spatial_topology
        )

    def dense_moller(self) -> MollerMap:
        def build() -> MollerMap:
            grid = self.dense_grid
            if grid == self.grid:
                return self.moller
            return MollerMap(DiracOperator(self.rep, grid, self.config.mass), self._potential(grid))

        return self._cached("dense_moller", build)

    def vacuum(self) -> TwoPointState:
        return self._cached(
            "vacuum",
            lambda: build_vacuum_state(
                self.rep,
                self.dense_grid,
                self.config.mass,
                self.config.state.zero_mode_policy,
                self.config.oracle.cap,
            ),
        )

    def pulled_back(self) -> TwoPointState:
        return self._cached(
            "pulled_back",
            lambda: pullback_state(self.vacuum(), self.dense_moller(), self.config.oracle.cap),
        )

    def mode_basis(self) -> ModeBasis:
        return self._cached(
            "mode_basis",
            lambda: build_mode_basis(
                self.dense_moller().free, n_pairs=self.config.state.modes, seed=self.battery.seed
            ),
        )

    def mode_pair(self) -> ModePair:
        return self._cached(
            "mode_pair",
            lambda: charged_partner(
                self.mode_basis(),
                self.dense_moller(),
                mixing=self.config.state.mixing,
                seed=self.battery.seed,
            ),
        )


# ── Helpers ──


def _exact(name: str, violations: float, size: int, seed: Optional[int], details: str = ""):
    check = IdentityCheck.judge(name, violations, 0.0, "exact", size, seed, details)
    logger.debug("%s violations=%g", name, violations)
    return check


def _renamed(check: IdentityCheck, prefix: str) -> IdentityCheck:
    return check.model_copy(update={"identity": f"{prefix}_{check.identity}"})


def _slice_mask(grid: SpacetimeGrid, margin: int) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[margin : grid.nt - margin] = True
    return mask


def _stack(grid: SpacetimeGrid, x: np.ndarray) -> np.ndarray:
    return x.reshape(grid.shape + (-1, x.shape[-1]))


def _centre_box(grid: SpacetimeGrid) -> np.ndarray:
    centre = [grid.nt // 2] + [grid.nx // 2] * (grid.dim - 1)
    return grid.box_region([c - 1 for c in centre], [c + 1 for c in centre])


def _compact_phase(grid: SpacetimeGrid, amplitude: float, radius: float) -> np.ndarray:
    """``cos⁴`` bump centred on the grid, vanishing beyond ``radius`` cells."""
    coords = np.indices(grid.shape, dtype=float)
    centre = [grid.nt / 2.0] + [grid.nx / 2.0] * (grid.dim - 1)
    r = np.sqrt(sum((c - c0) ** 2 for c, c0 in zip(coords, centre))) / radius
    return amplitude * np.where(r < 1.0, np.cos(0.5 * np.pi * r) ** 4, 0.0)


def _plane_wave(grid: SpacetimeGrid, fiber: int, bundle: Bundle) -> SpinorSection:
    coords = np.indices(grid.shape, dtype=float)
    wave = np.exp(1j * (0.2 * coords[0] + 2.0 * np.pi * coords[1] / grid.nx))
    weights = 0.3 ** np.arange(fiber)
    return SpinorSection(grid, bundle, wave[..., None] * weights)


# ── Suites ──


def clifford_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Anticommutators and h-hermiticity in both supported dimensions."""
    checks = []
    for dim in (2, 4):
        rep = build_rep(dim, ctx.convention)
        details = f"convention={ctx.convention.to_dict()}"
        checks.append(
            IdentityCheck.judge(
                f"clifford_anticommutator_d{dim}",
                anticommutator_defect(rep),
                CLIFFORD_TOLERANCE,
                "single",
                1,
                details=details,
            )
        )
        checks.append(
            IdentityCheck.judge(
                f"clifford_hermiticity_d{dim}",
                hermiticity_defect(rep),
                CLIFFORD_TOLERANCE,
                "single",
                1,
                details=details,
            )
        )
    return checks


def grid_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Cone identities and the run-length region codec on random regions."""
    grid = ctx.grid
    rng = np.random.default_rng(seed)
    size = ctx.battery.size
    mirror, idempotent, monotone, codec = 0, 0, 0, 0
    for _ in range(size):
        region = rng.random(grid.shape) < 0.02
        future = causal_future(grid, region)
        past = causal_past(grid, region)
        mirror += int(np.sum(past != time_mirror(causal_future(grid, time_mirror(region)))))
        idempotent += int(np.sum(causal_future(grid, future) != future))
        larger = region | (rng.random(grid.shape) < 0.02)
        monotone += int(np.sum(future & ~causal_future(grid, larger)))
        codec += int(np.sum(decode_region(grid, encode_region(region)) != region))
    return [
        _exact("cone_time_mirror", mirror, size, seed),
        _exact("cone_idempotent", idempotent, size, seed),
        _exact("region_codec", codec, size, seed),
        _exact("cone_monotone", monotone, size, seed),
    ]


def green_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Green operators of the charged operator, the gauge diagnostic and the stencil order."""
    tol = ctx.tolerances
    op = ctx.charged
    grid = ctx.grid
    size = ctx.battery.size
    rng = np.random.default_rng(seed)
    space = op.space
    checks = [
        IdentityCheck.judge("transfer_unitarity", op.unitarity_defect(), tol.single, "single", 1)
    ]

    f = flat_battery(space, rng, size, ctx.battery.kind)
    ret = _stack(grid, op.apply_flat(op.forward_flat(f)))
    adv = op.apply_flat(op.backward_flat(f))
    fs = _stack(grid, f)
    left = column_residual(ret[:-1].reshape(-1, size), fs[:-1].reshape(-1, size))
    left = max(left, column_residual(adv, f))
    s = flat_battery(space, rng, size, ctx.battery.kind, region=_slice_mask(grid, 2))
    ds = op.apply_flat(s)
    right = max(column_residual(op.forward_flat(ds), s), column_residual(op.backward_flat(ds), s))
    details = f"left={left:.3e} right={right:.3e}"
    checks.append(
        IdentityCheck.judge(
            "green_inverts_dirac", max(left, right), tol.composed, "composed", size, seed, details
        )
    )

    box = _centre_box(grid)
    g = flat_battery(space, rng, size, ctx.battery.kind, region=box)
    outside_future = ~causal_future(grid, box)
    outside_past = ~causal_past(grid, box)
    ret_support = np.any(_stack(grid, op.forward_flat(g)) != 0, axis=-2)
    adv_support = np.any(_stack(grid, op.backward_flat(g)) != 0, axis=-2)
    violations = int(np.sum(ret_support & outside_future[..., None]))
    violations += int(np.sum(adv_support & outside_past[..., None]))
    checks.append(_exact("green_support", violations, size, seed))

    u = flat_battery(space, rng, size, interior=False)
    v = flat_battery(space, rng, size, interior=False)
    lhs = _pairing(ctx, u, op.forward_flat(v))
    rhs = _pairing(ctx, op.backward_flat(u) - op.contact_flat(u), v)
    checks.append(
        IdentityCheck.judge(
            "green_adjoint", relative_residual(lhs, rhs), tol.composed, "composed", size, seed
        )
    )
    lhs = _pairing(ctx, u, op.causal_flat(v))
    rhs = -_pairing(ctx, op.causal_flat(u), v)
    checks.append(
        IdentityCheck.judge(
            "causal_skew", relative_residual(lhs, rhs), tol.composed, "composed", size, seed
        )
    )

    if grid.dim == 2:
        checks.append(_massless_characteristics(ctx, rng))
        report = convergence_monitor(ctx.rep, ctx.config.mass)
        orders = ", ".join(f"{o:.3f}" for o in report.orders)
        checks.append(
            IdentityCheck.judge(
                "stencil_convergence",
                min(report.errors),
                0.0,
                "monitor",
                len(report.sizes),
                details=f"sizes={report.sizes} orders=[{orders}] design order 1",
            )
        )

    if ctx.config.gauge_check.enabled:
        checks.extend(_gauge_checks(ctx))
    return checks


def _pairing(ctx: WorkbenchContext, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    hb = apply_pointwise(ctx.rep.h, b, ctx.rep.fiber)
    return np.sum(a.conj() * hb, axis=0)


def _massless_characteristics(ctx: WorkbenchContext, rng: np.random.Generator) -> IdentityCheck:
    """A massless delta source moves along the two light rays, one leg per ray, on every slice."""
    dx = ctx.grid.dx
    grid = SpacetimeGrid(2, 12, 32, dx, dx)
    t0, x0 = 3, 16
    values = np.zeros(grid.shape + (2,), dtype=complex)
    values[t0, x0] = rng.normal(size=2) + 1j * rng.normal(size=2)
    op = DiracOperator(ctx.rep, grid)
    psi = op.forward_flat(values.reshape(-1, 1)).reshape(values.shape)

    expected = np.zeros_like(values)
    step = -1j * grid.dt
    for t in range(t0 + 1, grid.nt):
        reach = t - t0
        expected[t, x0 - reach, 0] = step * values[t0, x0, 1]
        expected[t, x0 + reach, 1] = step * values[t0, x0, 0]
    residual = relative_residual(psi, expected)
    return IdentityCheck.judge(
        "massless_characteristics", residual, ctx.tolerances.single, "single", 1
    )


def _gauge_checks(ctx: WorkbenchContext) -> List[IdentityCheck]:
    spec = ctx.config.gauge_check
    grid = ctx.grid
    chi = GaugeFunction(grid, _compact_phase(grid, spec.amplitude, spec.radius))
    op = DiracOperator(ctx.rep, grid, ctx.config.mass, ctx.potential, allow_wrap=True)

    def factory(potential: GaugePotential):
        return op.with_potential(potential).as_map()

    sections = [_plane_wave(grid, ctx.rep.fiber, Bundle.CHARGED)]
    result = check_gauge_independence(ctx.rep, ctx.potential, chi, sections, factory)
    tol = ctx.tolerances
    return [
        IdentityCheck.judge(
            "gauge_coupling", result.coupling_residual, tol.single, "single", len(sections)
        ),
        IdentityCheck.judge(
            "gauge_covariance",
            result.covariance_residual,
            tol.gauge_covariance,
            "monitor",
            len(sections),
            details=f"phase amplitude={spec.amplitude:g}, centred-difference gradient",
        ),
    ]


def moller_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Operator identities of the Møller map on seeded batteries."""
    m = ctx.moller
    size, kind, tol = ctx.battery.size, ctx.battery.kind, ctx.tolerances
    checks = [
        verify_intertwining(m, seed, size, kind, tol),
        verify_retardation(m, seed + 1, size),
        verify_inverse(m, seed + 2, size, kind, tol),
        verify_adjoint(m, seed + 3, size, kind, tol),
        verify_involution(m, seed + 4, size, kind, tol),
        verify_factorization(m, seed + 5, size, kind, tol),
    ]
    rng = np.random.default_rng(seed + 6)
    battery = flat_battery(m.uncharged_space, rng, 4, interior=False)
    sections = [m.uncharged_space.from_flat(x) for x in battery.T]
    ratio = entwine_bound_ratio(m.grid, m.potential, sections, _slice_mask(m.grid, 2), 1)
    checks.append(
        IdentityCheck.judge("entwine_bound", ratio, 0.0, "monitor", len(sections), seed + 6)
    )
    if ctx.config.oracle.dense:
        checks.append(verify_dense_adjoint(m, ctx.config.oracle.cap, tol))
    return checks


def propagator_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Charged Green operators through the free ones and the Møller map.

    The battery checks run on the main grid; the dense factorizations on the
    dense grid.
    """
    m = ctx.moller
    size, kind, tol = ctx.battery.size, ctx.battery.kind, ctx.tolerances
    dense = ctx.dense_moller()
    cap = ctx.config.oracle.cap
    return [
        verify_green_factorization(m, seed, size, kind, tol),
        verify_causal_factorization(m, seed + 1, size, kind, tol),
        verify_advanced_factor(m, seed + 2, size, kind, tol),
        verify_dense_green_factorization(dense, cap, tol),
        verify_dense_causal_factorization(dense, cap, tol),
    ]


def hadamard_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Two-point conditions of the vacuum and of its pullback to the charged theory."""
    tol = ctx.tolerances
    size = min(ctx.battery.size, 16)
    cap = ctx.config.oracle.cap
    m = ctx.dense_moller()
    vacuum = ctx.vacuum()
    charged = ctx.pulled_back()
    grid_note = f"dense grid nt={m.grid.nt} nx={m.grid.nx}"

    checks = [
        IdentityCheck.judge(
            "spectral_projector",
            projector_defect(vacuum),
            tol.single,
            "single",
            1,
            details=grid_note,
        ),
        check_anticommutator(vacuum, m.free, seed, size, tol),
        check_bisolution(vacuum, m.free, seed + 1, size, tol),
        check_hermiticity(vacuum, seed + 2, size, tol),
        check_anticommutator_dense(vacuum, m.free, cap, tol),
    ]
    checks[1:] = [_renamed(c, "vacuum") for c in checks[1:]]

    pulled = [
        check_anticommutator(charged, m.charged, seed + 3, size, tol),
        check_bisolution(charged, m.charged, seed + 4, size, tol),
        check_pullback_paths(charged, vacuum, m, seed + 5, min(size, 8), tol),
    ]
    pulled[:2] = [_renamed(c, "pullback") for c in pulled[:2]]
    checks.extend(pulled)

    trivial = MollerMap(m.free, GaugePotential.zero(m.grid))
    degenerate = pullback_state(vacuum, trivial, cap)
    checks.append(
        IdentityCheck.judge(
            "pullback_trivial_potential",
            relative_residual(degenerate.matrix, vacuum.matrix),
            tol.single,
            "single",
            1,
        )
    )
    low, high = hermitian_spectrum(vacuum)
    checks.append(
        IdentityCheck.judge(
            "state_spectrum",
            low,
            0.0,
            "monitor",
            1,
            details=f"min={low:.6e} max={high:.6e}; positivity not asserted",
        )
    )
    return checks


def funcalg_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """Wedge, Leibniz, Peierls, star and involution laws on random functionals."""
    tol = ctx.tolerances
    size = ctx.battery.size
    basis = ctx.mode_basis()
    checks = verify_wedge_laws(WEDGE_MODES, seed, size, tol)
    checks.append(verify_leibniz(WEDGE_MODES, seed + 1, size, tol))
    checks.extend(verify_peierls_laws(basis, seed + 2, size, tol))
    checks.extend(verify_star_laws(basis, ctx.vacuum(), seed + 3, size, tol))
    checks.append(verify_involution_laws(basis, seed + 4, size))
    return checks


def theorem_suite(ctx: WorkbenchContext, seed: int) -> List[IdentityCheck]:
    """The algebra-level Møller map is an involutive star isomorphism.

    An independently placed charged basis is fitted as well and reported as
    a monitor; leaving the uncharged span is recorded, not failed.
    """
    checks = verify_algebra_moller(
        ctx.mode_pair(),
        ctx.vacuum(),
        ctx.pulled_back(),
        seed,
        ctx.battery.size,
        ctx.tolerances,
    )
    independent = independent_partner(ctx.mode_basis(), ctx.dense_moller(), seed=seed + 1)
    span = "in span" if independent.in_span else "out of span"
    checks.append(
        IdentityCheck.judge(
            "independent_partner_fit",
            independent.fit_residual,
            FIT_TOLERANCE,
            "monitor",
            independent.uncharged.n_modes,
            seed + 1,
            details=span,
        )
    )
    return checks


SUITES: Dict[str, Suite] = {
    "clifford": clifford_suite,
    "grid": grid_suite,
    "green": green_suite,
    "moller": moller_suite,
    "propagators": propagator_suite,
    "hadamard": hadamard_suite,
    "funcalg": funcalg_suite,
    "theorem": theorem_suite,
}

"""Tests for grids, causal queries and seminorms."""

import numpy as np
import pytest

from moller_workbench.errors import BoundaryError, ConfigurationError, ShapeError
from moller_workbench.fields import Bundle, DoubledSection, SpinorSection
from moller_workbench.grid import (
    SpacetimeGrid,
    causal_future,
    causal_past,
    cone_wraps,
    decode_region,
    encode_region,
    seminorm,
    time_mirror,
)


@pytest.fixture
def grid():
    return SpacetimeGrid(dim=2, nt=12, nx=16, dt=0.1, dx=0.1)


def _brute_future(grid, sites):
    out = grid.empty_region()
    for t in range(grid.nt):
        for x in range(grid.nx):
            for t0, x0 in sites:
                dist = abs(x - x0)
                dist = min(dist, grid.nx - dist)
                if t >= t0 and dist <= t - t0:
                    out[t, x] = True
    return out


def test_grid_rejects_cfl_above_one():
    """cfl > 1 is a configuration error naming cfl."""
    with pytest.raises(ConfigurationError, match="cfl"):
        SpacetimeGrid(dim=2, nt=8, nx=8, dt=0.2, dx=0.1)


def test_grid_rejects_tiny_axes():
    """nt and nx must be at least 2."""
    with pytest.raises(ConfigurationError):
        SpacetimeGrid(dim=2, nt=1, nx=8, dt=0.1, dx=0.1)


def test_empty_region_has_empty_cones(grid):
    """Empty in, empty out."""
    assert not causal_future(grid, grid.empty_region()).any()
    assert not causal_past(grid, grid.empty_region()).any()


def test_single_site_cone(grid):
    """Forward cone of one site is |x - x0| <= t - t0."""
    region = grid.site_region([(3, 8)])
    np.testing.assert_array_equal(causal_future(grid, region), _brute_future(grid, [(3, 8)]))


def test_union_of_two_sites_matches_brute_force(grid):
    """Cone of a union equals the exhaustive scan."""
    sites = [(2, 3), (5, 12)]
    region = grid.site_region(sites)
    np.testing.assert_array_equal(causal_future(grid, region), _brute_future(grid, sites))


def test_cone_idempotent_and_monotone(grid):
    """J+ ∘ J+ = J+ and r ⊆ J+(r)."""
    rng = np.random.default_rng(0)
    region = rng.random(grid.shape) > 0.97
    future = causal_future(grid, region)
    assert np.all(future[region])
    np.testing.assert_array_equal(causal_future(grid, future), future)


def test_past_is_time_mirror_of_future(grid):
    """J-(r) = mirror(J+(mirror(r)))."""
    rng = np.random.default_rng(1)
    region = rng.random(grid.shape) > 0.95
    expected = time_mirror(causal_future(grid, time_mirror(region)))
    np.testing.assert_array_equal(causal_past(grid, region), expected)


def test_past_single_site(grid):
    """Mirror of the single-site forward cone."""
    region = grid.site_region([(9, 4)])
    past = causal_past(grid, region)
    assert past[9, 4] and past[0, 4 - 9 + 16] and not past[10, 4]


def test_region_shape_checked(grid):
    """Masks of the wrong shape are refused."""
    with pytest.raises(ShapeError):
        causal_future(grid, np.zeros((3, 3), dtype=bool))


def test_cone_wraps_detection():
    """A source near the edge wraps; a central short-lived one does not."""
    grid = SpacetimeGrid(dim=2, nt=6, nx=32, dt=0.1, dx=0.1)
    assert cone_wraps(grid, grid.site_region([(0, 1)]))
    assert not cone_wraps(grid, grid.site_region([(0, 16)]))


def test_region_run_length_encoding(grid):
    """Encoding then decoding restores the mask."""
    region = grid.box_region([2, 3], [4, 9])
    runs = encode_region(region)
    assert sum(runs) == grid.nt * grid.nx
    np.testing.assert_array_equal(decode_region(grid, runs), region)


def _constant_section(grid, value):
    values = np.broadcast_to(np.asarray(value, dtype=complex), grid.shape + (2,)).copy()
    return SpinorSection(grid, Bundle.UNCHARGED, values)


def test_seminorm_zero_section(grid):
    """Zero section has zero seminorm at every order."""
    section = SpinorSection.zeros(grid, 2, Bundle.UNCHARGED)
    region = grid.box_region([2, 2], [8, 10])
    for n in range(3):
        assert seminorm(grid, section, region, n) == 0.0


def test_seminorm_constant_section(grid):
    """n = 0 gives the fiber norm of the constant; derivatives vanish."""
    section = _constant_section(grid, [3.0, 4.0j])
    region = grid.box_region([2, 2], [8, 10])
    assert seminorm(grid, section, region, 0) == pytest.approx(5.0)
    assert seminorm(grid, section, region, 2) == pytest.approx(5.0)


def test_seminorm_first_order_against_loop_oracle(grid):
    """First differences match an independent loop over the region."""
    t, x = np.meshgrid(np.arange(grid.nt), np.arange(grid.nx), indexing="ij")
    wave = np.exp(1j * (0.3 * t + 2 * np.pi * 2 * x / grid.nx))
    values = np.stack([wave, 0.5 * wave], axis=-1)
    section = SpinorSection(grid, Bundle.UNCHARGED, values)
    region = grid.box_region([1, 0], [9, grid.nx - 1])

    best = 0.0
    for tt in range(grid.nt):
        for xx in range(grid.nx):
            if not region[tt, xx]:
                continue
            here = values[tt, xx]
            best = max(best, np.linalg.norm(here))
            dt_val = (values[tt + 1, xx] - here) / grid.dt
            dx_val = (values[tt, (xx + 1) % grid.nx] - here) / grid.dx
            best = max(best, np.linalg.norm(dt_val), np.linalg.norm(dx_val))
    assert seminorm(grid, section, region, 1) == pytest.approx(best, rel=1e-12)


def test_seminorm_monotone_in_order(grid):
    """Raising n never lowers the seminorm."""
    rng = np.random.default_rng(2)
    values = rng.normal(size=grid.shape + (2,)) + 1j * rng.normal(size=grid.shape + (2,))
    u = DoubledSection.from_arrays(grid, Bundle.UNCHARGED, values, values.conj())
    region = grid.box_region([3, 3], [7, 12])
    norms = [seminorm(grid, u, region, n) for n in range(4)]
    assert norms == sorted(norms)


def test_seminorm_order_beyond_time_axis(grid):
    """An order wider than the time axis is a boundary error."""
    section = _constant_section(grid, [1.0, 0.0])
    with pytest.raises(BoundaryError):
        seminorm(grid, section, grid.box_region([0, 0], [1, 1]), grid.nt)

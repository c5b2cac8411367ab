"""Tests for report and dump persistence."""

import csv
import json

import numpy as np
import pytest

from moller_workbench.clifford import build_rep
from moller_workbench.errors import ShapeError
from moller_workbench.fields import Bundle, SpinorSection
from moller_workbench.funcalg.functional import FermionicFunctional, HbarSeries
from moller_workbench.green import DiracOperator, to_dense
from moller_workbench.grid import SpacetimeGrid
from moller_workbench.schema import FunctionalRecord, IdentityCheck, SeriesRecord, SuiteResult
from moller_workbench.state.manager import ReportStore, read_section_binary


@pytest.fixture
def store(temp_dir):
    """Create a ReportStore instance with temp directory."""
    return ReportStore(work_dir=str(temp_dir))


@pytest.fixture
def grid():
    return SpacetimeGrid(dim=2, nt=4, nx=6, dt=0.1, dx=0.1)


@pytest.fixture
def section(grid):
    rng = np.random.default_rng(0)
    shape = grid.shape + (2,)
    return SpinorSection(grid, Bundle.CHARGED, rng.normal(size=shape) + 1j * rng.normal(size=shape))


def test_save_and_get_report(store):
    """Test saving and retrieving a model report."""
    result = SuiteResult(
        suite="clifford",
        status="passed",
        checks=[IdentityCheck.judge("anticommutator", 0.0, 1e-14, "single", 1)],
    )
    path = store.save_report("clifford", result)
    loaded = store.get_report("clifford")

    assert path.name == "clifford-report.json"
    assert loaded["checks"][0]["identity-id"] == "anticommutator"
    assert loaded["checks"][0]["pass"] is True


def test_save_dict_report_is_sorted(store):
    store.save_report("scenario", {"b": 1, "a": 2})
    text = (store.work_dir / "scenario-report.json").read_text()
    assert text.index('"a"') < text.index('"b"')


def test_get_nonexistent_report(store):
    assert store.get_report("verify") is None


def test_save_creates_work_dir(tmp_path):
    """Test that the store creates its directory."""
    work_dir = tmp_path / "nested" / "work"
    ReportStore(work_dir)
    assert work_dir.is_dir()


def test_section_csv_rows(store, section):
    """One row per site and component, values printed round-trippably."""
    path = store.save_section_csv("pulse", section)
    with open(path) as f:
        rows = list(csv.reader(f))

    assert rows[0] == ["t", "x1", "component", "re", "im"]
    assert len(rows) == 1 + section.values.size
    t, x, c, re, im = rows[1 + 7]
    value = section.values[int(t), int(x), int(c)]
    assert float(re) == value.real
    assert float(im) == value.imag


def test_section_binary_reload(store, section):
    """The binary dump restores the grid and the values bitwise."""
    path = store.save_section_binary("pulse", section)
    grid, loaded = read_section_binary(path, Bundle.CHARGED)

    assert grid == section.grid
    assert np.array_equal(loaded.values, section.values)
    assert loaded.bundle == Bundle.CHARGED


def test_section_binary_rejects_truncation(store, section):
    path = store.save_section_binary("pulse", section)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ShapeError):
        read_section_binary(path)


def test_section_binary_rejects_wrong_magic(store, section):
    path = store.save_section_binary("pulse", section)
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(ShapeError):
        read_section_binary(path)


def test_save_section_writes_both_formats(store, section):
    paths = store.save_section("pulse", section)
    assert [p.suffix for p in paths] == [".csv", ".mwsd"]
    assert [p.suffix for p in store.save_section("text", section, binary=False)] == [".csv"]


def test_save_kernel_sidecar(store, grid):
    """Raw complex128 bytes with a JSON sidecar describing the layout."""
    kernel = to_dense(DiracOperator(build_rep(2), grid, mass=1.0).as_map())
    raw = store.save_kernel("dirac", kernel, {"provenance": "test"})

    matrix = np.frombuffer(raw.read_bytes(), dtype="<c16").reshape(kernel.shape)
    assert np.array_equal(matrix, kernel.matrix)
    with open(store.work_dir / "dirac.json") as f:
        sidecar = json.load(f)
    assert sidecar["shape"] == list(kernel.shape)
    assert sidecar["dtype"] == "complex128-le"
    assert sidecar["provenance"] == "test"
    assert sidecar["grid"]["nt"] == 4


def test_save_functional_and_series(store):
    f = FermionicFunctional.homogeneous(np.array([1.0, -2.0j, 0.0]), Bundle.UNCHARGED)
    path = store.save_functional("linear", f)
    record = FunctionalRecord.model_validate_json(path.read_text())
    assert FermionicFunctional.from_record(record).max_abs_diff(f) == 0.0

    series = HbarSeries.of(f)
    path = store.save_functional("series", series)
    assert len(SeriesRecord.model_validate_json(path.read_text()).coefficients) == 1

"""Shared pytest fixtures for all tests."""

import json
import tempfile
from pathlib import Path
from typing import Any, Dict

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def sample_config(temp_dir) -> Dict[str, Any]:
    """Small workbench configuration that runs every suite in seconds."""
    return {
        "project_name": "test-workbench",
        "work_dir": str(temp_dir / "work"),
        "grid": {"dim": 2, "nt": 8, "nx": 16, "dt": 0.1, "dx": 0.1},
        "mass": 1.0,
        "potential": {
            "profile": "gaussian_bump",
            "amplitude": 0.5,
            "direction": [1.0, -0.5],
            "lower": [2, 6],
            "upper": [4, 9],
        },
        "battery": {"size": 8, "seed": 7},
        "state": {"modes": 2, "mixing": 0.25},
        "gauge_check": {"amplitude": 1e-4, "radius": 2.0},
        "scenario": {
            "sources": [{"name": "pulse", "lower": [3, 7], "upper": [4, 8], "seed": 1}]
        },
        "max_parallel_suites": 2,
    }


@pytest.fixture
def sample_config_file(temp_dir, sample_config) -> Path:
    """Write ``sample_config`` to disk."""
    path = temp_dir / "config.json"
    with open(path, "w") as f:
        json.dump(sample_config, f)
    return path


@pytest.fixture
def reference_config(temp_dir) -> Dict[str, Any]:
    """Bundled reference configuration with its work directory redirected."""
    with open(FIXTURES / "reference_config.json") as f:
        data = json.load(f)
    data["work_dir"] = str(temp_dir / "reference")
    return data

"""Report and dump persistence for workbench runs."""

import csv
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from moller_workbench.errors import ShapeError
from moller_workbench.fields import Bundle, SpinorSection
from moller_workbench.funcalg.functional import FermionicFunctional, HbarSeries
from moller_workbench.green import DenseKernel
from moller_workbench.grid import SpacetimeGrid

logger = logging.getLogger(__name__)

SECTION_MAGIC = b"MWSD"
SECTION_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIdd")


class ReportStore:
    """Writes reports, section dumps and kernel dumps under one directory."""

    def __init__(self, work_dir: Union[str, Path]):
        """Initialize the store.

        Args:
            work_dir: Working directory for reports and dumps.
        """
        self.work_dir = Path(work_dir)
        self.work_dir.mkdir(parents=True, exist_ok=True)

    def _get_report_file(self, name: str) -> Path:
        return self.work_dir / f"{name}-report.json"

    # ── Reports ──

    def save_report(self, name: str, report: Union[BaseModel, Dict[str, Any]]) -> Path:
        """Save a report as indented JSON.

        Args:
            name: Report name, e.g. ``verify``.
            report: Pydantic model (dumped by alias) or plain dict.

        Returns:
            Path of the written file.
        """
        payload = report.model_dump(by_alias=True) if isinstance(report, BaseModel) else report
        path = self._get_report_file(name)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info("wrote %s", path)
        return path

    def get_report(self, name: str) -> Optional[Dict[str, Any]]:
        """Load a saved report, or ``None`` if it does not exist."""
        path = self._get_report_file(name)
        if not path.exists():
            return None

        with open(path) as f:
            return json.load(f)

    # ── Sections ──

    def save_section_csv(self, name: str, section: SpinorSection) -> Path:
        """Rows ``t, x.., component, re, im`` in row-major site order."""
        path = self.work_dir / f"{name}.csv"
        grid = section.grid
        axes = ["t"] + [f"x{k}" for k in range(1, grid.dim)]
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(axes + ["component", "re", "im"])
            for index in np.ndindex(*section.values.shape):
                value = section.values[index]
                writer.writerow(
                    list(index) + [f"{value.real:.17g}", f"{value.imag:.17g}"]
                )
        return path

    def save_section_binary(self, name: str, section: SpinorSection) -> Path:
        """``MWSD`` header followed by little-endian complex128 values."""
        grid = section.grid
        header = _HEADER.pack(
            SECTION_MAGIC,
            SECTION_VERSION,
            grid.dim,
            grid.nt,
            grid.nx,
            section.fiber,
            grid.dt,
            grid.dx,
        )
        path = self.work_dir / f"{name}.mwsd"
        with open(path, "wb") as f:
            f.write(header)
            f.write(np.ascontiguousarray(section.values, dtype="<c16").tobytes())
        return path

    def save_section(self, name: str, section: SpinorSection, binary: bool = True) -> List[Path]:
        paths = [self.save_section_csv(name, section)]
        if binary:
            paths.append(self.save_section_binary(name, section))
        return paths

    # ── Kernels and functionals ──

    def save_kernel(
        self, name: str, kernel: DenseKernel, extra: Optional[Dict[str, Any]] = None
    ) -> Path:
        """Raw little-endian complex128 matrix plus a JSON sidecar."""
        raw = self.work_dir / f"{name}.bin"
        raw.write_bytes(np.ascontiguousarray(kernel.matrix, dtype="<c16").tobytes())
        sidecar = dict(kernel.sidecar())
        sidecar["dtype"] = "complex128-le"
        if extra:
            sidecar.update(extra)
        with open(self.work_dir / f"{name}.json", "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
        return raw

    def save_functional(self, name: str, value: Union[FermionicFunctional, HbarSeries]) -> Path:
        path = self.work_dir / f"{name}.functional.json"
        with open(path, "w") as f:
            f.write(value.to_record().model_dump_json(indent=2))
        return path


def read_section_binary(
    path: Union[str, Path], bundle: Bundle = Bundle.UNCHARGED
) -> Tuple[SpacetimeGrid, SpinorSection]:
    """Load a ``MWSD`` dump.

    Raises:
        ShapeError: If the magic, version or payload size is wrong.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ShapeError(f"{path} is too short for a section header")
    magic, version, dim, nt, nx, fiber, dt, dx = _HEADER.unpack_from(data)
    if magic != SECTION_MAGIC or version != SECTION_VERSION:
        raise ShapeError(f"{path} is not a version {SECTION_VERSION} section dump")
    grid = SpacetimeGrid(dim=dim, nt=nt, nx=nx, dt=dt, dx=dx)
    values = np.frombuffer(data[_HEADER.size :], dtype="<c16")
    expected = int(np.prod(grid.shape)) * fiber
    if values.size != expected:
        raise ShapeError(f"{path} holds {values.size} values, expected {expected}")
    return grid, SpinorSection(grid, bundle, values.reshape(grid.shape + (fiber,)).copy())

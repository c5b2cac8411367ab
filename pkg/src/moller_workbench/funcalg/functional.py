"""Fermionic functionals on a finite mode basis and formal ħ-series of them.

A functional is a finite sequence of homogeneous components. The degree-p
component acts on p mode vectors through the mode functionals
``ℓ_a(u) = ⟨φ_a, u⟩``:

    F_p(u₁, …, u_p) = Σ_a F[a₁..a_p] ℓ_{a₁}(u₁) ⋯ ℓ_{a_p}(u_p)
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from moller_workbench.errors import BundleMismatchError, DegreeOverflowError, ShapeError
from moller_workbench.fields import Bundle
from moller_workbench.funcalg.conventions import DEFAULT_MAX_DEGREE, involution_sign
from moller_workbench.funcalg.tensors import (
    canonical_arguments,
    canonicalize,
    check_tensor,
    contract_leading,
    wedge_tensors,
)
from moller_workbench.schema import ComponentRecord, FunctionalRecord, SeriesRecord


@dataclass(frozen=True, eq=False)
class FermionicFunctional:
    """Antisymmetric coefficient tensors keyed by degree.

    Components are stored canonically and read-only; all-zero components are
    dropped.
    """

    n_modes: int
    bundle: Bundle
    components: Dict[int, np.ndarray] = field(default_factory=dict)
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self) -> None:
        stored: Dict[int, np.ndarray] = {}
        for p, t in sorted(self.components.items()):
            t = np.asarray(t, dtype=complex)
            if t.ndim != p:
                raise ShapeError(f"component {p} has rank {t.ndim}")
            if p > self.max_degree:
                raise DegreeOverflowError(f"degree {p} exceeds the cap of {self.max_degree}")
            check_tensor(t, self.n_modes)
            t = canonicalize(t)
            if not t.any():
                continue
            t.setflags(write=False)
            stored[p] = t
        object.__setattr__(self, "components", stored)

    # ── Constructors ──

    @classmethod
    def zero(
        cls, n_modes: int, bundle: Bundle, max_degree: int = DEFAULT_MAX_DEGREE
    ) -> "FermionicFunctional":
        return cls(n_modes, bundle, {}, max_degree)

    @classmethod
    def constant(
        cls,
        n_modes: int,
        bundle: Bundle,
        value: complex = 1.0,
        max_degree: int = DEFAULT_MAX_DEGREE,
    ) -> "FermionicFunctional":
        return cls(n_modes, bundle, {0: np.asarray(value, dtype=complex)}, max_degree)

    @classmethod
    def homogeneous(
        cls, tensor: np.ndarray, bundle: Bundle, max_degree: int = DEFAULT_MAX_DEGREE
    ) -> "FermionicFunctional":
        """Functional with a single component given by ``tensor``.

        Raises:
            ShapeError: If ``tensor`` has rank zero (use ``constant``).
        """
        tensor = np.asarray(tensor, dtype=complex)
        if tensor.ndim == 0:
            raise ShapeError("use constant() for degree-0 functionals")
        return cls(tensor.shape[0], bundle, {tensor.ndim: tensor}, max_degree)

    # ── Accessors ──

    @property
    def degrees(self) -> List[int]:
        return list(self.components)

    @property
    def degree(self) -> int:
        """Highest stored degree (zero for the zero functional)."""
        return max(self.components, default=0)

    def component(self, p: int) -> np.ndarray:
        if p in self.components:
            return self.components[p]
        return np.zeros((self.n_modes,) * p, dtype=complex)

    def is_zero(self) -> bool:
        return not self.components

    def retag(self, bundle: Bundle) -> "FermionicFunctional":
        return FermionicFunctional(self.n_modes, bundle, self.components, self.max_degree)

    def max_abs_diff(self, other: "FermionicFunctional") -> float:
        self._check(other)
        degrees = set(self.components) | set(other.components)
        return max(
            (float(np.max(np.abs(self.component(p) - other.component(p)))) for p in degrees),
            default=0.0,
        )

    def scale(self) -> float:
        """Largest coefficient magnitude."""
        return max((float(np.max(np.abs(t))) for t in self.components.values()), default=0.0)

    # ── Linear structure ──

    def _check(self, other: "FermionicFunctional") -> None:
        if self.bundle != other.bundle:
            raise BundleMismatchError(
                f"cannot combine {self.bundle.value} with {other.bundle.value} functionals"
            )
        if self.n_modes != other.n_modes:
            raise ShapeError(f"mode counts differ: {self.n_modes} vs {other.n_modes}")

    def _combine(self, other: "FermionicFunctional", sign: float) -> "FermionicFunctional":
        self._check(other)
        degrees = set(self.components) | set(other.components)
        comps = {p: self.component(p) + sign * other.component(p) for p in degrees}
        return FermionicFunctional(
            self.n_modes, self.bundle, comps, max(self.max_degree, other.max_degree)
        )

    def __add__(self, other: "FermionicFunctional") -> "FermionicFunctional":
        return self._combine(other, 1.0)

    def __sub__(self, other: "FermionicFunctional") -> "FermionicFunctional":
        return self._combine(other, -1.0)

    def __mul__(self, scalar: complex) -> "FermionicFunctional":
        comps = {p: scalar * t for p, t in self.components.items()}
        return FermionicFunctional(self.n_modes, self.bundle, comps, self.max_degree)

    __rmul__ = __mul__

    def __neg__(self) -> "FermionicFunctional":
        return self * -1.0

    # ── Serialization ──

    def to_record(self) -> FunctionalRecord:
        records = []
        for p, t in self.components.items():
            indices, real, imag = [], [], []
            for idx in combinations(range(self.n_modes), p):
                value = complex(t[idx])
                if value != 0:
                    indices.append(list(idx))
                    real.append(value.real)
                    imag.append(value.imag)
            records.append(ComponentRecord(degree=p, indices=indices, real=real, imag=imag))
        return FunctionalRecord(
            n_modes=self.n_modes,
            bundle=self.bundle.value,
            max_degree=self.max_degree,
            components=records,
        )

    @classmethod
    def from_record(cls, record: FunctionalRecord) -> "FermionicFunctional":
        comps: Dict[int, np.ndarray] = {}
        for rec in record.components:
            t = np.zeros((record.n_modes,) * rec.degree, dtype=complex)
            for idx, re, im in zip(rec.indices, rec.real, rec.imag):
                if any(a >= record.n_modes for a in idx):
                    raise ShapeError(f"index {idx} out of range for {record.n_modes} modes")
                t[tuple(idx)] = complex(re, im)
            comps[rec.degree] = t
        return cls(record.n_modes, Bundle(record.bundle), comps, record.max_degree)


def _same_family(functionals: Iterable[FermionicFunctional]) -> FermionicFunctional:
    items = list(functionals)
    for other in items[1:]:
        items[0]._check(other)
    return items[0]


# ── Operations ────────────────────────────────────────────────────────────


def evaluate(
    F: FermionicFunctional, arguments: Sequence[np.ndarray], gram: Optional[np.ndarray] = None
) -> complex:
    """``F_p(u₁, …, u_p)`` on mode vectors given by their coordinates.

    Arguments are put into a canonical order first, so swapping two of them
    flips the sign exactly and a repeated argument gives exactly zero.

    Args:
        F: Functional to evaluate.
        arguments: ``p`` coordinate vectors of length ``N``.
        gram: Mode Gram matrix turning coordinates into ``ℓ_a(u)``; when
            omitted the arguments are taken as ``ℓ_a(u)`` directly.
    """
    args = np.asarray(arguments, dtype=complex).reshape(-1, F.n_modes)
    p = args.shape[0]
    if p == 0:
        return complex(F.component(0))
    if p not in F.components:
        return 0j
    ordered = canonical_arguments(args)
    if ordered is None:
        return 0j
    rows, sign = ordered
    duals = rows if gram is None else rows @ np.asarray(gram).T
    return complex(sign * contract_leading(F.components[p], list(duals)))


def wedge(F: FermionicFunctional, G: FermionicFunctional) -> FermionicFunctional:
    """Antisymmetric product; degree ``p + q`` components from degrees ``p`` and ``q``.

    Raises:
        DegreeOverflowError: If a product component exceeds the degree cap.
    """
    _same_family([F, G])
    cap = max(F.max_degree, G.max_degree)
    comps: Dict[int, np.ndarray] = {}
    for p, a in F.components.items():
        for q, b in G.components.items():
            if p + q > cap:
                raise DegreeOverflowError(
                    f"wedge of degrees {p} and {q} exceeds the cap of {cap}"
                )
            term = wedge_tensors(a, b)
            comps[p + q] = comps[p + q] + term if p + q in comps else term
    return FermionicFunctional(F.n_modes, F.bundle, comps, cap)


def derivative(
    F: FermionicFunctional, h: np.ndarray, gram: Optional[np.ndarray] = None
) -> FermionicFunctional:
    """Left derivative ``d_h F_p(u) = F_p(h, u)``; lowers every degree by one."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (F.n_modes,):
        raise ShapeError(f"direction must have length {F.n_modes}")
    dual = h if gram is None else np.asarray(gram) @ h
    comps = {
        p - 1: contract_leading(t, [dual]) for p, t in F.components.items() if p > 0
    }
    return FermionicFunctional(F.n_modes, F.bundle, comps, F.max_degree)


def functional_involution(
    F: FermionicFunctional, mode_involution: np.ndarray
) -> FermionicFunctional:
    """``(F*)_p(u₁..u_p) = conj F_p(u_p*, …, u₁*)``.

    Args:
        F: Functional to conjugate.
        mode_involution: Permutation ``J`` with ``φ_a* = φ_{J(a)}``.
    """
    perm = np.asarray(mode_involution, dtype=int)
    if perm.shape != (F.n_modes,):
        raise ShapeError(f"mode involution must have length {F.n_modes}")
    comps = {}
    for p, t in F.components.items():
        moved = t[np.ix_(*([perm] * p))] if p else t
        comps[p] = involution_sign(p) * np.conj(moved)
    return FermionicFunctional(F.n_modes, F.bundle, comps, F.max_degree)


# ── ħ-series ──────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class HbarSeries:
    """Truncated formal power series ``Σ_n ħⁿ cₙ`` of functionals."""

    coefficients: List[FermionicFunctional]
    max_order: int = DEFAULT_MAX_DEGREE

    def __post_init__(self) -> None:
        coeffs = list(self.coefficients)
        if not coeffs:
            raise ShapeError("a series needs at least the ħ⁰ coefficient")
        if len(coeffs) > self.max_order + 1:
            raise DegreeOverflowError(
                f"series of order {len(coeffs) - 1} exceeds the cap of {self.max_order}"
            )
        _same_family(coeffs)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def of(cls, F: FermionicFunctional) -> "HbarSeries":
        return cls([F], F.max_degree)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def bundle(self) -> Bundle:
        return self.coefficients[0].bundle

    @property
    def n_modes(self) -> int:
        return self.coefficients[0].n_modes

    def coefficient(self, n: int) -> FermionicFunctional:
        if n < len(self.coefficients):
            return self.coefficients[n]
        head = self.coefficients[0]
        return FermionicFunctional.zero(head.n_modes, head.bundle, head.max_degree)

    def __add__(self, other: "HbarSeries") -> "HbarSeries":
        n = max(len(self.coefficients), len(other.coefficients))
        coeffs = [self.coefficient(k) + other.coefficient(k) for k in range(n)]
        return HbarSeries(coeffs, max(self.max_order, other.max_order))

    def max_abs_diff(self, other: "HbarSeries") -> float:
        n = max(len(self.coefficients), len(other.coefficients))
        return max(self.coefficient(k).max_abs_diff(other.coefficient(k)) for k in range(n))

    def scale(self) -> float:
        return max(c.scale() for c in self.coefficients)

    def to_record(self) -> SeriesRecord:
        return SeriesRecord(coefficients=[c.to_record() for c in self.coefficients])

    @classmethod
    def from_record(cls, record: SeriesRecord, max_order: int = DEFAULT_MAX_DEGREE) -> "HbarSeries":
        coeffs = [FermionicFunctional.from_record(r) for r in record.coefficients]
        return cls(coeffs, max(max_order, len(coeffs) - 1))

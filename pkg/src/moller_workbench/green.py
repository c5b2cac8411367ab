"""Discrete Dirac operators, their Green operators and the dense oracle.

The one-step transfer ``U`` shifts each eigencomponent of ``α_k = γ⁰γᵏ``
one cell along axis ``k`` and then applies the local mass rotation
``exp(-i m dt γ⁰)``; it is unitary with locality radius one. A potential
enters as the unitary time link ``V_s = exp(i dt γ⁰A_s)`` on the sites of
its support, so the charged step is ``T_t = V_{t+1} U``. The operator is
the two-level form

    (Dψ)_t      = (i / dt) γ⁰ (T_t⁻¹ ψ_{t+1} − ψ_t)
    (Dψ)_{nt−1} = −(i / dt) γ⁰ ψ_{nt−1}

which is block-bidiagonal in time. ``S₋`` is forward substitution with zero
past data, ``S₊`` backward substitution from the last slice; the causal
kernel is ``−i dt T(t, s) γ⁰`` on every pair of slices. ``S₋`` and ``S₊``
are pairing adjoints up to the contact term ``i dt γ⁰`` on the diagonal.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse

from moller_workbench.clifford import CliffordRep, chirality_axes
from moller_workbench.errors import (
    BundleMismatchError,
    CausalDomainError,
    ConfigurationError,
    NumericFailure,
    OracleCapError,
)
from moller_workbench.fields import (
    Bundle,
    FieldMap,
    SectionSpace,
    SpinorSection,
    apply_pointwise,
)
from moller_workbench.gauge import GaugePotential, coupling_blocks
from moller_workbench.grid import SpacetimeGrid, cone_wraps

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_CAP = 20000
_CFL_TOL = 1e-12
_BLOCK_TOL = 1e-10
_DENSE_CHUNK = 512


# ── Transfer step ─────────────────────────────────────────────────────────


def _site_shift(spatial_shape: Sequence[int], axis: int, step: int) -> sparse.csr_matrix:
    """Permutation with ``(Pψ)[x] = ψ[x − step·e_axis]`` (periodic)."""
    n = int(np.prod(spatial_shape))
    idx = np.arange(n).reshape(spatial_shape)
    src = np.roll(idx, step, axis=axis).ravel()
    return sparse.csr_matrix((np.ones(n), (np.arange(n), src)), shape=(n, n))


def _axis_transfer(spatial_shape: Sequence[int], axis: int, alpha: np.ndarray) -> sparse.csr_matrix:
    fiber = alpha.shape[0]
    n = int(np.prod(spatial_shape))
    if np.array_equal(alpha, np.diag(np.diag(alpha))):
        speeds, basis = np.diag(alpha).real, np.eye(fiber, dtype=complex)
    else:
        speeds, basis = np.linalg.eigh(alpha)
    out = sparse.csr_matrix((n * fiber, n * fiber), dtype=complex)
    for c, speed in enumerate(speeds):
        step = int(round(speed))
        if abs(speed - step) > 1e-12 or abs(step) != 1:
            raise ConfigurationError("transport axes must have unit characteristic speeds")
        proj = np.outer(basis[:, c], basis[:, c].conj())
        out = out + sparse.kron(_site_shift(spatial_shape, axis, step), proj, format="csr")
    return out.tocsr()


def build_transfer(rep: CliffordRep, grid: SpacetimeGrid, mass: float) -> sparse.csr_matrix:
    """Unitary one-step transfer on a slice, as a sparse matrix."""
    spatial = grid.spatial_shape
    n = grid.sites_per_slice
    eye_sites = sparse.identity(n, format="csr")
    g0 = rep.gammas[0]
    rotation = np.cos(mass * grid.dt) * np.eye(rep.fiber) - 1j * np.sin(mass * grid.dt) * g0
    transfer = sparse.kron(eye_sites, rotation, format="csr")
    for axis, alpha in enumerate(chirality_axes(rep)):
        transfer = transfer @ _axis_transfer(spatial, axis, alpha)
    return transfer.tocsr()


@dataclass(frozen=True)
class TimeLink:
    """``V_s`` and ``V_s⁻¹`` on the support sites of one slice."""

    sites: np.ndarray
    forward: np.ndarray
    backward: np.ndarray


def build_links(rep: CliffordRep, potential: GaugePotential) -> Dict[int, TimeLink]:
    """Time links ``exp(i dt γ⁰A_s)`` on every slice the potential touches.

    Raises:
        ConfigurationError: If ``γ⁰A`` is not hermitian on some site.
    """
    grid = potential.grid
    fiber = rep.fiber
    g0 = rep.gammas[0]
    blocks = coupling_blocks(rep, potential)
    links: Dict[int, TimeLink] = {}
    for t in potential.active_slices():
        sites = np.flatnonzero(potential.support[t].reshape(-1))
        local = blocks[t].reshape((-1, fiber, fiber))[sites]
        generator = np.einsum("ij,sjk->sik", g0, local)
        defect = np.max(np.abs(generator - np.conj(np.swapaxes(generator, 1, 2))))
        if defect > 1e-12 * max(1.0, float(np.max(np.abs(generator)))):
            raise ConfigurationError(
                "γ⁰A must be hermitian; potential components must be imaginary"
            )
        w, q = np.linalg.eigh(generator)
        phase = np.exp(1j * grid.dt * w)
        links[int(t)] = TimeLink(
            sites=sites,
            forward=np.einsum("sij,sj,skj->sik", q, phase, q.conj()),
            backward=np.einsum("sij,sj,skj->sik", q, phase.conj(), q.conj()),
        )
    return links


# ── Operator ──────────────────────────────────────────────────────────────


class DiracOperator:
    """Discrete Dirac operator ``D`` or, with a potential, ``Dᴳ = D + A``.

    ``A`` is the discrete coupling ``Dᴳ − D``; its columns sit on the
    support of the potential and it reduces to ``iγ^μ𝒜_μ`` as ``dt → 0``.

    Args:
        rep: Clifford representation (mostly-minus signature).
        grid: Periodic grid with ``cfl = 1``.
        mass: Non-negative mass.
        potential: Gauge potential; its presence makes the operator charged.
        allow_wrap: If False, public solves refuse sources whose cone wraps.

    Raises:
        ConfigurationError: If the grid or representation cannot carry the stencil.
        NumericFailure: If a time-coupling block is not invertible.
    """

    def __init__(
        self,
        rep: CliffordRep,
        grid: SpacetimeGrid,
        mass: float = 0.0,
        potential: Optional[GaugePotential] = None,
        allow_wrap: bool = False,
    ):
        if rep.dim != grid.dim:
            raise ConfigurationError("representation and grid dimensions differ")
        if not grid.periodic:
            raise ConfigurationError("the Dirac stencil needs periodic space")
        if abs(grid.cfl - 1.0) > _CFL_TOL:
            raise ConfigurationError(f"the Dirac stencil needs cfl = 1, got cfl = {grid.cfl:g}")
        if mass < 0:
            raise ConfigurationError("mass must be non-negative")
        if potential is not None and potential.grid != grid:
            raise ConfigurationError("potential lives on a different grid")

        self.rep = rep
        self.grid = grid
        self.mass = float(mass)
        self.potential = potential
        self.allow_wrap = allow_wrap
        self.fiber = rep.fiber
        self.slice_dim = grid.sites_per_slice * rep.fiber
        self.transfer = build_transfer(rep, grid, self.mass)
        self.transfer_inv = self.transfer.conj().T.tocsr()
        self.g0 = rep.gammas[0]
        self.h_inv = np.linalg.inv(rep.h)
        self.links: Dict[int, TimeLink] = {} if potential is None else build_links(rep, potential)

        defect = self.stencil_defect()
        if defect > _BLOCK_TOL:
            raise NumericFailure(f"time-coupling blocks are not invertible (defect {defect:.3e})")
        logger.debug(
            "Dirac operator d=%d nt=%d nx=%d mass=%g links=%d",
            grid.dim,
            grid.nt,
            grid.nx,
            self.mass,
            len(self.links),
        )

    @property
    def charged(self) -> bool:
        return self.potential is not None

    @property
    def bundle(self) -> Bundle:
        return Bundle.CHARGED if self.charged else Bundle.UNCHARGED

    @property
    def space(self) -> SectionSpace:
        return SectionSpace(self.grid, self.fiber, self.bundle, "spinor")

    def unitarity_defect(self) -> float:
        """``max |T†T − 1|`` over the transfer and every time link."""
        product = self.transfer_inv @ self.transfer - sparse.identity(self.slice_dim)
        product = sparse.csr_matrix(product)
        worst = float(np.max(np.abs(product.data))) if product.nnz else 0.0
        eye = np.eye(self.fiber)
        for link in self.links.values():
            gram = np.einsum("sji,sjk->sik", link.forward.conj(), link.forward)
            worst = max(worst, float(np.max(np.abs(gram - eye))))
        return worst

    def stencil_defect(self) -> float:
        """How far ``γ⁰`` and ``T_t`` are from being exactly invertible."""
        square = self.g0 @ self.g0 - np.eye(self.fiber)
        return max(float(np.max(np.abs(square))), self.unitarity_defect())

    # -- slice helpers --

    def _slices(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=complex).reshape((self.grid.nt, self.slice_dim) + x.shape[1:])

    def _sites(self, vec: np.ndarray) -> np.ndarray:
        return vec.reshape((-1, self.fiber) + vec.shape[1:])

    def _link(self, s: int, vec: np.ndarray, inverse: bool = False) -> np.ndarray:
        link = self.links.get(s)
        if link is None:
            return vec
        out = np.array(vec, dtype=complex)
        blocks = link.backward if inverse else link.forward
        sites = self._sites(out)
        sites[link.sites] = np.einsum("sij,sj...->si...", blocks, self._sites(vec)[link.sites])
        return out

    def _gamma0(self, x: np.ndarray) -> np.ndarray:
        return apply_pointwise(self.g0, x, self.fiber)

    def _gamma0_stack(self, stack: np.ndarray) -> np.ndarray:
        return np.stack([self._gamma0(s) for s in stack])

    def _transport(self, matrix: sparse.csr_matrix, stack: np.ndarray) -> np.ndarray:
        # (nt, n_s, ..) -> matrix applied on every slice
        moved = np.moveaxis(stack, 1, 0)
        flat = moved.reshape(self.slice_dim, -1)
        return np.moveaxis((matrix @ flat).reshape(moved.shape), 0, 1)

    def _step(self, t: int, vec: np.ndarray) -> np.ndarray:
        """``T_t = V_{t+1} U``."""
        return self._link(t + 1, self.transfer @ vec)

    def _step_back(self, t: int, vec: np.ndarray) -> np.ndarray:
        """``T_t⁻¹ = U⁻¹ V_{t+1}⁻¹``."""
        return self.transfer_inv @ self._link(t + 1, vec, inverse=True)

    def _step_adjoint(self, t: int, vec: np.ndarray) -> np.ndarray:
        """``h⁻¹ T_t† h``."""
        lifted = apply_pointwise(self.rep.h, vec, self.fiber)
        moved = self.transfer_inv @ self._link(t + 1, lifted, inverse=True)
        return apply_pointwise(self.h_inv, moved, self.fiber)

    # -- flat kernels --

    def apply_flat(self, x: np.ndarray) -> np.ndarray:
        psi = self._slices(x)
        nt = self.grid.nt
        ahead = psi[1:]
        if self.links:
            ahead = ahead.copy()
            for s in self.links:
                ahead[s - 1] = self._link(s, psi[s], inverse=True)
        pulled = np.zeros_like(psi)
        pulled[: nt - 1] = self._transport(self.transfer_inv, ahead)
        out = (1j / self.grid.dt) * self._gamma0_stack(pulled - psi)
        return out.reshape(x.shape)

    def coupling_flat(self, x: np.ndarray) -> np.ndarray:
        """``A = Dᴳ − D``; row ``t`` is ``(i/dt) γ⁰ U⁻¹ (V⁻¹ − 1) ψ_{t+1}``."""
        psi = self._slices(x)
        out = np.zeros_like(psi)
        for s in self.links:
            kick = self._link(s, psi[s], inverse=True) - psi[s]
            out[s - 1] = (1j / self.grid.dt) * self._gamma0(self.transfer_inv @ kick)
        return out.reshape(x.shape)

    def forward_flat(self, x: np.ndarray) -> np.ndarray:
        """Retarded solve with zero past data; uses rows ``0 .. nt-2``."""
        f = self._slices(x)
        psi = np.zeros_like(f)
        step = -1j * self.grid.dt
        for t in range(self.grid.nt - 1):
            psi[t + 1] = self._step(t, psi[t] + step * self._gamma0(f[t]))
        return _finite(psi).reshape(x.shape)

    def backward_flat(self, x: np.ndarray) -> np.ndarray:
        """Advanced solve with zero future data; uses every row."""
        f = self._slices(x)
        psi = np.zeros_like(f)
        nt = self.grid.nt
        step = 1j * self.grid.dt
        psi[nt - 1] = step * self._gamma0(f[nt - 1])
        for t in range(nt - 2, -1, -1):
            psi[t] = self._step_back(t, psi[t + 1]) + step * self._gamma0(f[t])
        return _finite(psi).reshape(x.shape)

    def causal_flat(self, x: np.ndarray) -> np.ndarray:
        return self.forward_flat(x) - self.backward_flat(x)

    def contact_flat(self, x: np.ndarray) -> np.ndarray:
        """Diagonal of the advanced kernel, ``i dt γ⁰``; ``S₋^♯ = S₊ − contact``."""
        return 1j * self.grid.dt * self._gamma0(np.asarray(x, dtype=complex))

    def propagate_flat(self, kicks: np.ndarray) -> np.ndarray:
        """``ψ_0 = k_0``, ``ψ_{t+1} = T_t ψ_t + k_{t+1}``.

        Zero kicks stay exact zeros outside the discrete cone of the nonzero ones.
        """
        k = self._slices(kicks)
        psi = np.empty_like(k)
        psi[0] = k[0]
        for t in range(self.grid.nt - 1):
            psi[t + 1] = self._step(t, psi[t]) + k[t + 1]
        return _finite(psi).reshape(kicks.shape)

    def propagate_adjoint_flat(self, y: np.ndarray) -> np.ndarray:
        """Pairing adjoint of ``propagate_flat``, swept from the last slice."""
        k = self._slices(y)
        out = np.empty_like(k)
        nt = self.grid.nt
        out[nt - 1] = k[nt - 1]
        for t in range(nt - 2, -1, -1):
            out[t] = k[t] + self._step_adjoint(t, out[t + 1])
        return _finite(out).reshape(y.shape)

    def link_kick_flat(
        self, x: np.ndarray, inverse: bool = False, adjoint: bool = False
    ) -> np.ndarray:
        """``(1 − V_s) x_s`` on the link sites and exact zeros everywhere else.

        ``inverse`` uses ``V_s⁻¹``; ``adjoint`` uses the pairing adjoint
        ``h⁻¹ V_s† h`` of the chosen link.
        """
        psi = self._slices(x)
        out = np.zeros_like(psi)
        h = self.rep.h
        for s, link in self.links.items():
            blocks = link.backward if inverse else link.forward
            if adjoint:
                dagger = np.conj(np.swapaxes(blocks, 1, 2))
                blocks = np.einsum("ij,sjk,kl->sil", self.h_inv, dagger, h)
            values = self._sites(psi[s])[link.sites]
            self._sites(out[s])[link.sites] = values - np.einsum("sij,sj...->si...", blocks, values)
        return out.reshape(x.shape)

    # -- maps --

    def as_map(self) -> FieldMap:
        return FieldMap("D", self.space, self.space, self.apply_flat)

    def coupling_map(self) -> FieldMap:
        return FieldMap("A", self.space, self.space, self.coupling_flat)

    def retarded_map(self) -> FieldMap:
        return FieldMap("S_ret", self.space, self.space, self.forward_flat)

    def advanced_map(self) -> FieldMap:
        return FieldMap("S_adv", self.space, self.space, self.backward_flat)

    def causal_map(self) -> FieldMap:
        return FieldMap("S", self.space, self.space, self.causal_flat)

    def with_potential(self, potential: Optional[GaugePotential]) -> "DiracOperator":
        return DiracOperator(self.rep, self.grid, self.mass, potential, self.allow_wrap)


def _finite(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericFailure("non-finite values in Green-operator solve")
    return values


# ── Public operations ─────────────────────────────────────────────────────


def _check_tag(op: DiracOperator, section: SpinorSection) -> None:
    if section.bundle != op.bundle:
        raise BundleMismatchError(
            f"{op.bundle.value} operator applied to a {section.bundle.value} section"
        )


def _check_source(op: DiracOperator, f: SpinorSection, future: bool) -> None:
    support = f.support()
    if support[0].any() or support[-1].any():
        raise CausalDomainError("source touches a temporal boundary of the slab")
    if not op.allow_wrap and cone_wraps(op.grid, support, future=future):
        raise CausalDomainError("cone of the source wraps around the periodic direction")


def apply_D(op: DiracOperator, s: SpinorSection) -> SpinorSection:
    """Apply ``D`` (or ``Dᴳ``) to a spinor section of the matching bundle."""
    _check_tag(op, s)
    return op.as_map()(s)


def retarded(op: DiracOperator, f: SpinorSection) -> SpinorSection:
    """``S₋ f``: supported in the causal future of ``f``.

    Raises:
        CausalDomainError: If ``f`` touches a slab end or its cone wraps.
    """
    _check_tag(op, f)
    _check_source(op, f, future=True)
    return op.retarded_map()(f)


def advanced(op: DiracOperator, f: SpinorSection) -> SpinorSection:
    """``S₊ f``: supported in the causal past of ``f``."""
    _check_tag(op, f)
    _check_source(op, f, future=False)
    return op.advanced_map()(f)


def causal(op: DiracOperator, f: SpinorSection) -> SpinorSection:
    """``S f = S₋ f − S₊ f``."""
    return retarded(op, f) - advanced(op, f)


# ── Doubled operators ─────────────────────────────────────────────────────


def _respace(space: SectionSpace, kind: str) -> SectionSpace:
    return SectionSpace(space.grid, space.fiber, space.bundle, kind)


def conjugate_map(spinor_map: FieldMap) -> FieldMap:
    """``M* = C M C⁻¹`` acting on the cospinor leg."""
    dom = _respace(spinor_map.domain, "cospinor")
    cod = _respace(spinor_map.codomain, "cospinor")

    def apply_flat(x: np.ndarray) -> np.ndarray:
        return spinor_map.apply_flat(x.conj()).conj()

    return FieldMap(spinor_map.name + "*", dom, cod, apply_flat)


def direct_sum(spinor_map: FieldMap, sign: complex = -1.0) -> FieldMap:
    """``M ⊕ (sign · M*)`` on doubled sections."""
    dom = _respace(spinor_map.domain, "doubled")
    cod = _respace(spinor_map.codomain, "doubled")
    half_in = spinor_map.domain.leg_dim

    def apply_flat(x: np.ndarray) -> np.ndarray:
        top = spinor_map.apply_flat(x[:half_in])
        bottom = spinor_map.apply_flat(x[half_in:].conj()).conj()
        return np.concatenate([top, sign * bottom])

    return FieldMap(spinor_map.name + "⊕", dom, cod, apply_flat)


@dataclass(frozen=True)
class DoubledGreen:
    """``D⊕``, ``S₋⊕``, ``S₊⊕`` and ``S⊕`` on doubled sections."""

    dirac: FieldMap
    retarded: FieldMap
    advanced: FieldMap
    causal: FieldMap


def doubled_green(op: DiracOperator) -> DoubledGreen:
    return DoubledGreen(
        dirac=direct_sum(op.as_map()),
        retarded=direct_sum(op.retarded_map()),
        advanced=direct_sum(op.advanced_map()),
        causal=direct_sum(op.causal_map()),
    )


# ── Dense oracle ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class DenseKernel:
    """Explicit matrix of a linear map or bilinear form.

    ``weights`` is ``"operator"`` for matrices acting on flat values and
    ``"bilinear"`` for forms ``u·K·v`` that already include volume weights.
    """

    matrix: np.ndarray
    domain: SectionSpace
    codomain: SectionSpace
    weights: str = "operator"

    @property
    def shape(self):
        return self.matrix.shape

    def sidecar(self) -> dict:
        return {
            "shape": list(self.matrix.shape),
            "domain_bundle": self.domain.bundle.value,
            "domain_kind": self.domain.kind,
            "codomain_bundle": self.codomain.bundle.value,
            "codomain_kind": self.codomain.kind,
            "weights": self.weights,
            "grid": self.domain.grid.describe(),
        }


def to_dense(field_map: FieldMap, cap: int = DEFAULT_ORACLE_CAP) -> DenseKernel:
    """Materialize a linear map by pushing identity columns through it.

    Raises:
        OracleCapError: If either index dimension exceeds ``cap``.
        NumericFailure: If any entry is non-finite.
    """
    n_in, n_out = field_map.domain.dim, field_map.codomain.dim
    if max(n_in, n_out) > cap:
        raise OracleCapError(f"dense materialization of {n_out}x{n_in} exceeds cap {cap}")
    columns: List[np.ndarray] = []
    for start in range(0, n_in, _DENSE_CHUNK):
        stop = min(start + _DENSE_CHUNK, n_in)
        block = np.zeros((n_in, stop - start), dtype=complex)
        block[np.arange(start, stop), np.arange(stop - start)] = 1.0
        columns.append(np.asarray(field_map.apply_flat(block)).reshape(n_out, stop - start))
    matrix = np.concatenate(columns, axis=1)
    if not np.all(np.isfinite(matrix)):
        raise NumericFailure(f"non-finite entries in dense {field_map.name}")
    logger.debug("materialized %s as %dx%d", field_map.name, n_out, n_in)
    return DenseKernel(matrix, field_map.domain, field_map.codomain)


def identity_map(space: SectionSpace) -> FieldMap:
    return FieldMap("id", space, space, lambda x: x.copy())



# ── Convergence monitor ───────────────────────────────────────────────────


@dataclass(frozen=True)
class ConvergenceReport:
    """Self-convergence of ``S₋`` under refinement.

    ``errors[i]`` is the sup-norm gap between resolutions ``sizes[i]`` and
    ``sizes[i+1]`` on the coarse points; ``orders`` are base-2 ratios of
    consecutive gaps.
    """

    sizes: List[int]
    errors: List[float]
    orders: List[float]


def _steady_source(grid: SpacetimeGrid) -> np.ndarray:
    x = np.arange(grid.nx) * grid.dx
    packet = np.exp(np.cos(x) - 1.0)
    spinor = np.stack([packet, 0.5j * np.exp(np.sin(x) - 1.0)], axis=-1)
    return np.broadcast_to(spinor, grid.shape + (2,)).copy()


def convergence_monitor(
    rep: CliffordRep,
    mass: float,
    sizes: Sequence[int] = (32, 64, 128, 256),
    length: float = 2.0 * np.pi,
    duration: float = 0.5 * np.pi,
) -> ConvergenceReport:
    """Observed order of the d=2 retarded solve for a fixed smooth source.

    A steady smooth source is switched on at ``t = 0``; each resolution
    solves ``S₋`` with ``dt = dx`` up to ``duration`` and keeps the final
    slice. The design order of the stencil is one.

    Raises:
        ConfigurationError: Outside d = 2, or if ``duration`` is not a whole
            number of steps on every resolution.
    """
    if rep.dim != 2:
        raise ConfigurationError("the convergence monitor runs in d = 2")
    finals = []
    for nx in sizes:
        dx = length / nx
        steps = duration / dx
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(f"duration is not a whole number of steps at nx={nx}")
        grid = SpacetimeGrid(2, int(round(steps)) + 1, nx, dx, dx)
        op = DiracOperator(rep, grid, mass, allow_wrap=True)
        source = _steady_source(grid)
        psi = op.forward_flat(source.reshape(-1)).reshape(source.shape)
        finals.append(psi[-1])

    errors = [
        float(np.max(np.abs(coarse - fine[::2])))
        for coarse, fine in zip(finals[:-1], finals[1:])
    ]
    orders = [
        float(np.log2(errors[i] / errors[i + 1])) if errors[i + 1] > 0 else float("inf")
        for i in range(len(errors) - 1)
    ]
    logger.info("convergence monitor gaps=%s orders=%s", errors, orders)
    return ConvergenceReport(list(sizes), errors, orders)

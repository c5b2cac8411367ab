"""Clifford algebra representations and the compatible spinor metric.

Gamma matrices are fixed per (dimension, signature) so repeated builds are
bitwise identical. In the mostly-minus signature ``h = γ⁰``; in mostly-plus
the gammas are ``i`` times the mostly-minus ones and ``h`` is the hermitian
normalization of the product of the spatial gammas.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from moller_workbench.errors import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = (2, 4)
SIGNATURES = ("mostly_minus", "mostly_plus")

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class Convention:
    """Sign choices recorded alongside every representation.

    Attributes:
        signature: ``"mostly_minus"`` (η = diag(+,-,..)) or ``"mostly_plus"``.
        hermiticity: Name of the hermiticity rule; Clifford multiplication by
            real covectors is h-hermitian.
    """

    signature: str = "mostly_minus"
    hermiticity: str = "h_hermitian_clifford"

    def to_dict(self) -> dict:
        return {"signature": self.signature, "hermiticity": self.hermiticity}


@dataclass(frozen=True)
class CliffordRep:
    """Gamma matrices with metric and spinor metric.

    ``gammas`` has shape ``(d, F, F)`` with ``F = 2**(d // 2)``.
    """

    dim: int
    eta: np.ndarray
    gammas: np.ndarray
    h: np.ndarray
    convention: Convention = field(default_factory=Convention)

    @property
    def fiber(self) -> int:
        return int(self.gammas.shape[1])

    @property
    def h_inv(self) -> np.ndarray:
        return np.linalg.inv(self.h)

    def gamma(self, covector: np.ndarray) -> np.ndarray:
        """Return γ(v) = Σ_a v_a γ^a."""
        v = np.asarray(covector)
        if v.shape != (self.dim,):
            raise ShapeError(f"covector must have {self.dim} components, got shape {v.shape}")
        return np.tensordot(v, self.gammas, axes=(0, 0))

    def quadratic_form(self, covector: np.ndarray) -> float:
        """q(v, v) = η^{ab} v_a v_b."""
        v = np.asarray(covector, dtype=float)
        return float(v @ self.eta @ v)


def _minus_gammas(dim: int) -> np.ndarray:
    if dim == 2:
        g0 = np.array([[0, 1], [1, 0]], dtype=complex)
        g1 = np.array([[0, 1], [-1, 0]], dtype=complex)
        return np.stack([g0, g1])
    eye = np.eye(2, dtype=complex)
    zero = np.zeros((2, 2), dtype=complex)
    g0 = np.block([[eye, zero], [zero, -eye]])
    spatial = [np.block([[zero, s], [-s, zero]]) for s in _SIGMA]
    return np.stack([g0] + spatial)


def _hermitian_unit(product: np.ndarray) -> np.ndarray:
    if np.array_equal(product, product.conj().T):
        return product
    return -1j * product


def build_rep(dim: int, convention: Convention = Convention()) -> CliffordRep:
    """Build the gamma matrices and spinor metric for ``dim``.

    Args:
        dim: Spacetime dimension, 2 or 4.
        convention: Signature and hermiticity choices.

    Returns:
        A deterministic ``CliffordRep``.

    Raises:
        ConfigurationError: If the dimension or signature is unsupported.
    """
    if dim not in SUPPORTED_DIMS:
        raise ConfigurationError(
            f"Unsupported spacetime dimension {dim}; use one of {SUPPORTED_DIMS}"
        )
    if convention.signature not in SIGNATURES:
        raise ConfigurationError(f"Unknown signature {convention.signature!r}")

    minus = _minus_gammas(dim)
    eta_minus = np.diag([1.0] + [-1.0] * (dim - 1))

    if convention.signature == "mostly_minus":
        gammas, eta, h = minus, eta_minus, minus[0].copy()
    else:
        gammas, eta = 1j * minus, -eta_minus
        spatial = minus[1]
        for g in minus[2:]:
            spatial = spatial @ g
        h = _hermitian_unit(spatial)

    for arr in (gammas, h):
        arr.setflags(write=False)
    logger.debug("Built Clifford rep d=%d signature=%s", dim, convention.signature)
    return CliffordRep(dim=dim, eta=eta, gammas=gammas, h=h, convention=convention)


def clifford_mul(
    rep: CliffordRep, covector: np.ndarray, spinor: np.ndarray, conjugate: bool = False
) -> np.ndarray:
    """Clifford-multiply a fiber vector by a real covector.

    On the conjugate fiber the complex-conjugate matrices act.

    Raises:
        ShapeError: On dimension mismatch.
    """
    s = np.asarray(spinor)
    if s.shape[-1:] != (rep.fiber,):
        raise ShapeError(f"spinor fiber must be {rep.fiber}, got shape {s.shape}")
    g = rep.gamma(covector)
    if conjugate:
        g = g.conj()
    return s @ g.T


def spinor_pairing(rep: CliffordRep, u: np.ndarray, w: np.ndarray) -> complex:
    """Bilinear spinor/cospinor pairing ``(u, w) = Σ_jk w^j h_jk u^k``.

    ``w`` lives on the conjugate fiber, so ``(γ(v)u, w) = (u, γ̄(v)w)``.

    Raises:
        ShapeError: On fiber mismatch.
    """
    u = np.asarray(u)
    w = np.asarray(w)
    if u.shape != (rep.fiber,) or w.shape != (rep.fiber,):
        raise ShapeError(f"pairing needs two fiber vectors of length {rep.fiber}")
    return complex(w @ rep.h @ u)


def anticommutator_defect(rep: CliffordRep) -> float:
    """Max absolute deviation of {γ^a, γ^b} from 2η^{ab}·I over all pairs."""
    eye = np.eye(rep.fiber)
    worst = 0.0
    for a in range(rep.dim):
        for b in range(rep.dim):
            ga, gb = rep.gammas[a], rep.gammas[b]
            defect = ga @ gb + gb @ ga - 2.0 * rep.eta[a, b] * eye
            worst = max(worst, float(np.max(np.abs(defect))))
    return worst


def hermiticity_defect(rep: CliffordRep) -> float:
    """Max absolute deviation of (γ^a)† h from h γ^a, and of h from h†."""
    worst = float(np.max(np.abs(rep.h - rep.h.conj().T)))
    for g in rep.gammas:
        worst = max(worst, float(np.max(np.abs(g.conj().T @ rep.h - rep.h @ g))))
    return worst


def chirality_axes(rep: CliffordRep) -> Tuple[np.ndarray, ...]:
    """Return the hermitian matrices ``α_k = γ⁰γᵏ`` (mostly-minus only)."""
    if rep.convention.signature != "mostly_minus":
        raise ConfigurationError("Dirac transport requires the mostly_minus signature")
    g0 = rep.gammas[0]
    return tuple(g0 @ gk for gk in rep.gammas[1:])

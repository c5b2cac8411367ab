"""Sign and normalization conventions of the fermionic functional algebra.

Functionals are antisymmetric coefficient tensors ``F[a₁..a_p]`` over mode
legs. Left derivatives strip leading indices; right derivatives carry the
sign that moves the stripped leg across the remaining ones:

    F ∂⃖_{a₁} … ∂⃖_{aₙ} = (−1)^{Σⱼ (p − j)} F[a₁..aₙ, …]

The star product is the exponential of ``∂⃖_a W_ab ∂⃗_b`` with ``W`` the
two-point function on mode legs, scaled by ``STAR_NORMALIZATION``. With
this constant the anticommutator of linear functionals is

    f ⋆ g + g ⋆ f = i ħ K(f, g)

where ``K`` is the causal propagator on mode legs.
"""

STAR_NORMALIZATION = 1.0
DEFAULT_MAX_DEGREE = 6
DEFAULT_MAX_MODES = 32


def right_derivative_sign(degree: int, order: int) -> float:
    """Sign of ``order`` right derivatives of a degree-``degree`` tensor."""
    exponent = sum(degree - j for j in range(1, order + 1))
    return -1.0 if exponent % 2 else 1.0


def bracket_sign(degree: int) -> float:
    """Sign of the single right derivative in the Peierls bracket."""
    return right_derivative_sign(degree, 1)


def involution_sign(degree: int) -> float:
    """Sign of reversing ``degree`` legs."""
    return -1.0 if (degree * (degree - 1) // 2) % 2 else 1.0


def graded_sign(p: int, q: int) -> float:
    """``(−1)^{pq}``."""
    return -1.0 if (p * q) % 2 else 1.0

"""Antisymmetric coefficient tensors over mode legs.

Tensors are dense ``(N,)*p`` complex arrays. Canonical storage rebuilds every
entry from the strictly increasing index combinations, so transposing two
indices flips the sign exactly and repeated indices hold exact zeros.
"""

from functools import lru_cache
from itertools import combinations, permutations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from moller_workbench.errors import ShapeError


def permutation_parity(perm: Sequence[int]) -> int:
    """``+1`` for even permutations, ``-1`` for odd ones."""
    seen = [False] * len(perm)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@lru_cache(maxsize=None)
def _signed_permutations(p: int) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    return tuple((perm, permutation_parity(perm)) for perm in permutations(range(p)))


@lru_cache(maxsize=None)
def _increasing_mask(n: int, p: int) -> np.ndarray:
    idx = np.indices((n,) * p)
    mask = np.ones((n,) * p, dtype=bool)
    for k in range(p - 1):
        mask &= idx[k] < idx[k + 1]
    mask.setflags(write=False)
    return mask


def check_tensor(t: np.ndarray, n_modes: int) -> None:
    if any(s != n_modes for s in t.shape):
        raise ShapeError(f"tensor shape {t.shape} is not (N,)*p with N = {n_modes}")


def canonicalize(t: np.ndarray) -> np.ndarray:
    """Exactly antisymmetric tensor with the increasing-index entries of ``t``."""
    t = np.asarray(t, dtype=complex)
    p = t.ndim
    if p <= 1:
        return t.copy()
    n = t.shape[0]
    if p > n:
        return np.zeros(t.shape, dtype=complex)
    upper = np.where(_increasing_mask(n, p), t, 0.0)
    out = np.zeros(t.shape, dtype=complex)
    for perm, sign in _signed_permutations(p):
        out += sign * np.transpose(upper, perm)
    return out


def antisymmetrize(t: np.ndarray) -> np.ndarray:
    """Projection ``(1/p!) Σ_σ sgn σ · t∘σ`` followed by canonical storage."""
    t = np.asarray(t, dtype=complex)
    p = t.ndim
    if p <= 1:
        return t.copy()
    out = np.zeros(t.shape, dtype=complex)
    signed = _signed_permutations(p)
    for perm, sign in signed:
        out += sign * np.transpose(t, perm)
    return canonicalize(out / len(signed))


def shuffle(t: np.ndarray, p: int) -> np.ndarray:
    """Sum over ``(p, r−p)``-shuffles of a tensor antisymmetric in both blocks.

    Args:
        t: Rank ``r`` tensor; axes ``0..p-1`` and ``p..r-1`` are each antisymmetric.
        p: Size of the leading block.
    """
    r = t.ndim
    if p == 0 or p == r:
        return canonicalize(t)
    n = t.shape[0]
    if r > n:
        return np.zeros(t.shape, dtype=complex)
    out = np.zeros(t.shape, dtype=complex)
    positions = range(r)
    for pos_a in combinations(positions, p):
        pos_b = [i for i in positions if i not in pos_a]
        perm: List[int] = [0] * r
        for k, j in enumerate(pos_a):
            perm[j] = k
        for k, j in enumerate(pos_b):
            perm[j] = p + k
        swaps = sum(pos_a[j] - j for j in range(p))
        sign = -1.0 if swaps % 2 else 1.0
        out += sign * np.transpose(t, perm)
    return canonicalize(out)


def wedge_tensors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shuffle product of two antisymmetric tensors."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 0:
        return canonicalize(a * b)
    if b.ndim == 0:
        return canonicalize(a * b)
    return shuffle(np.multiply.outer(a, b), a.ndim)


def contract_leading(t: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Contract the first ``len(vectors)`` axes with the given vectors in order."""
    out = np.asarray(t, dtype=complex)
    for v in vectors:
        out = np.tensordot(np.asarray(v), out, axes=([0], [0]))
    return out


def transform_legs(t: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """``out[b₁..b_p] = Σ_a t[a₁..a_p] Π matrix[b_i, a_i]``."""
    out = np.asarray(t, dtype=complex)
    for _ in range(out.ndim):
        # contracting axis 0 and appending the new axis cycles the legs
        out = np.tensordot(out, matrix, axes=([0], [1]))
    return canonicalize(out)


def canonical_arguments(args: np.ndarray) -> Optional[Tuple[np.ndarray, int]]:
    """Sort argument rows into a canonical order.

    Returns:
        The sorted rows and the parity of the sorting permutation, or ``None``
        when two rows are identical.
    """
    keys = [row.tobytes() for row in args]
    if len(set(keys)) < len(keys):
        return None
    order = sorted(range(len(keys)), key=keys.__getitem__)
    return args[order], permutation_parity(order)


def random_antisymmetric(rng: np.random.Generator, n_modes: int, degree: int) -> np.ndarray:
    """Canonical tensor with standard complex normal entries."""
    shape = (n_modes,) * degree
    raw = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return canonicalize(raw)

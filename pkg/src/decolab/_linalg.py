"""Small dense linear-algebra helpers used across modules."""

import numpy as np
import scipy.linalg

from .errors import ValidationError

HERMITIAN_TOL = 1e-12


def as_operator(a, name="operator"):
    """Coerce to a square complex ndarray, validating finiteness."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def require_same_dim(*mats):
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise ValidationError(f"operator dimensions differ: {sorted(dims)}")
    return dims.pop()


def is_hermitian(a, tol=HERMITIAN_TOL):
    scale = max(1.0, np.abs(a).max())
    return np.abs(a - a.conj().T).max() <= tol * scale


def expm_phase(h, factor):
    """exp(1j * factor * h) for a matrix h, accurate to ~1e-12 relative.

    Uses an eigendecomposition when h is Hermitian (the common case; the
    result is then exactly unitary up to roundoff), otherwise falls back to
    scipy's scaling-and-squaring Pade expm.
    """
    h = np.asarray(h, dtype=complex)
    if is_hermitian(h):
        w, v = np.linalg.eigh(h)
        return (v * np.exp(1j * factor * w)) @ v.conj().T
    return scipy.linalg.expm(1j * factor * h)


def expm_phase_stack(hs, factor):
    """Batched expm_phase for a stack (n, d, d) of Hermitian matrices."""
    w, v = np.linalg.eigh(hs)
    phases = np.exp(1j * factor * w)
    return np.einsum("kij,kj,klj->kil", v, phases, v.conj())


def ordered_product(mats):
    """Product mats[-1] @ ... @ mats[0] (later factors to the left).

    Reduces adjacent pairs so a chain of n small matrices costs O(log n)
    batched matmuls instead of n sequential ones.
    """
    stack = np.asarray(mats)
    while stack.shape[0] > 1:
        n = stack.shape[0]
        if n % 2:
            head, stack = stack[-1:], stack[:-1]
        else:
            head = None
        stack = np.matmul(stack[1::2], stack[0::2])
        if head is not None:
            stack = np.concatenate([stack, head])
    return stack[0]


def spectral_norm(a):
    return float(np.linalg.norm(a, ord=2))

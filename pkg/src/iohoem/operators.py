"""Liouville-space helpers.

Density matrices are vectorized by stacking columns, so that
``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``. Every superoperator in the
package is a dense ``(d*d, d*d)`` complex array built on that convention.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-12

# two-level basis ordered (|e>, |g>)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


def _square(a, name="operator") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.all(np.abs(a - a.conj().T) <= tol))


def vec(rho) -> np.ndarray:
    """Column-stacked vector of a square matrix."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=complex)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized {dim}x{dim} matrix")
    return v.reshape(dim, dim, order="F")


def left_mul_super(a) -> np.ndarray:
    """Superoperator of ``rho -> a @ rho``."""
    a = _square(a)
    return np.kron(np.eye(a.shape[0]), a)


def right_mul_super(a) -> np.ndarray:
    """Superoperator of ``rho -> rho @ a``."""
    a = _square(a)
    return np.kron(a.T, np.eye(a.shape[0]))


def commutator_super(h) -> np.ndarray:
    """Superoperator of ``rho -> h rho - rho h``."""
    h = _square(h)
    return left_mul_super(h) - right_mul_super(h)


def anticommutator_super(h) -> np.ndarray:
    """Superoperator of ``rho -> h rho + rho h``."""
    h = _square(h)
    return left_mul_super(h) + right_mul_super(h)


def dissipator_super(jump) -> np.ndarray:
    """Superoperator of ``rho -> 2 L rho L^+ - L^+ L rho - rho L^+ L``.

    Note the factor 2 on the sandwich term: a rate ``gamma`` in front of this
    dissipator damps amplitudes at ``gamma`` and populations at ``2 gamma``.
    """
    jump = _square(jump, "jump operator")
    ldag_l = jump.conj().T @ jump
    return (2.0 * np.kron(jump.conj(), jump)
            - left_mul_super(ldag_l) - right_mul_super(ldag_l))


def lindbladian(h, jumps=(), rates=None) -> np.ndarray:
    """Generator ``-i[h, .] + sum_k rate_k D[L_k]`` with :func:`dissipator_super`."""
    h = _square(h, "Hamiltonian")
    gen = -1j * commutator_super(h)
    rates = [1.0] * len(jumps) if rates is None else rates
    for rate, jump in zip(rates, jumps):
        gen = gen + rate * dissipator_super(jump)
    return gen


def apply_super(sup, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return unvec(np.asarray(sup) @ vec(rho), rho.shape[0])


def interaction_picture(op, h0, t: float) -> np.ndarray:
    """Return ``exp(i h0 t) op exp(-i h0 t)`` using the eigenbasis of ``h0``."""
    op = _square(op)
    h0 = _square(h0, "H0")
    if not is_hermitian(h0):
        raise ValueError("H0 must be hermitian")
    evals, evecs = np.linalg.eigh(h0)
    u = (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
    return u.conj().T @ op @ u


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma`` for hermitian arguments."""
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def destroy(n: int) -> np.ndarray:
    """Truncated bosonic annihilation operator on ``n`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)

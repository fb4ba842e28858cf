"""Dense symmetric linear algebra used by the PLDA backend.

Everything here works on plain float64 numpy arrays.  Matrices expected to
be symmetric are symmetrized explicitly on entry, eigenvalues are always
returned in descending order, and eigenvector signs follow a fixed
convention, so identical inputs give bit-identical outputs across runs.
"""

from typing import NamedTuple

import numpy as np

from .exceptions import DataError, DegenerateMatrixError, NumericalError

# Relative eigenvalue floor applied before inverting near-singular matrices.
DEFAULT_EIG_FLOOR = 1e-10

_SIGN_EPS = 1e-12


class EigenDecomposition(NamedTuple):
    """Spectral factorization ``vectors @ diag(values) @ vectors.T``.

    ``values`` are sorted in descending order; the first component of each
    eigenvector with magnitude above 1e-12 is positive.
    """

    values: np.ndarray
    vectors: np.ndarray


class SimDiagResult(NamedTuple):
    """Result of simultaneously diagonalizing an SPD/PSD matrix pair.

    ``b.T @ phi @ b == I`` and ``b.T @ psi @ b == diag(e)``; ``b_inv`` is
    the exact algebraic inverse of ``b``.
    """

    b: np.ndarray
    b_inv: np.ndarray
    e: np.ndarray


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return ``(m + m.T) / 2`` as a float64 array, validating squareness."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"expected a square matrix, got shape {m.shape}")
    return (m + m.T) / 2.0


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so the first non-negligible entry is positive."""
    v = vectors.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nonzero = np.flatnonzero(np.abs(col) > _SIGN_EPS)
        if nonzero.size and col[nonzero[0]] < 0.0:
            v[:, j] = -col
    return v


def eigh(m: np.ndarray, name: str = "matrix") -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    m : ndarray, shape (d, d)
        Matrix to decompose; symmetrized on entry.
    name : str
        Label used in error messages when the solver fails.

    Raises
    ------
    NumericalError
        If the underlying eigensolver does not converge.
    """
    sym = symmetrize(m)
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {name} failed: {exc}") from exc
    order = np.argsort(values, kind="stable")[::-1]
    return EigenDecomposition(values[order], _fix_signs(vectors[:, order]))


def _floored_power(m: np.ndarray, exponent: float, floor: float, name: str) -> np.ndarray:
    values, vectors = eigh(m, name=name)
    lam_max = values[0]
    if lam_max <= 0.0:
        raise DegenerateMatrixError(
            f"{name} has no positive eigenvalue (max is {lam_max:.3e})"
        )
    if values[-1] < -1e-10 * lam_max:
        raise DegenerateMatrixError(
            f"{name} is not positive semidefinite (min eigenvalue {values[-1]:.3e})"
        )
    floored = np.maximum(values, floor * lam_max)
    return symmetrize((vectors * floored**exponent) @ vectors.T)


def sqrt_psd(m: np.ndarray, floor: float = DEFAULT_EIG_FLOOR, name: str = "matrix") -> np.ndarray:
    """Symmetric (ZCA) square root of a PSD matrix.

    Eigenvalues below ``floor * lambda_max`` are raised to the floor before
    taking the root, so the result is always well defined on nearly
    singular covariances.
    """
    return _floored_power(m, 0.5, floor, name)


def inv_sqrt_psd(m: np.ndarray, floor: float = DEFAULT_EIG_FLOOR, name: str = "matrix") -> np.ndarray:
    """Symmetric (ZCA) inverse square root of a PSD matrix, with flooring."""
    return _floored_power(m, -0.5, floor, name)


def simdiag(
    phi: np.ndarray,
    psi: np.ndarray,
    floor: float = DEFAULT_EIG_FLOOR,
    name: str = "matrix pair",
) -> SimDiagResult:
    """Simultaneously diagonalize SPD ``phi`` and PSD ``psi``.

    Two-stage procedure: whiten ``phi`` from its eigendecomposition, then
    diagonalize ``psi`` in the whitened basis.  With ``W = Q diag(l)^-1/2``
    and ``P E P.T`` the eigendecomposition of ``W.T psi W``, the returned
    basis is ``b = W P`` with exact inverse ``b_inv = P.T diag(l)^1/2 Q.T``.

    Returns
    -------
    SimDiagResult
        ``b``, ``b_inv`` and the diagonal ``e`` sorted descending.
    """
    phi_values, phi_vectors = eigh(phi, name=name)
    lam_max = phi_values[0]
    if lam_max <= 0.0:
        raise DegenerateMatrixError(
            f"{name}: first matrix has no positive eigenvalue (max is {lam_max:.3e})"
        )
    lam = np.maximum(phi_values, floor * lam_max)
    w1 = phi_vectors * lam**-0.5
    inner_values, inner_vectors = eigh(w1.T @ np.asarray(psi, dtype=np.float64) @ w1, name=name)
    b = w1 @ inner_vectors
    b_inv = inner_vectors.T @ (phi_vectors * lam**0.5).T
    return SimDiagResult(b, b_inv, inner_values)


def log_det_psd(m: np.ndarray, name: str = "matrix") -> float:
    """Log-determinant of an SPD matrix via its eigenvalues."""
    values = eigh(m, name=name).values
    if values[-1] <= 0.0 or values[-1] < 1e-14 * values[0]:
        raise DegenerateMatrixError(
            f"{name} is singular (min eigenvalue {values[-1]:.3e})"
        )
    return float(np.sum(np.log(values)))


def solve_psd(m: np.ndarray, v: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Solve ``m @ x = v`` for SPD ``m``."""
    values, vectors = eigh(m, name=name)
    if values[-1] <= 0.0 or values[-1] < 1e-14 * values[0]:
        raise DegenerateMatrixError(
            f"{name} is singular (min eigenvalue {values[-1]:.3e})"
        )
    v = np.asarray(v, dtype=np.float64)
    coeffs = vectors.T @ v
    coeffs = coeffs / (values if coeffs.ndim == 1 else values[:, None])
    return vectors @ coeffs

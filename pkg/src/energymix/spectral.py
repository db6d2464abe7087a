"""Dense symmetric eigenvalues and spectral norms."""

import numpy as np

SYMMETRY_TOL = 1e-12


def as_symmetric(a, tol=SYMMETRY_TOL):
    """Return ``(a + a.T) / 2`` after checking ``a`` is square and symmetric."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > tol:
        raise ValueError("matrix is not symmetric within tolerance "
                         f"{tol:g} (max asymmetry {np.max(np.abs(a - a.T)):.3g})")
    return 0.5 * (a + a.T)


def sym_eigenvalues(a, tol=SYMMETRY_TOL):
    """All eigenvalues of a symmetric matrix, ascending.

    Uses LAPACK's divide-and-conquer symmetric solver through ``numpy``.
    """
    return np.linalg.eigvalsh(as_symmetric(a, tol))


def spectral_norm(a, tol=SYMMETRY_TOL):
    """Largest absolute eigenvalue of a symmetric matrix."""
    w = sym_eigenvalues(a, tol)
    if w.size == 0:
        return 0.0
    return float(max(abs(w[0]), abs(w[-1])))


def top_eigenpair(a, tol=SYMMETRY_TOL):
    """Eigenvalue of largest magnitude and a unit eigenvector for it."""
    w, v = np.linalg.eigh(as_symmetric(a, tol))
    k = 0 if abs(w[0]) > abs(w[-1]) else len(w) - 1
    return float(w[k]), v[:, k]

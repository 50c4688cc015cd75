"""Seedable numerical primitives shared by both reservoir types.

Sparse random graphs, spectral-radius estimation and normalization,
Kronecker products and the Tikhonov-regularized least-squares solve used
to train every readout.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ParameterError, ShapeError, SingularMatrixError

logger = logging.getLogger(__name__)

#: Matrices at or below this size get an exact dense eigensolve.
DENSE_EIG_LIMIT = 200


class ZeroSpectralRadiusError(ParameterError):
    """Raised when a matrix with spectral radius zero must be rescaled."""


def derive_seed(master: int, *keys: int) -> int:
    """Derive a child seed from ``master`` and an integer counter path.

    The mapping goes through :class:`numpy.random.SeedSequence`, so distinct
    key paths give statistically independent streams.
    """
    ss = np.random.SeedSequence([int(master), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def erdos_renyi(b: int, p: float, seed: int) -> sp.csr_matrix:
    """Weighted adjacency matrix of a directed Erdős–Rényi graph G(b, p).

    Every entry, diagonal included, is present independently with
    probability ``p``; present entries are drawn from uniform(-1, 1).

    Args:
        b: Number of nodes.
        p: Connection probability, strictly between 0 and 1.
        seed: Seed for the generator; equal seeds give identical matrices.

    Returns:
        A ``b x b`` CSR matrix.
    """
    if int(b) != b or b < 1:
        raise ParameterError(f"node count must be a positive integer, got {b!r}")
    if not 0.0 < p < 1.0:
        raise ParameterError(f"connection probability must lie in (0, 1), got {p!r}")
    b = int(b)
    rng = np.random.default_rng(seed)
    rows, cols = np.nonzero(rng.random((b, b)) < p)
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    return sp.csr_matrix((vals, (rows, cols)), shape=(b, b))


def _as_operator(M):
    if sp.issparse(M):
        return M.tocsr()
    return np.asarray(M, dtype=float)


def power_iteration(M, tol: float = 1e-10, maxiter: int = 10_000, seed: int = 0):
    """Estimate the dominant eigenvalue modulus by power iteration.

    Returns:
        Tuple ``(estimate, converged)``. ``converged`` is False when the
        relative change of the estimate never fell below ``tol``; this is
        typical when the dominant eigenvalues form a complex pair.
    """
    M = _as_operator(M)
    n = M.shape[0]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(maxiter):
        w = M @ v
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0, True
        v = w / nrm
        if abs(nrm - est) <= tol * nrm:
            return nrm, True
        est = nrm
    return est, False


def spectral_radius(M, tol: float = 1e-10, maxiter: int = 10_000, return_info: bool = False):
    """Largest eigenvalue modulus of a square matrix.

    Matrices up to ``DENSE_EIG_LIMIT`` rows use a dense eigensolver. Larger
    ones use :func:`power_iteration`, falling back to ARPACK when it does
    not converge.

    Args:
        M: Square dense array or scipy sparse matrix.
        tol: Relative tolerance of the power iteration.
        maxiter: Iteration cap of the power iteration.
        return_info: Also return a convergence flag.

    Returns:
        The spectral radius, or ``(radius, converged)`` if ``return_info``.
    """
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"spectral radius needs a square matrix, got shape {M.shape}")
    n = M.shape[0]
    if sp.issparse(M) and M.nnz == 0:
        rho, ok = 0.0, True
    elif n <= DENSE_EIG_LIMIT:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        rho, ok = float(np.max(np.abs(np.linalg.eigvals(dense)))), True
    else:
        rho, ok = power_iteration(M, tol=tol, maxiter=maxiter)
        if not ok:
            try:
                vals = spla.eigs(_as_operator(M).astype(float), k=1, which="LM",
                                 return_eigenvectors=False, maxiter=maxiter)
                rho, ok = float(np.abs(vals[0])), True
            except spla.ArpackNoConvergence:
                logger.warning("spectral radius estimate did not converge (n=%d)", n)
    return (rho, ok) if return_info else rho


def normalize_spectral(M, target_rho: float):
    """Rescale ``M`` so its spectral radius equals ``target_rho``.

    Raises:
        ZeroSpectralRadiusError: if ``M`` has spectral radius zero.
    """
    if not target_rho > 0:
        raise ParameterError(f"target spectral radius must be positive, got {target_rho!r}")
    rho = spectral_radius(M)
    if rho <= np.finfo(float).tiny:
        raise ZeroSpectralRadiusError("cannot normalize a matrix with zero spectral radius")
    return M * (target_rho / rho)


def kronecker(A, B) -> np.ndarray:
    """Kronecker product of two dense matrices."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return np.kron(A, B)


def ridge_solve(Y, R, beta: float) -> np.ndarray:
    """Solve ``W = Y R^T (R R^T + beta I)^-1`` without forming an inverse.

    The symmetric system ``(R R^T + beta I) W^T = R Y^T`` is solved by a
    Cholesky factorization.

    Args:
        Y: Targets, shape ``(p, N)``.
        R: Regressors, shape ``(n, N)``.
        beta: Tikhonov regularization, ``>= 0``.

    Returns:
        Readout weights of shape ``(p, n)``.

    Raises:
        SingularMatrixError: if ``beta == 0`` and ``R R^T`` is singular.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if Y.shape[1] != R.shape[1]:
        raise ShapeError(f"Y has {Y.shape[1]} columns but R has {R.shape[1]}")
    if beta < 0:
        raise ParameterError(f"regularization must be non-negative, got {beta!r}")
    n = R.shape[0]
    A = R @ R.T
    A[np.diag_indices(n)] += beta
    rhs = R @ Y.T
    try:
        c, low = la.cho_factor(A, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        if beta == 0:
            raise SingularMatrixError("R R^T is singular; use beta > 0") from exc
        # Positive definite in exact arithmetic; round-off broke the factorization.
        logger.debug("Cholesky failed with beta=%g, using symmetric solve", beta)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            return la.solve(A, rhs, assume_a="sym").T
    if beta == 0:
        diag = np.abs(np.diag(c))
        if diag.min() ** 2 <= n * np.finfo(float).eps * diag.max() ** 2:
            raise SingularMatrixError("R R^T is numerically singular; use beta > 0")
    return la.cho_solve((c, low), rhs, check_finite=False).T

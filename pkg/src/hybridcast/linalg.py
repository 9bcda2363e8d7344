"""Least-squares plumbing shared by the AR fitter and the stationarity test.

Solves are done through a QR factorization of the design matrix rather than the
normal equations, which keeps the conditioning of the problem at sqrt of what
X'X would impose.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularDesignError


def solve_least_squares(design: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve min ||design @ beta - targets||^2 by QR.

    Returns (beta, rss). Raises SingularDesignError when the design matrix is
    rank deficient instead of silently regularizing.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n, k = design.shape
    if n < k:
        raise SingularDesignError(f"{n} rows cannot determine {k} coefficients")
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = np.finfo(float).eps * max(n, k) * (diag.max() if diag.size else 0.0)
    if diag.size == 0 or (diag <= tol).any():
        raise SingularDesignError("design matrix is rank deficient")
    beta = _back_substitute(r, q.T @ targets)
    resid = targets - design @ beta
    return beta, float(resid @ resid)


def solve_with_standard_errors(
    design: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, float, np.ndarray]:
    """Like solve_least_squares, also returning per-coefficient standard errors.

    Standard errors come from s^2 * diag((X'X)^-1) with s^2 = rss / (n - k),
    computed through the R factor so X'X is never formed.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n, k = design.shape
    beta, rss = solve_least_squares(design, targets)
    if n <= k:
        raise SingularDesignError("no residual degrees of freedom for standard errors")
    _, r = np.linalg.qr(design)
    r_inv = _invert_upper(r)
    xtx_inv_diag = (r_inv * r_inv).sum(axis=1)
    sigma2 = rss / (n - k)
    return beta, rss, np.sqrt(sigma2 * xtx_inv_diag)


def _back_substitute(r: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    k = r.shape[0]
    beta = np.zeros(k)
    for i in range(k - 1, -1, -1):
        beta[i] = (rhs[i] - r[i, i + 1 :] @ beta[i + 1 :]) / r[i, i]
    return beta


def _invert_upper(r: np.ndarray) -> np.ndarray:
    k = r.shape[0]
    inv = np.zeros((k, k))
    for col in range(k):
        rhs = np.zeros(k)
        rhs[col] = 1.0
        inv[:, col] = _back_substitute(r, rhs)
    return inv

"""Small dense least-squares helpers shared by the estimators and tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import SingularRegressionError

# Relative tolerance on |R_jj| / max|R_ii| below which a column is treated as
# linearly dependent on the preceding ones.
RANK_TOL = 1e-10


def check_rank(X: np.ndarray, names: Sequence[str] | None = None, tol: float = RANK_TOL) -> None:
    """Raise :class:`SingularRegressionError` naming the first dependent column.

    Uses an unpivoted QR decomposition: column ``j`` lies (numerically) in the
    span of columns ``0..j-1`` exactly when ``|R[j, j]|`` collapses relative to
    the column norms.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if names is None:
        names = [f"x{j}" for j in range(k)]
    if k == 0:
        return
    if n < k:
        raise SingularRegressionError(
            f"{n} observations cannot identify {k} coefficients", column=names[min(n, k - 1)]
        )
    norms = np.linalg.norm(X, axis=0)
    for j, nm in enumerate(names):
        if norms[j] == 0.0:
            raise SingularRegressionError(f"column {nm!r} is identically zero", column=nm)
    r = np.abs(np.diag(np.linalg.qr(X / norms, mode="r")))
    bad = np.flatnonzero(r <= tol * max(r.max(), 1.0))
    if bad.size:
        nm = names[bad[0]]
        raise SingularRegressionError(
            f"regressor {nm!r} is linearly dependent on the preceding columns", column=nm
        )


def lstsq(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via QR; assumes full column rank."""
    q, r = np.linalg.qr(X)
    return sla.solve_triangular(r, q.T @ y)


def inv_xtx(X: np.ndarray) -> np.ndarray:
    """``(X'X)^{-1}`` computed from the R factor of X."""
    r = np.linalg.qr(X, mode="r")
    rinv = sla.solve_triangular(r, np.eye(r.shape[0]))
    return rinv @ rinv.T


def projection_fit(Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Fitted values ``P_Z A`` of regressing each column of A on Z."""
    q, _ = np.linalg.qr(Z)
    return q @ (q.T @ A)


def pinv_quadratic_form(q: np.ndarray, V: np.ndarray, rtol: float = 1e-8) -> tuple[float, int]:
    """Return ``q' V^+ q`` and ``rank(V)`` for a symmetric, possibly indefinite V.

    Eigenvalues with ``|lambda| <= rtol * max|lambda|`` are treated as zero.
    """
    V = 0.5 * (V + V.T)
    w, U = np.linalg.eigh(V)
    scale = np.abs(w).max() if w.size else 0.0
    if scale == 0.0:
        return 0.0, 0
    keep = np.abs(w) > rtol * scale
    proj = U[:, keep].T @ q
    return float(np.sum(proj**2 / w[keep])), int(keep.sum())


def batch_tstat(Y: np.ndarray, X: np.ndarray, col: int) -> np.ndarray:
    """t-statistics of coefficient ``col`` in many regressions at once.

    Parameters
    ----------
    Y : ndarray, shape (R, n)
    X : ndarray, shape (R, n, k)

    Returns
    -------
    ndarray, shape (R,)
        ``nan`` where a regression is singular or has zero residual variance.
    """
    R, n, k = X.shape
    xtx = np.einsum("rni,rnj->rij", X, X)
    xty = np.einsum("rni,rn->ri", X, Y)
    out = np.full(R, np.nan)
    # Guard singular draws individually rather than failing the whole batch.
    cond = np.linalg.cond(xtx)
    ok = np.isfinite(cond) & (cond < 1e14)
    if not ok.any():
        return out
    xtx_i = np.linalg.inv(xtx[ok])
    beta = np.einsum("rij,rj->ri", xtx_i, xty[ok])
    resid = Y[ok] - np.einsum("rni,ri->rn", X[ok], beta)
    s2 = np.einsum("rn,rn->r", resid, resid) / (n - k)
    var = s2 * xtx_i[:, col, col]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = beta[:, col] / np.sqrt(var)
    t[~(var > 0)] = np.nan
    out[ok] = t
    return out

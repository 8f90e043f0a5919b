"""Weighted least-squares kernel shared by every design routine.

All solvers in the package reduce to

    minimize  sum_k w_k |D_k - (C h)_k|^2

with ``w`` applied to *squared* residuals. The problem is solved through a
QR factorization of the ``sqrt(w)``-scaled rows rather than through the
normal equations, which keeps large-exponent IRLS weights well behaved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "CONDITION_LIMIT",
    "RankDeficientError",
    "WlsSolution",
    "solve_wls",
    "real_part_projection",
    "ProjectionResult",
]

CONDITION_LIMIT = 1e12
IMAG_WARNING_RATIO = 1e-6


class RankDeficientError(ValueError):
    """Raised when the weighted design matrix is numerically rank deficient.

    Attributes
    ----------
    condition_estimate : float
        Ratio of the largest to the smallest ``|R_ii|`` of the QR factor.
    """

    def __init__(self, condition_estimate: float, message: str | None = None):
        self.condition_estimate = float(condition_estimate)
        if message is None:
            message = (
                "weighted design matrix is rank deficient "
                f"(condition estimate {self.condition_estimate:.3g})"
            )
        super().__init__(message)


@dataclass(frozen=True)
class WlsSolution:
    """Result of a weighted least-squares solve.

    Attributes
    ----------
    coefficients : ndarray
        Minimizer ``h`` (real when the problem is real or when real
        coefficients were requested).
    residual : ndarray
        ``C @ h - D`` over all rows, including zero-weight rows.
    condition_estimate : float
        Diagonal-ratio estimate of the condition number of the scaled matrix.
    """

    coefficients: np.ndarray
    residual: np.ndarray
    condition_estimate: float


def _as_matrix(C) -> np.ndarray:
    C = np.asarray(C)
    if C.ndim != 2:
        raise ValueError(f"design matrix must be 2-D, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("design matrix contains non-finite entries")
    return C


def solve_wls(C, D, w=None, *, real_coefficients: bool = False) -> WlsSolution:
    """Solve a weighted linear least-squares problem.

    Parameters
    ----------
    C : array_like, shape (L, n)
        Real or complex design matrix.
    D : array_like, shape (L,)
        Desired samples.
    w : array_like, shape (L,), optional
        Nonnegative weights multiplying the squared residuals. Defaults to
        ones.
    real_coefficients : bool, default False
        Restrict ``h`` to real values for a complex problem. The real and
        imaginary parts of each weighted row are stacked, which is the same
        minimizer as solving on the conjugate-symmetric extension of the grid.

    Returns
    -------
    WlsSolution

    Raises
    ------
    ValueError
        On dimension mismatch, negative or non-finite weights, or fewer
        positive weights than unknowns.
    RankDeficientError
        When the condition estimate exceeds ``CONDITION_LIMIT``.
    """
    C = _as_matrix(C)
    L, n = C.shape
    D = np.asarray(D)
    if D.shape != (L,):
        raise ValueError(f"desired vector has shape {D.shape}, expected ({L},)")
    if not np.all(np.isfinite(D)):
        raise ValueError("desired vector contains non-finite entries")
    if w is None:
        w = np.ones(L)
    w = np.asarray(w, dtype=float)
    if w.shape != (L,):
        raise ValueError(f"weight vector has shape {w.shape}, expected ({L},)")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    if L < n:
        raise ValueError(f"need at least as many rows as unknowns (L={L}, n={n})")
    if np.count_nonzero(w) < n:
        raise ValueError(
            f"at least {n} weights must be positive, got {np.count_nonzero(w)}"
        )

    s = np.sqrt(w)
    A = C * s[:, None]
    y = D * s
    if real_coefficients and (np.iscomplexobj(A) or np.iscomplexobj(y)):
        A = np.vstack([A.real, A.imag])
        y = np.concatenate([y.real, y.imag])

    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(R))
    dmax = diag.max() if diag.size else 0.0
    dmin = diag.min() if diag.size else 0.0
    cond = np.inf if dmin == 0 else max(dmax / dmin, 1.0)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise RankDeficientError(cond)
    h = scipy.linalg.solve_triangular(R, Q.conj().T @ y)
    if real_coefficients:
        h = np.real(h)
    residual = C @ h - D
    return WlsSolution(coefficients=h, residual=residual, condition_estimate=float(cond))


@dataclass(frozen=True)
class ProjectionResult:
    """Real part of a coefficient vector with the discarded imaginary mass."""

    values: np.ndarray
    max_imag: float
    flagged: bool


def real_part_projection(x) -> ProjectionResult:
    """Discard the imaginary part of a nominally real coefficient vector.

    The result is flagged when ``max|imag| > 1e-6 * max|real|``; this is a
    diagnostic, not an error.

    Examples
    --------
    >>> real_part_projection([1 + 0j, 2 + 0j]).values
    array([1., 2.])
    """
    x = np.asarray(x)
    re = np.real(x).astype(float)
    im = np.abs(np.imag(x)) if np.iscomplexobj(x) else np.zeros_like(re)
    max_imag = float(im.max()) if im.size else 0.0
    scale = float(np.abs(re).max()) if re.size else 0.0
    flagged = max_imag > IMAG_WARNING_RATIO * scale
    return ProjectionResult(values=re, max_imag=max_imag, flagged=bool(flagged))

"""Design matrices for FIR problems.

Linear-phase filters of length ``N`` have ``H(w) = exp(j(K1 - w M)) A(w)``
with ``M = (N - 1)/2`` and a real amplitude ``A``. Amplitude coefficients
are ordered center-first, ``a_m = h(M - m)``, so the Type I row at ``w = 0``
reads ``[1, 2, 2, ...]``.

=====  ======  ==========  ===========================================
type   N       symmetry    amplitude
=====  ======  ==========  ===========================================
I      odd     even        h(M) + 2 sum_{m=1}^{M} a_m cos(w m)
II     even    even        2 sum_{m=0}^{N/2-1} a_m cos(w (m + 1/2))
III    odd     odd         2 sum_{m=1}^{M} a_m sin(w m)
IV     even    odd         2 sum_{m=0}^{N/2-1} a_m sin(w (m + 1/2))
=====  ======  ==========  ===========================================
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FrequencyGrid

__all__ = [
    "LinearPhaseKernel",
    "linear_phase_kernel",
    "n_amplitude_coefficients",
    "amplitude_to_impulse",
    "impulse_to_amplitude",
    "complex_kernel",
    "autocorrelation",
    "psd_kernel",
    "fir_response",
]

_KINDS = ("I", "II", "III", "IV")


def _omegas(grid) -> np.ndarray:
    if isinstance(grid, FrequencyGrid):
        return grid.omegas
    return np.atleast_1d(np.asarray(grid, dtype=float))


def _check_kind(N: int, kind: str) -> None:
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    if N < 1:
        raise ValueError(f"filter length must be positive, got {N}")
    odd = N % 2 == 1
    if kind in ("I", "III") and not odd:
        raise ValueError(f"type {kind} needs an odd length, got N={N}")
    if kind in ("II", "IV") and odd:
        raise ValueError(f"type {kind} needs an even length, got N={N}")
    if kind == "III" and N < 3:
        raise ValueError("type III needs N >= 3")


def n_amplitude_coefficients(N: int, kind: str) -> int:
    """Number of free amplitude coefficients for a linear-phase type."""
    _check_kind(N, kind)
    if kind == "I":
        return (N - 1) // 2 + 1
    if kind == "III":
        return (N - 1) // 2
    return N // 2


@dataclass(frozen=True)
class LinearPhaseKernel:
    """Real amplitude kernel for one of the four linear-phase types.

    Attributes
    ----------
    kind : str
    N : int
    matrix : ndarray, shape (L, n)
    phase_offset : float
        ``K1``: 0 for even symmetry, ``pi/2`` for odd symmetry.
    """

    kind: str
    N: int
    matrix: np.ndarray
    phase_offset: float

    @property
    def M(self) -> float:
        return (self.N - 1) / 2

    @property
    def phase_slope(self) -> float:
        """``K2 = -M``."""
        return -self.M


def _amplitude_args(N: int, kind: str) -> np.ndarray:
    if kind == "I":
        return np.arange((N - 1) // 2 + 1, dtype=float)
    if kind == "III":
        return np.arange(1, (N - 1) // 2 + 1, dtype=float)
    return np.arange(N // 2) + 0.5


def linear_phase_kernel(grid, N: int, kind: str = "I") -> LinearPhaseKernel:
    """Amplitude kernel ``C`` with ``A(w_k) = (C a)_k``.

    Examples
    --------
    >>> linear_phase_kernel([0.0], 5, "I").matrix
    array([[1., 2., 2.]])
    """
    _check_kind(N, kind)
    w = _omegas(grid)
    args = _amplitude_args(N, kind)
    if kind in ("I", "II"):
        C = 2 * np.cos(np.outer(w, args))
        if kind == "I":
            C[:, 0] = 1.0
        offset = 0.0
    else:
        C = 2 * np.sin(np.outer(w, args))
        offset = np.pi / 2
    return LinearPhaseKernel(kind=kind, N=N, matrix=C, phase_offset=offset)


def amplitude_to_impulse(a, kind: str, N: int) -> np.ndarray:
    """Expand center-first amplitude coefficients into the impulse response."""
    n = n_amplitude_coefficients(N, kind)
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"type {kind}, N={N} needs {n} amplitude coefficients, got {a.shape}")
    h = np.zeros(N)
    sign = 1.0 if kind in ("I", "II") else -1.0
    if kind in ("I", "III"):
        M = (N - 1) // 2
        ms = np.arange(n) if kind == "I" else np.arange(1, n + 1)
        h[M - ms] = a
        h[M + ms] = sign * a
        if kind == "I":
            h[M] = a[0]
    else:
        half = N // 2
        m = np.arange(n)
        h[half - 1 - m] = a
        h[half + m] = sign * a
    return h


def impulse_to_amplitude(h, kind: str) -> np.ndarray:
    """Read the center-first amplitude coefficients off a symmetric ``h``.

    Only the first half of ``h`` is used; symmetry is not checked.
    """
    h = np.asarray(h, dtype=float)
    N = h.size
    n = n_amplitude_coefficients(N, kind)
    if kind == "I":
        M = (N - 1) // 2
        return h[M - np.arange(n)].copy()
    if kind == "III":
        M = (N - 1) // 2
        return h[M - np.arange(1, n + 1)].copy()
    return h[N // 2 - 1 - np.arange(n)].copy()


def complex_kernel(grid, N: int) -> np.ndarray:
    """Fourier kernel with entry ``(k, n) = exp(-j w_k n)``."""
    if N < 1:
        raise ValueError(f"filter length must be positive, got {N}")
    w = _omegas(grid)
    return np.exp(-1j * np.outer(w, np.arange(N)))


def fir_response(h, grid) -> np.ndarray:
    """Frequency response ``sum_n h(n) exp(-j w n)`` of an FIR filter."""
    h = np.asarray(h)
    return complex_kernel(grid, h.size) @ h


def autocorrelation(h) -> np.ndarray:
    """Nonnegative-lag autocorrelation ``r(n) = sum_k h(k) h(n + k)``.

    Examples
    --------
    >>> autocorrelation([1.0, 1.0])
    array([2., 1.])
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size < 1:
        raise ValueError("autocorrelation needs a nonempty 1-D sequence")
    return np.correlate(h, h, mode="full")[h.size - 1:]


def psd_kernel(grid, N: int) -> np.ndarray:
    """Kernel mapping autocorrelation lags to ``R(w) = |H(w)|^2``.

    Rows are ``[1, 2 cos w, ..., 2 cos (N-1) w]``.
    """
    if N < 1:
        raise ValueError(f"filter length must be positive, got {N}")
    w = _omegas(grid)
    C = 2 * np.cos(np.outer(w, np.arange(N)))
    C[:, 0] = 1.0
    return C
